"""Command-line front end: the detection pipeline, the CVA baselines, and
metric evaluation, with reproducible parameterization.

Every output-producing command writes a provenance sidecar holding the
effective parameters; two runs with identical sidecars produce identical
outputs.  Exit codes: 0 success, 1 validation failure, 2 I/O failure,
3 internal error.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import logging
import sys
from dataclasses import dataclass, fields
from pathlib import Path

from .baselines import cva_magnitude, cva_map, cva_sam
from .errors import ValidationError
from .evaluation import confusion, metrics
from .formats import (
    read_change_map,
    read_embedding,
    read_image,
    read_mask_set,
    write_change_map,
)
from .raster import BinaryMask, resize_image, resize_nearest
from .scoring import run_pipeline, score_table_csv

__all__ = ["RunConfig", "main"]

log = logging.getLogger("mergesam")

VERSION = "0.1.0"


@dataclass
class RunConfig:
    """Effective pipeline parameters, mirroring the published settings."""

    t_iou: float = 0.75
    min_area: int = 8
    otsu_bins: int = 256
    matched_unchanged: bool = False
    area_weighted: bool = False
    resize_long_side: int = 1600
    zscore: bool = False

    def validate(self) -> None:
        if not 0 < self.t_iou <= 1:
            raise ValidationError(f"t_iou must be in (0, 1], got {self.t_iou}")
        if self.min_area < 1:
            raise ValidationError(f"min_area must be >= 1, got {self.min_area}")
        if self.otsu_bins < 2:
            raise ValidationError(f"otsu_bins must be >= 2, got {self.otsu_bins}")
        if self.resize_long_side < 0:
            raise ValidationError(
                f"resize_long_side must be >= 0, got {self.resize_long_side}"
            )


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    with _stage("config"):
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(doc, dict):
        raise ValidationError(f"config {path}: top level must be an object")
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ValidationError(f"config {path}: unknown keys {unknown}")
    return doc


def _effective_config(args: argparse.Namespace) -> RunConfig:
    """Defaults, overridden by the config file, overridden by explicit flags."""
    values = _load_config_file(getattr(args, "config", None))
    for f in fields(RunConfig):
        flag_value = getattr(args, f.name, None)
        if flag_value is not None:
            values[f.name] = flag_value
    config = RunConfig(**values)
    config.validate()
    return config


@contextlib.contextmanager
def _stage(name: str):
    """Re-raise failures with the pipeline stage that caused them."""
    try:
        yield
    except ValidationError as exc:
        raise ValidationError(f"{name}: {exc}") from exc
    except OSError:
        raise
    except ValueError as exc:
        raise ValidationError(f"{name}: {exc}") from exc


def _write_provenance(out_path: Path, command: str, parameters: dict, inputs: dict, outputs: dict) -> Path:
    sidecar = Path(str(out_path) + ".provenance.json")
    doc = {
        "tool": "mergesam",
        "version": VERSION,
        "command": command,
        "parameters": parameters,
        "inputs": inputs,
        "outputs": outputs,
    }
    sidecar.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return sidecar


def _cmd_run(args: argparse.Namespace) -> int:
    config = _effective_config(args)
    with _stage("masks1"):
        set1 = read_mask_set(args.masks1)
    with _stage("masks2"):
        set2 = read_mask_set(args.masks2)
    with _stage("emb1"):
        emb1 = read_embedding(args.emb1)
    with _stage("emb2"):
        emb2 = read_embedding(args.emb2)
    if set1.dims != set2.dims:
        raise ValidationError(
            f"masks2: dims {set2.dims} do not match masks1 dims {set1.dims}"
        )
    if emb1.image_dims != set1.dims:
        raise ValidationError(
            f"emb1: aligned to {emb1.image_dims}, masks are {set1.dims}"
        )
    if emb2.image_dims != set2.dims:
        raise ValidationError(
            f"emb2: aligned to {emb2.image_dims}, masks are {set2.dims}"
        )

    with _stage("pipeline"):
        change_map, table = run_pipeline(
            [rec.mask for rec in set1.masks],
            [rec.mask for rec in set2.masks],
            emb1,
            emb2,
            t_iou=config.t_iou,
            min_area=config.min_area,
            otsu_bins=config.otsu_bins,
            matched_unchanged=config.matched_unchanged,
            area_weighted=config.area_weighted,
        )

    out_map = Path(args.out_map)
    out_scores = Path(args.out_scores)
    write_change_map(out_map, change_map)
    out_scores.write_text(score_table_csv(table), encoding="utf-8")
    _write_provenance(
        out_map,
        "run",
        {f.name: getattr(config, f.name) for f in fields(RunConfig)},
        {"masks1": args.masks1, "masks2": args.masks2, "emb1": args.emb1, "emb2": args.emb2},
        {"change_map": str(out_map), "score_table": str(out_scores)},
    )
    log.info(
        "run: %d units, %d changed pixels of %d",
        len(table),
        change_map.changed_count,
        change_map.dims.npixels,
    )
    return 0


def _read_image_resized(path: str, long_side: int, stage: str):
    with _stage(stage):
        img = read_image(path)
    if long_side > 0 and max(img.shape[:2]) > long_side:
        resized = resize_image(img, long_side)
        log.info(
            "%s: resized %dx%d -> %dx%d (long side %d)",
            stage,
            img.shape[1],
            img.shape[0],
            resized.shape[1],
            resized.shape[0],
            long_side,
        )
        return resized
    return img


def _cmd_cva(args: argparse.Namespace) -> int:
    config = _effective_config(args)
    img1 = _read_image_resized(args.img1, config.resize_long_side, "img1")
    img2 = _read_image_resized(args.img2, config.resize_long_side, "img2")
    if img1.shape[:2] != img2.shape[:2]:
        raise ValidationError(
            f"img2: size {img2.shape[1]}x{img2.shape[0]} does not match "
            f"img1 size {img1.shape[1]}x{img1.shape[0]}"
        )
    with _stage("cva"):
        change = cva_map(cva_magnitude(img1, img2, zscore=config.zscore), bins=config.otsu_bins)
    out = Path(args.out)
    write_change_map(out, change)
    _write_provenance(
        out,
        "cva",
        {
            "otsu_bins": config.otsu_bins,
            "zscore": config.zscore,
            "resize_long_side": config.resize_long_side,
        },
        {"img1": args.img1, "img2": args.img2},
        {"change_map": str(out)},
    )
    log.info("cva: %d changed pixels of %d", change.changed_count, change.dims.npixels)
    return 0


def _cmd_cva_sam(args: argparse.Namespace) -> int:
    config = _effective_config(args)
    img1 = _read_image_resized(args.img1, config.resize_long_side, "img1")
    img2 = _read_image_resized(args.img2, config.resize_long_side, "img2")
    with _stage("masks1"):
        set1 = read_mask_set(args.masks1)
    with _stage("masks2"):
        set2 = read_mask_set(args.masks2)
    if set1.dims != set2.dims:
        raise ValidationError(
            f"masks2: dims {set2.dims} do not match masks1 dims {set1.dims}"
        )
    for stage, img in (("img1", img1), ("img2", img2)):
        if (img.shape[1], img.shape[0]) != (set1.dims.width, set1.dims.height):
            raise ValidationError(
                f"{stage}: size {img.shape[1]}x{img.shape[0]} does not match "
                f"mask dims {set1.dims}"
            )
    with _stage("cva-sam"):
        change = cva_sam(
            img1,
            img2,
            [rec.mask for rec in set1.masks],
            [rec.mask for rec in set2.masks],
            min_area=config.min_area,
            zscore=config.zscore,
            bins=config.otsu_bins,
        )
    out = Path(args.out)
    write_change_map(out, change)
    _write_provenance(
        out,
        "cva-sam",
        {
            "min_area": config.min_area,
            "otsu_bins": config.otsu_bins,
            "zscore": config.zscore,
            "resize_long_side": config.resize_long_side,
        },
        {
            "img1": args.img1,
            "img2": args.img2,
            "masks1": args.masks1,
            "masks2": args.masks2,
        },
        {"change_map": str(out)},
    )
    log.info("cva-sam: %d changed pixels of %d", change.changed_count, change.dims.npixels)
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    with _stage("pred"):
        pred = read_change_map(args.pred)
    with _stage("ref"):
        ref = read_change_map(args.ref)
    resized_ref = False
    if ref.dims != pred.dims:
        log.info("ref: resized %s -> %s (nearest neighbor)", ref.dims, pred.dims)
        ref = resize_nearest(ref, pred.dims)
        resized_ref = True
    ignore = None
    if args.ignore is not None:
        with _stage("ignore"):
            ignore_map = read_change_map(args.ignore)
        if ignore_map.dims != pred.dims:
            log.info(
                "ignore: resized %s -> %s (nearest neighbor)", ignore_map.dims, pred.dims
            )
            ignore_map = resize_nearest(ignore_map, pred.dims)
        ignore = BinaryMask.from_array(ignore_map.data)
    with _stage("metrics"):
        report = metrics(confusion(pred, ref, ignore))

    doc = report.to_json_dict()
    doc["parameters"] = {
        "pred": args.pred,
        "ref": args.ref,
        "ignore": args.ignore,
        "ref_resized": resized_ref,
    }
    doc["table"] = report.table()
    if args.out is not None:
        Path(args.out).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    print(report.table())
    return 0


def _add_config_flags(parser: argparse.ArgumentParser, names: tuple[str, ...]) -> None:
    # defaults stay None so the config file can distinguish "not given"
    if "t_iou" in names:
        parser.add_argument("--t-iou", dest="t_iou", type=float, default=None,
                            help="IoU threshold for cross-epoch mask pairing (default 0.75)")
    if "min_area" in names:
        parser.add_argument("--min-area", dest="min_area", type=int, default=None,
                            help="minimum analysis-unit area in pixels (default 8)")
    if "otsu_bins" in names:
        parser.add_argument("--otsu-bins", dest="otsu_bins", type=int, default=None,
                            help="histogram bins for Otsu thresholding (default 256)")
    if "matched_unchanged" in names:
        parser.add_argument("--matched-unchanged", dest="matched_unchanged",
                            action=argparse.BooleanOptionalAction, default=None,
                            help="assume matched units unchanged instead of scoring them")
    if "area_weighted" in names:
        parser.add_argument("--area-weighted", dest="area_weighted",
                            action=argparse.BooleanOptionalAction, default=None,
                            help="weight each unit score by its pixel area in the Otsu histogram")
    if "resize_long_side" in names:
        parser.add_argument("--long-side", dest="resize_long_side", type=int, default=None,
                            help="downscale images whose longest side exceeds this (default 1600, 0 disables)")
    if "zscore" in names:
        parser.add_argument("--zscore", dest="zscore",
                            action=argparse.BooleanOptionalAction, default=None,
                            help="z-score normalize bands before differencing")
    parser.add_argument("--config", default=None,
                        help="JSON config file; explicit flags override its values")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mergesam",
        description="Unsupervised change detection over mask/embedding interchange files",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the full detection pipeline")
    p_run.add_argument("--masks1", required=True, help="epoch-1 mask set file")
    p_run.add_argument("--masks2", required=True, help="epoch-2 mask set file")
    p_run.add_argument("--emb1", required=True, help="epoch-1 embedding grid file")
    p_run.add_argument("--emb2", required=True, help="epoch-2 embedding grid file")
    p_run.add_argument("--out-map", required=True, help="output change map PNG")
    p_run.add_argument("--out-scores", required=True, help="output per-unit score table CSV")
    _add_config_flags(
        p_run,
        ("t_iou", "min_area", "otsu_bins", "matched_unchanged", "area_weighted", "resize_long_side"),
    )
    p_run.set_defaults(func=_cmd_run)

    p_cva = sub.add_parser("cva", help="pixelwise change vector analysis baseline")
    p_cva.add_argument("--img1", required=True)
    p_cva.add_argument("--img2", required=True)
    p_cva.add_argument("--out", required=True, help="output change map PNG")
    _add_config_flags(p_cva, ("otsu_bins", "resize_long_side", "zscore"))
    p_cva.set_defaults(func=_cmd_cva)

    p_cvs = sub.add_parser("cva-sam", help="object-refined CVA baseline over mask regions")
    p_cvs.add_argument("--img1", required=True)
    p_cvs.add_argument("--img2", required=True)
    p_cvs.add_argument("--masks1", required=True)
    p_cvs.add_argument("--masks2", required=True)
    p_cvs.add_argument("--out", required=True, help="output change map PNG")
    _add_config_flags(p_cvs, ("min_area", "otsu_bins", "resize_long_side", "zscore"))
    p_cvs.set_defaults(func=_cmd_cva_sam)

    p_eval = sub.add_parser("eval", help="score a change map against a reference")
    p_eval.add_argument("--pred", required=True, help="predicted change map PNG")
    p_eval.add_argument("--ref", required=True, help="reference change map PNG")
    p_eval.add_argument("--ignore", default=None, help="optional ignore-region PNG (255 = ignored)")
    p_eval.add_argument("--out", default=None, help="optional JSON report path")
    p_eval.set_defaults(func=_cmd_eval)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s", stream=sys.stderr)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, ValueError) as exc:
        log.error("%s", exc)
        return 1
    except OSError as exc:
        log.error("%s", exc)
        return 2
    except Exception:  # pragma: no cover - internal invariant breach
        log.exception("internal error")
        return 3


if __name__ == "__main__":
    sys.exit(main())
