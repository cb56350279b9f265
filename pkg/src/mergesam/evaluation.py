"""Confusion-matrix accounting and the five change-detection metrics:
precision, recall, F1, overall accuracy, and Cohen's kappa.

"Changed" is the positive class throughout.  Ratios with a zero
denominator are reported as 0 and flagged as undefined instead of NaN so
tabulation stays stable.
"""

from __future__ import annotations

from dataclasses import dataclass

from .raster import BinaryMask, ChangeMap

__all__ = ["ConfusionCounts", "MetricsReport", "confusion", "metrics"]

METRIC_NAMES = ("f1", "precision", "recall", "oa", "kappa")
_TABLE_HEADERS = ("F1", "Prec.", "Rec.", "OA", "Kappa")


@dataclass(frozen=True)
class ConfusionCounts:
    """Pixel counts with changed as the positive class."""

    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass
class MetricsReport:
    """The five metrics as fractions, plus the counts they came from.

    ``undefined`` lists metrics whose denominator was zero (their value is
    reported as 0).  Kappa lives in [-1, 1]; the rest in [0, 1].
    """

    counts: ConfusionCounts
    precision: float
    recall: float
    f1: float
    oa: float
    kappa: float
    undefined: tuple[str, ...] = ()

    def percentages(self) -> dict[str, float]:
        return {name: getattr(self, name) * 100.0 for name in METRIC_NAMES}

    def table(self) -> str:
        """Fixed-width two-line table, percent scale: F1 Prec. Rec. OA Kappa."""
        pct = self.percentages()
        header = "".join(f"{h:>8}" for h in _TABLE_HEADERS)
        row = "".join(f"{pct[name]:>8.2f}" for name in METRIC_NAMES)
        return header + "\n" + row

    def to_json_dict(self) -> dict:
        return {
            "counts": {
                "tp": self.counts.tp,
                "fp": self.counts.fp,
                "fn": self.counts.fn,
                "tn": self.counts.tn,
                "total": self.counts.total,
            },
            "fractions": {name: getattr(self, name) for name in METRIC_NAMES},
            "percent": self.percentages(),
            "undefined": list(self.undefined),
        }


def confusion(
    pred: ChangeMap, ref: ChangeMap, ignore: BinaryMask | None = None
) -> ConfusionCounts:
    """Pixelwise confusion counts, excluding pixels under ``ignore``."""
    if pred.dims != ref.dims:
        raise ValueError(f"dimension mismatch: pred is {pred.dims}, ref is {ref.dims}")
    p = pred.data
    r = ref.data
    if ignore is not None:
        if ignore.dims != pred.dims:
            raise ValueError(
                f"dimension mismatch: ignore is {ignore.dims}, maps are {pred.dims}"
            )
        keep = ~ignore.decode()
        p = p[keep]
        r = r[keep]
    tp = int((p & r).sum())
    fp = int((p & ~r).sum())
    fn = int((~p & r).sum())
    tn = int((~p & ~r).sum())
    return ConfusionCounts(tp, fp, fn, tn)


def metrics(counts: ConfusionCounts) -> MetricsReport:
    """Compute the five metrics from confusion counts.

    kappa = (p_o - p_e) / (1 - p_e) with p_o the overall accuracy and
    p_e = [(tp+fp)(tp+fn) + (fn+tn)(fp+tn)] / N^2.
    """
    tp, fp, fn, tn = counts.tp, counts.fp, counts.fn, counts.tn
    n = counts.total
    if n <= 0:
        raise ValueError("no evaluated pixels (N = 0)")
    undefined: list[str] = []

    def ratio(num: float, den: float, name: str) -> float:
        if den == 0:
            undefined.append(name)
            return 0.0
        return num / den

    precision = ratio(tp, tp + fp, "precision")
    recall = ratio(tp, tp + fn, "recall")
    f1 = ratio(2 * precision * recall, precision + recall, "f1")
    oa = (tp + tn) / n
    p_e = ((tp + fp) * (tp + fn) + (fn + tn) * (fp + tn)) / (n * n)
    kappa = ratio(oa - p_e, 1.0 - p_e, "kappa")
    return MetricsReport(
        counts=counts,
        precision=precision,
        recall=recall,
        f1=f1,
        oa=oa,
        kappa=kappa,
        undefined=tuple(undefined),
    )
