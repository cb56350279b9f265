"""Exception types shared across the package."""


class ValidationError(ValueError):
    """An input file, parameter, or record failed validation.

    Messages name the offending object (mask id, field, path) so CLI users
    can locate the problem without a stack trace.
    """
