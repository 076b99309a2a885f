"""Exception types shared across the package."""


class FormatError(ValueError):
    """A file does not conform to the expected binary or JSON layout."""


class TruncationError(FormatError):
    """A file header declares more payload than the file contains."""


class ValidationError(ValueError):
    """Data violates an invariant (non-finite values, bad labels, duplicate ids)."""


class ShapeError(ValueError):
    """Array dimensions are inconsistent between operands."""


class ConfigError(ValueError):
    """A configuration value is out of range or inconsistent with the data."""


class MissingLabelsError(ValueError):
    """An operation requiring labels was applied to an unlabeled set."""
