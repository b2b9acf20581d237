"""Exception types shared across the pipeline."""


class GenremapError(Exception):
    """Base class for all pipeline errors."""


class MetadataError(GenremapError):
    """A metadata row could not be parsed. Always fatal."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"metadata line {line_number}: {message}")
        self.line_number = line_number


class DegenerateVolumeError(GenremapError):
    """A volume has no usable content after trimming and consolidation."""


class ShortfallError(GenremapError):
    """Not enough eligible volumes to satisfy a draw."""


class ConvergenceError(GenremapError):
    """The optimizer failed to reach the required gradient tolerance."""

    def __init__(self, message: str, grad_norm: float | None = None,
                 iterations: int | None = None):
        super().__init__(message)
        self.grad_norm = grad_norm
        self.iterations = iterations


class ConfigError(GenremapError):
    """A pipeline configuration value violates the schema.

    The message starts with the dotted field path (e.g. "corpus.metadata").
    """
