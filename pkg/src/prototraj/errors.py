"""Exception types shared across the package."""


class PrototrajError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(PrototrajError):
    """Bad or inconsistent run configuration."""


class DataError(PrototrajError):
    """Malformed input data (corpus files, cache files, model files)."""


class CacheMissError(DataError):
    """An embedding lookup failed for one or more sentences."""

    def __init__(self, sentences):
        self.sentences = list(sentences)
        preview = "; ".join(repr(s) for s in self.sentences[:5])
        more = "" if len(self.sentences) <= 5 else f" (+{len(self.sentences) - 5} more)"
        super().__init__(f"embedding cache misses: {preview}{more}")


class NumericError(PrototrajError):
    """A numeric failure (NaN/Inf loss, invalid metric input)."""
