"""Executable analysis of quantitative key-security criteria on exact small instances."""

__version__ = "0.1.0"


class SizeGuardError(ValueError):
    """Raised when an enumeration or a joint operator would exceed the configured size cap."""
