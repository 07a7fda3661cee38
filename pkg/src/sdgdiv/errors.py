"""Shared exception types."""


class SdgdivError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(SdgdivError):
    """Invalid run configuration (missing sources, bad ranges, ...)."""


class SchemaError(SdgdivError):
    """A field mapping references a field that does not exist."""
