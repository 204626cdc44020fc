"""Shared exception types."""


class ConfigError(ValueError):
    """A structural mismatch: wrong dimensions, missing mode requirements."""


class FormatError(ValueError):
    """A file or wire record that cannot be parsed, or wrong version/checksum."""


class NoDataError(RuntimeError):
    """An operation that needs observations was called on an empty store."""
