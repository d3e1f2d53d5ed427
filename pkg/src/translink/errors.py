"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
anything else -> 4 (internal).
"""


class TranslinkError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(TranslinkError):
    """Invalid configuration: bad option values, malformed config files."""


class DataError(TranslinkError):
    """Invalid input data: malformed CSV rows, bad headers, broken binary files."""
