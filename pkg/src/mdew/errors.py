"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
anything else raised during a run -> 4.
"""


class MdewError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(MdewError):
    """Invalid experiment configuration or CLI arguments."""


class DataError(MdewError):
    """Malformed or unusable input data (CSV parsing, shapes, targets)."""


class ConvergenceError(MdewError):
    """An iterative optimizer failed to converge within its budget."""
