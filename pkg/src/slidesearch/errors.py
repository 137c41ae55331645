"""Exception hierarchy shared across the package."""


class SlideSearchError(Exception):
    """Base class for all package errors."""


class ConfigError(SlideSearchError):
    """Invalid configuration or command-line arguments (exit code 2)."""


class DataError(SlideSearchError):
    """Invalid or inconsistent input data / files (exit code 3)."""


class DegenerateDataError(ValueError):
    """A statistic is undefined on this input (zero variance, identical data)."""
