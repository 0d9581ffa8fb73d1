"""Exception hierarchy shared by every module in the lab."""


class DBLabError(Exception):
    """Base class for all lab errors."""


class InvalidLengthError(DBLabError, ValueError):
    pass


class LayoutError(DBLabError, ValueError):
    pass


class InvalidParameterError(DBLabError, ValueError):
    pass


class ConfigurationError(DBLabError, ValueError):
    """Protocol parameters that do not describe a valid instance."""


class MalformedTranscriptError(DBLabError, ValueError):
    pass


class DomainError(DBLabError, ValueError):
    """Argument outside the mathematical domain of a formula."""


class ResourceLimitError(DBLabError):
    """Request exceeds an enumeration or memory limit."""
