"""Exception types raised across the package."""


class ConfigurationError(ValueError):
    """Unknown method/dataset/architecture name or inconsistent settings."""


class InvalidTableauError(ValueError):
    pass


class UnsupportedError(ValueError):
    """Requested feature lies outside what is implemented (e.g. implicit tableaux)."""


class ShapeError(ValueError):
    pass


class ContractError(ValueError):
    """Arguments violate an operation's precondition (mismatched cache, empty batch, ...)."""


class DataError(ValueError):
    pass


class FormatError(DataError):
    """Malformed file contents (bad IDX magic, truncated payload, bad CSV row)."""


class LineSearchError(RuntimeError):
    pass


class OracleError(RuntimeError):
    pass
