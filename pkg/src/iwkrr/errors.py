"""Exception hierarchy shared across the package."""


class IWKRRError(Exception):
    pass


class ConfigurationError(IWKRRError, ValueError):
    """Bad user-supplied configuration (profile, scheme, sweep document)."""


class DataError(IWKRRError, ValueError):
    """Non-finite or mis-shaped numerical input."""


class ModelError(IWKRRError):
    """A modelling assumption is violated (e.g. nonpositive curvature)."""


class SingularSystemError(IWKRRError, ArithmeticError):
    pass
