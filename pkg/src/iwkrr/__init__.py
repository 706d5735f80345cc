"""Importance-weighted kernel ridge regression under covariate shift in high dimension."""

from .errors import ConfigurationError, DataError, IWKRRError, ModelError, SingularSystemError

__all__ = ["ConfigurationError", "DataError", "IWKRRError", "ModelError", "SingularSystemError"]
__version__ = "0.1.0"
