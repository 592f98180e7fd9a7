"""Exception types shared across the package.

Error messages name the module and the violated invariant so that CLI
failures are attributable without a traceback.
"""


class ConfigError(ValueError):
    """Invalid configuration or arguments that violate an operation contract."""


class NumericalError(RuntimeError):
    """Numerical failure: non-PSD covariance, quadrature tail breach, etc."""
