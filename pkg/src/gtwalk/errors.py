"""Exception types shared across the package."""


class GtwalkError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInput(GtwalkError, ValueError):
    """Bad argument: non-finite coordinates, base-point mismatch, etc."""


class DegenerateGeodesic(GtwalkError, ValueError):
    """A geodesic between coincident endpoints was requested."""


class UnsupportedOperation(GtwalkError, NotImplementedError):
    """The model does not support this operation (e.g. numeric-chart distance)."""


class SingularConfiguration(GtwalkError, ArithmeticError):
    """A normalization factor vanished (e.g. conjugate-point crossing)."""


class ConfigError(GtwalkError, ValueError):
    """Experiment configuration is malformed; message names the key path."""
