"""Exception types raised across the package."""


class MlcRelayError(Exception):
    """Base class for all package errors."""


class SingularMatrix(MlcRelayError, ValueError):
    pass


class EllTooLarge(MlcRelayError, ValueError):
    pass


class ZeroCoefficient(MlcRelayError, ValueError):
    pass


class DimensionMismatch(MlcRelayError, ValueError):
    pass


class GeneratorMismatch(MlcRelayError, ValueError):
    pass


class EmptySubset(MlcRelayError, ValueError):
    pass


class QuadratureDivergence(MlcRelayError, ArithmeticError):
    pass


class ConstructionFailed(MlcRelayError, RuntimeError):
    pass


class WindowNotBracketing(MlcRelayError, ValueError):
    pass
