"""Exception types raised by hodgehx."""


class HodgeHXError(Exception):
    """Base class for all library errors."""


class MedialAxisError(HodgeHXError, ValueError):
    """Closest point on the surface is not unique."""


class InvalidResolution(HodgeHXError, ValueError):
    pass


class DegenerateElement(HodgeHXError, ValueError):
    pass


class UnsupportedFamily(HodgeHXError, ValueError):
    pass


class IncompatibleFamilies(HodgeHXError, ValueError):
    pass


class NotSPD(HodgeHXError, ValueError):
    pass


class ZeroDiagonal(HodgeHXError, ValueError):
    pass


class InvalidC(HodgeHXError, ValueError):
    pass


class DimensionMismatch(HodgeHXError, ValueError):
    pass


class BreakdownIndefinite(HodgeHXError, ArithmeticError):
    """CG met a direction of non-positive curvature."""


class RankDeficientSampling(HodgeHXError, RuntimeError):
    """Could not collect the requested number of independent kernel vectors."""


class MeshFormatError(HodgeHXError, ValueError):
    pass
