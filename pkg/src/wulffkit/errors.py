"""Exception types raised across wulffkit."""


class WulffkitError(Exception):
    """Base class for all library errors."""


class ZeroVector(WulffkitError, ValueError):
    pass


class NoConvergence(WulffkitError, RuntimeError):
    pass


class NotElliptic(WulffkitError, ValueError):
    """Norm failed the sampled uniform-convexity check."""


class NotOnWulff(WulffkitError, ValueError):
    pass


class Unbounded(WulffkitError, ValueError):
    pass


class EmptyInterior(WulffkitError, ValueError):
    pass


class InsideBody(WulffkitError, ValueError):
    pass


class NotNormalDirection(WulffkitError, ValueError):
    pass


class AmbiguousProjection(WulffkitError, ValueError):
    pass


class IllConditioned(WulffkitError, RuntimeError):
    pass


class NotSmoothVariant(WulffkitError, TypeError):
    pass


class NotPolygon(WulffkitError, TypeError):
    pass


class SingularDesign(WulffkitError, ValueError):
    pass


class NonMeanConvex(WulffkitError, ValueError):
    pass


class InsufficientSamples(WulffkitError, RuntimeError):
    pass


class ConfigParse(WulffkitError, ValueError):
    pass


class TaskFailure(WulffkitError, RuntimeError):
    pass
