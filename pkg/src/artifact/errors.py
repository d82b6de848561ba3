"""Exception hierarchy shared by all modules."""


class GeometryError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(GeometryError, ValueError):
    pass


class NotPositiveDefiniteError(ValidationError):
    pass


class NonTameError(ValidationError):
    def __init__(self, point, min_eig):
        self.point = point
        self.min_eig = min_eig
        super().__init__(f"J does not tame omega at point {list(point)} (smallest eigenvalue {min_eig:.3e})")


class BoundaryProximityError(GeometryError):
    pass


class UnsupportedOrderError(GeometryError):
    pass


class IllConditionedPairError(GeometryError):
    pass


class DegenerateEmbeddingError(GeometryError):
    pass


class OutOfTubeError(GeometryError):
    pass


class NoTubeError(GeometryError):
    pass


class ConstructionUnavailableError(GeometryError):
    pass


class ThresholdError(GeometryError):
    pass


class QuadratureError(GeometryError):
    pass


class RangeError(GeometryError, ValueError):
    pass


class ScenarioError(GeometryError):
    pass


class ChartExitError(GeometryError):
    pass
