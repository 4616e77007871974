"""Exception hierarchy shared across the package."""


class LggdError(Exception):
    """Base class for all package errors."""


class IndexOutOfRange(LggdError):
    pass


class SelfLoop(LggdError):
    pass


class DuplicateEdge(LggdError):
    pass


class NonpositiveWeight(LggdError):
    pass


class IsolatedNode(LggdError):
    pass


class UnsupportedNorm(LggdError):
    """Raised for any p outside {1, inf}."""


class EmptySourceSet(LggdError):
    pass


class EmptyNeighborhood(LggdError):
    pass


class NotConverged(LggdError):
    def __init__(self, message, max_residual=None):
        super().__init__(message)
        self.max_residual = max_residual


class SizeMismatch(LggdError):
    pass


class NonpositiveStep(LggdError):
    pass


class ShapeMismatch(LggdError):
    pass


class EmptyBoundary(LggdError):
    pass


class EmptySplit(LggdError):
    pass


class LabelOutOfRange(LggdError):
    pass


class OverlapWithBoundary(LggdError):
    pass


class NotEnoughNonEdges(LggdError):
    pass


class InvalidProbability(LggdError):
    pass


class FractionSum(LggdError):
    pass


class FileMissing(LggdError):
    pass


class NodeCountMismatch(LggdError):
    pass


class TrainingDiverged(LggdError):
    pass


class ConfigError(LggdError):
    """Bad CLI/config input; maps to exit code 2."""
