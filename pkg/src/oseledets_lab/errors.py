"""Exception types raised across the lab."""


class LabError(Exception):
    """Base class for all lab errors."""


class NonConvergence(LabError):
    pass


class DegenerateBasis(LabError):
    pass


class StepSizeFailure(LabError):
    pass


class ShapeError(LabError, ValueError):
    pass


class BoundError(LabError, ValueError):
    pass


class SkippedTruncated(LabError):
    """A check was requested on a record whose supremum may lie past the horizon."""


class NonConvexInput(LabError, ValueError):
    pass


class DegeneratePeriod(LabError, ValueError):
    pass


class BracketFailure(LabError):
    pass


class DegenerateProfile(LabError):
    """Rate function is infinite on the whole integration range.

    ``threshold`` carries the +inf sentinel for callers that want to continue.
    """

    def __init__(self, message, threshold=float("inf")):
        super().__init__(message)
        self.threshold = threshold


class AllZeroCounts(LabError):
    pass


class InsufficientSamples(LabError):
    pass


class TooFewExceedances(LabError, ValueError):
    pass


class BudgetInfeasible(LabError):
    def __init__(self, message, achieved_gap):
        super().__init__(message)
        self.achieved_gap = achieved_gap


class ConfigError(LabError, ValueError):
    def __init__(self, message, field=None):
        if field:
            message = f"{field}: {message}"
        super().__init__(message)
        self.field = field


class NoData(LabError):
    pass
