"""Exception hierarchy shared by all modules."""


class LaplineError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(LaplineError):
    pass


# track
class MalformedTrack(LaplineError):
    pass


class TopologyError(LaplineError):
    pass


class GridTooCoarse(LaplineError):
    pass


# vehicle
class DomainError(LaplineError, ValueError):
    pass


class WheelLiftError(LaplineError):
    pass


# tirefit
class SchemaError(LaplineError):
    pass


class IllConditionedFit(LaplineError):
    pass


# uncertainty / backoff
class CovarianceError(LaplineError):
    pass


class InfeasibleCorridor(LaplineError):
    pass


# planner
class TranscriptionError(LaplineError):
    pass


class NotConverged(LaplineError):
    """Solver hit its iteration limit; ``result`` carries the best iterate."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class InfeasibleProblem(LaplineError):
    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


# montecarlo
class ProbeError(LaplineError):
    pass


# metrics
class NoCompleteLap(LaplineError):
    pass
