"""Exception hierarchy shared by all modules."""


class ThinTubeError(Exception):
    """Base class for every error raised by the package."""


class ConfigError(ThinTubeError, ValueError):
    """Invalid user input (configuration, profile data, sizes)."""


class OpenCurve(ConfigError):
    pass


class DegenerateCurve(ConfigError):
    pass


class PeriodicityViolation(ConfigError):
    pass


class GridMismatch(ConfigError):
    pass


class TubeOverlap(ConfigError):
    pass


class ResolutionTooCoarse(ConfigError):
    pass


class ProblemTooLarge(ConfigError):
    pass


class MetricDegenerate(ConfigError):
    pass


class DegeneracyDetected(ConfigError):
    pass


class GapViolation(ConfigError):
    pass


class GaugeInconsistency(ThinTubeError):
    pass


class SolverFailure(ThinTubeError):
    pass


class GuardFailure(ThinTubeError):
    """A numerical guard refused to certify a result."""


class MeshNotConverged(GuardFailure):
    pass


class CutoffLeak(GuardFailure):
    pass


class InsufficientSpectrum(GuardFailure):
    pass
