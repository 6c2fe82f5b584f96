"""Error types shared across the workbench.

Each operation raises the specific subclass named in its contract; all of
them derive from LabError so callers can catch the whole family at once.
"""


class LabError(Exception):
    pass


# measure_core
class ZeroMass(LabError):
    pass


class ComplexInput(LabError):
    pass


class EmptyRadii(LabError):
    pass


class RadiusBelowResolution(LabError):
    pass


class BetaOutOfRange(LabError):
    pass


class EmptyRestriction(LabError):
    pass


class InsufficientSeparation(LabError):
    pass


class DomainMismatch(LabError):
    pass


# fractal_gen
class ResolutionTooCoarse(LabError):
    pass


class EmptyIntersection(LabError):
    pass


class ParameterOutOfRange(LabError):
    pass


# norm_geometry
class CurvatureNonPositive(LabError):
    pass


class FlatArc(LabError):
    pass


# wave_packets
class ScaleOverflow(LabError):
    pass


class ThresholdExceedsOne(LabError):
    pass


class FrequencyLeakage(LabError):
    pass


class PointInsideTube(LabError):
    pass


# radial_projection
class PointTooClose(LabError):
    pass


# distance_transform
class SupportTooClose(LabError):
    pass


class BandLimitViolated(LabError):
    pass


class SupportViolated(LabError):
    pass


class TooFewScales(LabError):
    pass


# decoupling_bench
class EmptyY(LabError):
    pass


# erdos_distances
class DuplicatePoints(LabError):
    pass


class TooFewSizes(LabError):
    pass


# experiment_cli
class ConfigInvalid(LabError):
    def __init__(self, field, message):
        self.field = field
        super().__init__(f"config field '{field}': {message}")


class ComputeError(LabError):
    pass
