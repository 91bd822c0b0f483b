"""Exception and warning types shared across the package.

Every error carries a short machine-readable ``code`` which the CLI prints
on failure, plus an ``exit_status`` (2 for configuration/geometry problems,
3 for numerical failures).
"""


class LBSolveError(Exception):
    code = "ERROR"
    exit_status = 2


# geometry ------------------------------------------------------------------

class GeometryError(LBSolveError):
    code = "GEOMETRY_INVALID"


class NorthPoleSingular(GeometryError):
    code = "NORTH_POLE_SINGULAR"


class DegenerateCap(GeometryError):
    code = "DEGENERATE_CAP"


class DegenerateEllipse(GeometryError):
    code = "DEGENERATE_ELLIPSE"


class SelfIntersecting(GeometryError):
    code = "SELF_INTERSECTING"


class TooFewVertices(GeometryError):
    code = "TOO_FEW_VERTICES"


class ZeroSpeed(GeometryError):
    code = "ZERO_SPEED"


class OverlappingIslands(GeometryError):
    code = "OVERLAPPING_ISLANDS"


class AnchorOutsideIsland(GeometryError):
    code = "ANCHOR_OUTSIDE_ISLAND"


class GeometryParseError(GeometryError):
    code = "GEOMETRY_PARSE"


# kernels / evaluation -------------------------------------------------------

class CoincidentPoints(LBSolveError):
    code = "COINCIDENT_POINTS"


class TargetOnBoundary(LBSolveError):
    code = "TARGET_ON_BOUNDARY"


class TargetInsideIsland(LBSolveError):
    code = "TARGET_INSIDE_ISLAND"


class VortexInsideIsland(LBSolveError):
    code = "VORTEX_INSIDE_ISLAND"

    def __init__(self, index, message=None):
        self.index = index
        super().__init__(message or f"vortex {index} lies inside an island")


class CoincidentPole(LBSolveError):
    code = "COINCIDENT_POLE"


# linear algebra --------------------------------------------------------------

class DimensionMismatch(LBSolveError):
    code = "DIMENSION_MISMATCH"


class SingularSchur(LBSolveError):
    code = "SINGULAR_SCHUR"
    exit_status = 3


class SingularMatrix(LBSolveError):
    code = "SINGULAR_MATRIX"
    exit_status = 3


class TooLarge(LBSolveError):
    code = "TOO_LARGE"


class NoConvergence(LBSolveError):
    code = "NO_CONVERGENCE"
    exit_status = 3

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


# fmm ------------------------------------------------------------------------

class TargetEqualsSource(LBSolveError):
    code = "TARGET_EQUALS_SOURCE"
    exit_status = 3


class NoRun(LBSolveError):
    code = "NO_RUN"


# cli ------------------------------------------------------------------------

class ConfigInvalid(LBSolveError):
    code = "CONFIG_INVALID"


# warnings -------------------------------------------------------------------

class NoNorthPoleIsland(UserWarning):
    """No island covers the north pole; the projected domain is unbounded."""


class TargetNearBoundary(UserWarning):
    """Evaluation target close enough to the boundary that the trapezoid rule loses accuracy."""


class DuplicatePointsOverflow(UserWarning):
    """A quadtree leaf at max depth holds more points than the leaf capacity."""
