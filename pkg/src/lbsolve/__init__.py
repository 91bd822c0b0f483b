"""Fast boundary-integral solver for Laplace-Beltrami Dirichlet problems on the sphere with islands."""

__version__ = "0.1.0"

from .errors import LBSolveError
from .geometry import (
    BoundaryCurve,
    IslandDomain,
    cap_domain,
    make_cap_circle,
    make_domain,
    make_plane_ellipse,
    make_sphere_ellipse,
    resample_polyline,
    stereo_inverse,
    stereo_project,
)
from .linsys import GmresConfig
from .solver import (
    PointVortexSet,
    Solution,
    SolverConfig,
    evaluate_solution,
    exact_harmonic,
    solve_dirichlet,
    solve_point_vortices,
)

__all__ = [
    "BoundaryCurve", "GmresConfig", "IslandDomain", "LBSolveError", "PointVortexSet", "Solution",
    "SolverConfig", "cap_domain", "evaluate_solution", "exact_harmonic", "make_cap_circle", "make_domain",
    "make_plane_ellipse", "make_sphere_ellipse", "resample_polyline", "solve_dirichlet",
    "solve_point_vortices", "stereo_inverse", "stereo_project",
]
