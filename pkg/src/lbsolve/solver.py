"""End-to-end Dirichlet solves, field evaluation, point vortices and studies."""

import logging
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import CoincidentPole, NoConvergence, TargetInsideIsland, TargetNearBoundary, VortexInsideIsland
from .fmm import CauchyFMM
from .geometry import fibonacci_sphere, stereo_inverse, stereo_project, trig_interpolate
from .kernels import CONVENTION, correction_weights, dlp_apply_direct, dlp_kernel, green_plane
from .linsys import (
    DENSE_LIMIT,
    GmresConfig,
    apply_preconditioner,
    build_preconditioner,
    condition_estimate,
    condition_number,
    dense_materialize,
    gmres,
    operator_closure,
)
from .system import assemble

logger = logging.getLogger(__name__)


@dataclass
class SolverConfig:
    gmres: GmresConfig = field(default_factory=GmresConfig)
    mode: str = "fmm"
    eps: float = 1e-14
    leaf_capacity: int = 30
    max_depth: int = 30
    precondition: bool = True


@dataclass
class Solution:
    """Layer density and source strengths representing the harmonic field."""

    domain: object
    sigma: np.ndarray
    A: np.ndarray
    system: object = None
    iterations: int = 0
    residuals: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    conv: object = CONVENTION


def boundary_values(domain, g):
    """Per-node boundary data from a callable on plane points or an explicit array."""
    if callable(g):
        return np.asarray(g(domain.nodes), dtype=float)
    g = np.asarray(g, dtype=float)
    if g.ndim == 0:
        return np.full(domain.n_nodes, float(g))
    return g


def solve_dirichlet(domain, g, cfg=None):
    """Solve the Laplace-Beltrami Dirichlet problem outside the islands.

    Raises :class:`NoConvergence` (carrying the last GMRES result) when the
    iteration limit is hit.
    """
    cfg = cfg or SolverConfig()
    data = boundary_values(domain, g)
    tic = time.perf_counter()
    sys = assemble(domain, data, cfg.mode, cfg.eps, cfg.leaf_capacity, cfg.max_depth)
    t_assemble = time.perf_counter() - tic

    tic = time.perf_counter()
    prec = build_preconditioner(sys) if cfg.precondition else None
    t_prec = time.perf_counter() - tic

    tic = time.perf_counter()
    result = gmres(operator_closure(sys), sys.rhs, prec, cfg.gmres)
    t_solve = time.perf_counter() - tic
    if not result.converged:
        raise NoConvergence(
            f"GMRES stopped after {result.iterations} iterations at residual {result.residuals[-1]:.3e}", result)
    n = sys.n_density
    logger.info("solved %d unknowns in %d iterations (%.2fs)", sys.dim, result.iterations, t_solve)
    return Solution(domain, result.x[:n].copy(), result.x[n:].copy(), sys, result.iterations, result.residuals,
                    {"assemble": t_assemble, "precondition": t_prec, "solve": t_solve})


def _as_plane(targets):
    t = np.asarray(targets)
    if np.iscomplexobj(t):
        return np.atleast_1d(t).astype(complex)
    if t.ndim >= 1 and t.shape[-1] == 3:
        return np.atleast_1d(stereo_project(t))
    if t.ndim >= 1 and t.shape[-1] == 2:
        return np.atleast_1d(t[..., 0] + 1j * t[..., 1])
    return np.atleast_1d(t.astype(complex))


def near_boundary_mask(domain, z):
    """True where a target is within five node spacings of some curve."""
    z = np.atleast_1d(z)
    mask = np.zeros(z.shape, dtype=bool)
    for c in domain.curves:
        tol = 5.0 * c.h * np.abs(c.d_nodes).max()
        lo = c.nodes.real.min() - tol, c.nodes.imag.min() - tol
        hi = c.nodes.real.max() + tol, c.nodes.imag.max() + tol
        cand = np.flatnonzero((z.real >= lo[0]) & (z.real <= hi[0]) & (z.imag >= lo[1]) & (z.imag <= hi[1]))
        for s in range(0, cand.size, 512):
            idx = cand[s:s + 512]
            d = np.abs(z[idx, None] - c.nodes[None, :]).min(axis=1)
            mask[idx] |= d < tol
    return mask


def _check_targets(domain, z):
    inside = domain.island_of(z)
    if np.any(inside >= 0):
        bad = int(np.flatnonzero(inside >= 0)[0])
        raise TargetInsideIsland(f"target {bad} lies in island {inside[bad]}")
    near = near_boundary_mask(domain, z)
    if near.any():
        warnings.warn(f"{int(near.sum())} target(s) close to the boundary; accuracy reduced",
                      TargetNearBoundary, stacklevel=3)
    return near


def double_layer(domain, sigma, z, mode="fmm", eps=1e-14, leaf_capacity=30, max_depth=30, conv=CONVENTION):
    """Double-layer potential at off-boundary plane points."""
    if mode == "direct":
        return dlp_apply_direct(domain, sigma, z, conv=conv)
    ws = domain.weights * sigma
    fmm = CauchyFMM(domain.nodes, z, eps, leaf_capacity, max_depth)
    cauchy = fmm(ws * domain.d_nodes)
    corr = correction_weights(domain.nodes, domain.d_nodes, conv) @ ws
    return conv.sign_cauchy / (2.0 * np.pi) * cauchy.imag + corr


def evaluate_solution(sol, targets, mode=None, check=True):
    """Evaluate the solution at plane (complex) or sphere (``(n, 3)``) targets."""
    z = _as_plane(targets)
    if check:
        _check_targets(sol.domain, z)
    sys = sol.system
    mode = mode or (sys.mode if sys is not None else "fmm")
    eps = sys.eps if sys is not None else 1e-14
    vals = double_layer(sol.domain, sol.sigma, z, mode, eps, conv=sol.conv)
    vals += green_plane(z[:, None], sol.domain.anchors[None, :]) @ sol.A
    return vals


def evaluate_on_boundary(sol, curve, alphas):
    """Limit of the solution from the domain at boundary points ``xi_curve(alpha)``.

    Densities and positions are trigonometrically interpolated, so ``alphas``
    need not be nodes (but must not coincide with one).
    """
    dom = sol.domain
    c = dom.curves[curve]
    alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
    t, _ = c.interpolate(alphas)
    sig_t = trig_interpolate(sol.sigma[dom.curve_slice(curve)], alphas)
    K = dlp_kernel(t[:, None], dom.nodes[None, :], dom.d_nodes[None, :], sol.conv)
    vals = 0.5 * sig_t + K @ (dom.weights * sol.sigma)
    vals += green_plane(t[:, None], dom.anchors[None, :]) @ sol.A
    return t, vals


def offnode_boundary_points(domain, n_points):
    """``n_points`` (curve, alpha) pairs at node midpoints, spread over all curves."""
    m = domain.n_islands
    per = np.full(m, n_points // m)
    per[: n_points % m] += 1
    out = []
    for k, c in enumerate(domain.curves):
        if per[k] == 0:
            continue
        idx = np.linspace(0, c.n_nodes, per[k], endpoint=False).astype(int)
        out.append((k, (idx + 0.5) * c.h))
    return out


def exact_harmonic(xi, poles):
    """``1/2 sum_k Re 1/(xi - pole_k)``: harmonic away from the poles."""
    xi = np.asarray(xi, dtype=complex)
    poles = np.atleast_1d(np.asarray(poles, dtype=complex))
    diff = xi[..., None] - poles
    if np.any(diff == 0):
        raise CoincidentPole("evaluation point coincides with a pole")
    return 0.5 * np.real(1.0 / diff).sum(axis=-1)


# ---------------------------------------------------------------------------
# Point vortices
# ---------------------------------------------------------------------------

@dataclass
class PointVortexSet:
    positions: np.ndarray
    strengths: np.ndarray

    def __post_init__(self):
        self.positions = np.atleast_1d(np.asarray(self.positions, dtype=complex))
        self.strengths = np.atleast_1d(np.asarray(self.strengths, dtype=float))
        if self.positions.shape != self.strengths.shape:
            raise ValueError("one strength per vortex")

    def field(self, z):
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        if self.positions.size == 0:
            return np.zeros(z.shape)
        return green_plane(z[:, None], self.positions[None, :]) @ self.strengths


@dataclass
class VortexField:
    """Stream function ``psi = psi* + sum_j Gamma_j G(., vortex_j)``."""

    solution: Solution
    vortices: PointVortexSet

    def __call__(self, targets, mode=None):
        z = _as_plane(targets)
        return evaluate_solution(self.solution, z, mode) + self.vortices.field(z)

    def boundary_residual(self, n_points=100):
        """Max |psi| at off-node boundary points, relative to the largest boundary datum."""
        dom = self.solution.domain
        worst = 0.0
        for k, alphas in offnode_boundary_points(dom, n_points):
            t, vals = evaluate_on_boundary(self.solution, k, alphas)
            worst = max(worst, float(np.abs(vals + self.vortices.field(t)).max()))
        scale = float(np.abs(self.vortices.field(dom.nodes)).max()) if self.vortices.positions.size else 1.0
        return worst / max(scale, 1e-300), worst, scale


def solve_point_vortices(domain, vortices, cfg=None):
    """Zero stream function on every coastline with the given vortices in the ocean."""
    inside = domain.island_of(vortices.positions)
    if np.any(inside >= 0):
        raise VortexInsideIsland(int(np.flatnonzero(inside >= 0)[0]))
    g = -vortices.field(domain.nodes)
    return VortexField(solve_dirichlet(domain, g, cfg), vortices)


def random_vortices(domain, count, seed=0, strength=2.0 * np.pi, separation=0.1):
    """Vortices scattered uniformly over the sphere part of the solution domain."""
    rng = np.random.default_rng(seed)
    found = []
    min_chord = 2.0 * np.sin(separation / 2.0)
    bx = stereo_inverse(domain.nodes)
    while len(found) < count:
        x = rng.standard_normal((4 * count + 16, 3))
        x /= np.linalg.norm(x, axis=1, keepdims=True)
        x = x[1.0 - x[:, 2] > 1e-3]
        z = stereo_project(x)
        ok = domain.in_domain(z)
        for xi, zi in zip(x[ok], z[ok]):
            if np.linalg.norm(bx - xi, axis=1).min() > min_chord:
                found.append(zi)
            if len(found) == count:
                break
    strengths = rng.uniform(-strength, strength, count)
    return PointVortexSet(np.array(found, dtype=complex), strengths)


# ---------------------------------------------------------------------------
# Studies
# ---------------------------------------------------------------------------

def sample_points(domain, n_samples=80, separation=0.1, n_candidates=4000):
    """Fixed quasi-random domain points at least ``separation`` (geodesic) from every curve."""
    cand = fibonacci_sphere(n_candidates)
    cand = cand[1.0 - cand[:, 2] > 1e-6]
    z = stereo_project(cand)
    ok = domain.in_domain(z)
    cand, z = cand[ok], z[ok]
    fine = []
    for c in domain.curves:
        alphas = np.linspace(0.0, 2.0 * np.pi, 4 * c.n_nodes, endpoint=False)
        fine.append(stereo_inverse(c.interpolate(alphas)[0]))
    bx = np.concatenate(fine)
    dist = np.array([np.linalg.norm(bx - x, axis=1).min() for x in cand])
    keep = z[dist > 2.0 * np.sin(separation / 2.0)]
    if keep.size < n_samples:
        raise ValueError(f"only {keep.size} sample points clear the boundary")
    idx = np.linspace(0, keep.size, n_samples, endpoint=False).astype(int)
    return keep[idx]


def max_relative_error(approx, exact):
    return float(np.abs(approx - exact).max() / np.abs(exact).max())


@dataclass
class StudyRow:
    N: int
    iters_unprec: int
    iters_prec: int
    cond_unprec: float
    cond_prec: float
    error: float
    cpu: float


def convergence_study(builder, exact, n_list, cfg=None, samples=None, conditioning=True, unpreconditioned=True):
    """Solve at each ``N`` and tabulate iterations, conditioning, error and time.

    ``builder(N)`` returns a domain and ``exact(z)`` the reference solution,
    which also supplies the boundary data.  Condition numbers come from a full
    SVD up to the dense size guard and from :func:`condition_estimate` above it.
    """
    cfg = cfg or SolverConfig()
    n_list = list(n_list)
    if not n_list:
        raise ValueError("empty N list")
    if samples is None:
        samples = sample_points(builder(max(n_list)))
    exact_vals = exact(samples)
    rows = []
    for n in n_list:
        dom = builder(n)
        sol = solve_dirichlet(dom, exact, SolverConfig(cfg.gmres, cfg.mode, cfg.eps, cfg.leaf_capacity,
                                                        cfg.max_depth, True))
        err = max_relative_error(evaluate_solution(sol, samples, check=False), exact_vals)
        it_un = -1
        if unpreconditioned:
            res = gmres(operator_closure(sol.system), sol.system.rhs, None, cfg.gmres)
            it_un = res.iterations if res.converged else -res.iterations
        c_un = c_pr = float("nan")
        if conditioning:
            A = dense_materialize(sol.system, None)
            P = apply_preconditioner(build_preconditioner(sol.system), A)
            cond = condition_number if sol.system.dim <= DENSE_LIMIT else condition_estimate
            c_un, c_pr = cond(A), cond(P)
            del A, P
        rows.append(StudyRow(n, it_un, sol.iterations, c_un, c_pr, err, sol.timings["solve"]))
        logger.info("N=%d iters=%d error=%.3e", n, sol.iterations, err)
    return rows


@dataclass
class BenchRow:
    N: int
    iterations: int
    cpu_prec: float
    cpu_solve: float
    error: float
    depth: int


def scaling_benchmark(builder, exact, n_list, cfg=None, samples=None):
    """Preconditioned FMM solves across ``N`` with timing and tree-depth columns."""
    cfg = cfg or SolverConfig()
    n_list = list(n_list)
    if not n_list:
        raise ValueError("empty N list")
    if samples is None:
        samples = sample_points(builder(max(n_list)))
    exact_vals = exact(samples)
    rows = []
    for n in n_list:
        dom = builder(n)
        sol = solve_dirichlet(dom, exact, cfg)
        err = max_relative_error(evaluate_solution(sol, samples, check=False), exact_vals)
        depth = sol.system.fmm.tree.depth if cfg.mode == "fmm" else -1
        rows.append(BenchRow(n, sol.iterations, sol.timings["precondition"], sol.timings["solve"], err, depth))
    return rows
