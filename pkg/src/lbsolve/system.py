"""The augmented Nyström system: layer densities plus singular source strengths.

Unknowns are ordered curve-major densities ``sigma`` followed by the source
strengths ``A_1..A_M``.  The block system is

    [ I + 2hK   E ] [sigma]   [2g]
    [   F       D ] [  A  ] = [ 0]

with ``E[i, m] = 2 G(xi_i, anchor_m)``.  Bottom row 0 enforces
``sum_k A_k = 0``; row ``k >= 1`` enforces ``sum_j sigma^k_j = 0``.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DimensionMismatch
from .fmm import CauchyFMM
from .kernels import CONVENTION, correction_weights, dlp_apply_direct, dlp_kernel_diag, green_plane, kernel_matrix


@dataclass(frozen=True, eq=False)
class DiscreteSystem:
    domain: object
    rhs: np.ndarray
    E: np.ndarray
    mode: str = "fmm"
    eps: float = 1e-14
    leaf_capacity: int = 30
    max_depth: int = 30
    conv: object = field(default=CONVENTION)

    @property
    def n_density(self):
        return self.domain.n_nodes

    @property
    def n_islands(self):
        return self.domain.n_islands

    @property
    def dim(self):
        return self.n_density + self.n_islands

    @cached_property
    def F(self):
        dom = self.domain
        F = np.zeros((dom.n_islands, dom.n_nodes))
        for k in range(1, dom.n_islands):
            F[k, dom.curve_slice(k)] = 1.0
        return F

    @cached_property
    def D(self):
        D = np.zeros((self.n_islands, self.n_islands))
        D[0, :] = 1.0
        return D

    def apply_F(self, x):
        """``F @ x`` in O(N) using per-curve sums; ``x`` may have trailing columns."""
        x = np.asarray(x)
        sums = np.add.reduceat(x, self.domain.offsets[:-1], axis=0)
        sums[0] = 0.0
        return sums

    @cached_property
    def _dense_kernel(self):
        return kernel_matrix(self.domain, self.conv)

    @cached_property
    def _fmm(self):
        return CauchyFMM(self.domain.nodes, None, self.eps, self.leaf_capacity, self.max_depth)

    @cached_property
    def _diag_and_corr(self):
        dom = self.domain
        diag = dlp_kernel_diag(dom.nodes, dom.d_nodes, dom.curvatures, self.conv)
        corr = correction_weights(dom.nodes, dom.d_nodes, self.conv)
        # the diagonal kernel already contains the node's own correction term
        return diag - corr, corr

    def kernel_apply(self, sigma, mode=None):
        """``sum_j h_j K_ij sigma_j`` at every node."""
        mode = mode or self.mode
        dom = self.domain
        ws = dom.weights * sigma
        if mode == "direct":
            return self._dense_kernel @ ws
        if mode != "fmm":
            raise ValueError(f"unknown apply mode {mode!r}")
        cauchy = self._fmm(ws * dom.d_nodes)
        curv, corr = self._diag_and_corr
        return self.conv.sign_cauchy / (2.0 * np.pi) * cauchy.imag + curv * ws + corr @ ws

    @property
    def fmm(self):
        return self._fmm


def assemble(domain, g, mode="fmm", eps=1e-14, leaf_capacity=30, max_depth=30, conv=CONVENTION):
    """Assemble the augmented system for boundary values ``g`` at every node."""
    g = np.asarray(g, dtype=float)
    if g.shape != (domain.n_nodes,):
        raise DimensionMismatch(f"boundary data has shape {g.shape}, expected ({domain.n_nodes},)")
    if not np.all(np.isfinite(g)):
        raise ValueError("boundary data must be finite")
    E = 2.0 * green_plane(domain.nodes[:, None], domain.anchors[None, :])
    rhs = np.concatenate([2.0 * g, np.zeros(domain.n_islands)])
    return DiscreteSystem(domain, rhs, E, mode, eps, leaf_capacity, max_depth, conv)


def apply_operator(sys, v, mode=None):
    """Matrix-free product with the augmented system matrix."""
    v = np.asarray(v, dtype=float)
    if v.shape != (sys.dim,):
        raise DimensionMismatch(f"vector has shape {v.shape}, expected ({sys.dim},)")
    n = sys.n_density
    sigma, a = v[:n], v[n:]
    top = sigma + 2.0 * sys.kernel_apply(sigma, mode) + sys.E @ a
    bottom = sys.apply_F(sigma) + sys.D @ a
    return np.concatenate([top, bottom])


# ---------------------------------------------------------------------------
# Constant-density identities and homogeneous solutions
# ---------------------------------------------------------------------------

@dataclass
class IdentityValues:
    inside: float      # bounded side of curve k in the plane
    boundary: np.ndarray  # principal-value potential at every node of curve k
    outside: float     # unbounded side of curve k
    D: float           # target-independent contribution of curve k


def island_constant(domain, k, conv=CONVENTION):
    """Target-independent part of the potential of unit density on curve ``k``.

    Equals plus or minus the spherical island area over 4 pi.
    """
    c = domain.curves[k]
    return float(c.h * correction_weights(c.nodes, c.d_nodes, conv).sum())


def unit_density(domain, k):
    sigma = np.zeros(domain.n_nodes)
    sigma[domain.curve_slice(k)] = 1.0
    return sigma


def identity_values(domain, k, conv=CONVENTION):
    """Potential of unit density on curve ``k`` inside, on and outside the curve.

    For the north-pole island the expected values are ``(1 + D, 1/2 + D, D)``;
    for bounded islands ``(-1 + D, -1/2 + D, D)``.
    """
    c = domain.curves[k]
    sigma = unit_density(domain, k)
    probe = domain.domain_probe()
    if c.island_outside:
        inside_pt, outside_pt = probe, domain.anchors[k]
    else:
        inside_pt, outside_pt = domain.anchors[k], probe
    vals = dlp_apply_direct(domain, sigma, [inside_pt, outside_pt], conv=conv)
    on = dlp_apply_direct(domain, sigma, on_boundary=True, conv=conv)[domain.curve_slice(k)] - 0.5
    return IdentityValues(float(vals[0]), on, float(vals[1]), island_constant(domain, k, conv))


def domain_value(domain, k, conv=CONVENTION):
    """Value of the unit-density potential of curve ``k`` inside the solution domain."""
    D = island_constant(domain, k, conv)
    return D + 1.0 if domain.curves[k].island_outside else D


def homogeneous_density(domain, i, conv=CONVENTION):
    """Density annihilated by the unaugmented operator: 1 on curve 0, ``-V_0/D_i`` on curve ``i``."""
    if domain.n_islands < 2:
        raise ValueError("a single island has no homogeneous solutions")
    if not 1 <= i < domain.n_islands:
        raise ValueError(f"index {i} outside 1..{domain.n_islands - 1}")
    sigma = unit_density(domain, 0)
    sigma[domain.curve_slice(i)] = -domain_value(domain, 0, conv) / island_constant(domain, i, conv)
    return sigma


def homogeneous_residual(domain, i, conv=CONVENTION):
    """Relative sup-norm residual of the unaugmented operator on :func:`homogeneous_density`."""
    sigma = homogeneous_density(domain, i, conv)
    res = dlp_apply_direct(domain, sigma, on_boundary=True, conv=conv)
    return float(np.abs(res).max() / np.abs(sigma).max())


def unaugmented_matrix(domain, conv=CONVENTION):
    """Dense ``I/2 + hK`` acting on densities alone."""
    return 0.5 * np.eye(domain.n_nodes) + kernel_matrix(domain, conv) * domain.weights[None, :]
