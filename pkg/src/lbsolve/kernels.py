"""Fundamental solutions and the double-layer Nyström kernel.

Kernel values are *per unit parameter* ``alpha`` of the source curve: the
trapezoid sum ``sum_j h K(target, j) sigma_j`` approximates the double-layer
potential.  The plane kernel is

    K = sign_cauchy/(2 pi) Im{dxi'/(xi - xi')}
        - sign_correction/(2 pi) Im{conj(xi') dxi'/(1 + |xi'|^2)}

and the constants in :data:`CONVENTION` are the ones for which it agrees
pointwise with the sphere-side kernel ``(1/2pi)(x - x').(s' x x')/|x - x'|^2``
times ``ds'/dalpha`` (checked in ``tests/test_kernels.py``).
"""

from dataclasses import dataclass

import numpy as np

from .errors import CoincidentPoints, TargetOnBoundary

LOG2_OVER_4PI = np.log(2.0) / (4.0 * np.pi)


@dataclass(frozen=True)
class KernelConvention:
    sign_cauchy: int = -1
    sign_correction: int = 1
    diag_curv_coeff: float = 1.0 / (4.0 * np.pi)


CONVENTION = KernelConvention()


def green_sphere(x, x0):
    """Generalized fundamental solution of the Laplace-Beltrami operator on the unit sphere."""
    x = np.asarray(x, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    dist = np.linalg.norm(x - x0, axis=-1)
    if np.any(dist <= 1e-14):
        raise CoincidentPoints("green_sphere evaluated at coincident points")
    return -np.log(dist) / (2.0 * np.pi) + LOG2_OVER_4PI


def green_plane(xi, xip):
    """The same fundamental solution written in stereographic coordinates."""
    xi = np.asarray(xi, dtype=complex)
    xip = np.asarray(xip, dtype=complex)
    diff2 = np.abs(xi - xip) ** 2
    if np.any(diff2 == 0):
        raise CoincidentPoints("green_plane evaluated at coincident points")
    arg = 2.0 * diff2 / ((1.0 + np.abs(xi) ** 2) * (1.0 + np.abs(xip) ** 2))
    return -np.log(arg) / (4.0 * np.pi)


def correction_weights(nodes, d_nodes, conv=CONVENTION):
    """Target-independent part of the kernel for each source node."""
    return -conv.sign_correction / (2.0 * np.pi) * np.imag(
        np.conj(nodes) * d_nodes / (1.0 + np.abs(nodes) ** 2))


def dlp_kernel(target, source, d_source, conv=CONVENTION):
    """Off-diagonal kernel for targets and sources at distinct positions (broadcasts)."""
    target = np.asarray(target, dtype=complex)
    source = np.asarray(source, dtype=complex)
    d_source = np.asarray(d_source, dtype=complex)
    cauchy = np.imag(d_source / (target - source))
    return conv.sign_cauchy / (2.0 * np.pi) * cauchy + correction_weights(source, d_source, conv)


def dlp_kernel_diag(node, d_node, curvature, conv=CONVENTION):
    """Limit of the kernel as source approaches target along the same curve."""
    return conv.diag_curv_coeff * np.asarray(curvature) * np.abs(d_node) + correction_weights(node, d_node, conv)


def dlp_kernel_sphere_oracle(target, source, source_tangent, source_speed):
    """Sphere-side double-layer kernel per unit parameter.

    Only used to validate the plane kernel; ``source_tangent`` is the unit
    tangent of the sphere curve at ``source`` and ``source_speed`` is
    ``ds'/dalpha``.
    """
    x = np.asarray(target, dtype=float)
    xp = np.asarray(source, dtype=float)
    diff = x - xp
    d2 = np.sum(diff * diff, axis=-1)
    if np.any(d2 <= 1e-28):
        raise CoincidentPoints("oracle evaluated at coincident points")
    normal = np.cross(source_tangent, xp)
    return np.sum(diff * normal, axis=-1) / d2 * np.asarray(source_speed) / (2.0 * np.pi)


def kernel_matrix(domain, conv=CONVENTION):
    """Dense kernel matrix ``K[i, j]`` over all boundary nodes (no quadrature weights)."""
    z = domain.nodes
    dz = domain.d_nodes
    diff = z[:, None] - z[None, :]
    np.fill_diagonal(diff, 1.0)
    K = conv.sign_cauchy / (2.0 * np.pi) * np.imag(dz[None, :] / diff)
    K += correction_weights(z, dz, conv)[None, :]
    K[np.diag_indices_from(K)] = dlp_kernel_diag(z, dz, domain.curvatures, conv)
    return K


def dlp_apply_direct(domain, sigma, targets=None, on_boundary=False, conv=CONVENTION, chunk=1024):
    """O(N^2) double-layer potential of ``sigma``.

    Off the boundary this returns the trapezoid sum at each plane target.
    With ``on_boundary=True`` the targets are the boundary nodes themselves
    and the result is the limit from the solution domain,
    ``sigma/2 + (principal value sum)``.
    """
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (domain.n_nodes,):
        raise ValueError(f"density must have {domain.n_nodes} entries")
    w = domain.weights * sigma
    if on_boundary:
        if targets is not None:
            raise ValueError("on-boundary evaluation is at the nodes; pass targets=None")
        return 0.5 * sigma + kernel_matrix(domain, conv) @ w

    t = np.atleast_1d(np.asarray(targets, dtype=complex))
    z, dz = domain.nodes, domain.d_nodes
    corr = correction_weights(z, dz, conv) @ w
    out = np.empty(t.shape, dtype=float)
    for s in range(0, t.size, chunk):
        tc = t[s:s + chunk]
        diff = tc[:, None] - z[None, :]
        if np.any(np.abs(diff) < 1e-10):
            raise TargetOnBoundary("off-boundary target coincides with a boundary node")
        out[s:s + chunk] = conv.sign_cauchy / (2.0 * np.pi) * (np.imag(dz[None, :] / diff) @ w)
    return out + corr
