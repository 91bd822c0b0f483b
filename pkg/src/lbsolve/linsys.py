"""Restarted GMRES, the Schur-complement block preconditioner, dense diagnostics."""

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.sparse.linalg import LinearOperator, eigsh

from .errors import DimensionMismatch, SingularMatrix, SingularSchur, TooLarge
from .system import apply_operator

logger = logging.getLogger(__name__)

DENSE_LIMIT = 6000


@dataclass
class GmresConfig:
    tol: float = 1e-11
    restart: int = 50
    max_iters: int = 2000

    def __post_init__(self):
        if self.tol <= 0 or self.restart < 1 or self.max_iters < 1:
            raise ValueError("gmres needs tol > 0, restart >= 1, max_iters >= 1")


@dataclass
class GmresResult:
    x: np.ndarray
    iterations: int
    residuals: list = field(default_factory=list)
    converged: bool = True


def gmres(apply, rhs, precond=None, cfg=None, x0=None):
    """Left-preconditioned restarted GMRES.

    Convergence is measured on the preconditioned residual relative to the
    preconditioned right-hand side.  Arnoldi uses classical Gram-Schmidt
    with one reorthogonalization pass.  Never raises on stagnation; check
    ``converged`` on the result.
    """
    cfg = cfg or GmresConfig()
    rhs = np.asarray(rhs, dtype=float)
    n = rhs.size
    M = precond if precond is not None else (lambda r: r)
    b = M(rhs)
    bnorm = np.linalg.norm(b)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    if x.shape != rhs.shape:
        raise DimensionMismatch("initial guess and right-hand side differ in shape")
    if bnorm == 0:
        return GmresResult(np.zeros(n), 0, [0.0], True)

    residuals = []
    iters = 0
    while True:
        r = M(rhs - apply(x)) if iters or x0 is not None else b.copy()
        beta = np.linalg.norm(r)
        residuals.append(beta / bnorm)
        if beta / bnorm <= cfg.tol:
            return GmresResult(x, iters, residuals, True)
        if iters >= cfg.max_iters:
            return GmresResult(x, iters, residuals, False)
        m = min(cfg.restart, cfg.max_iters - iters)
        V = np.zeros((m + 1, n))
        H = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        V[0] = r / beta
        k_done = 0
        for k in range(m):
            w = np.array(M(apply(V[k])), dtype=float)
            for _ in range(2):
                h = V[:k + 1] @ w
                w -= h @ V[:k + 1]
                H[:k + 1, k] += h
            H[k + 1, k] = np.linalg.norm(w)
            if H[k + 1, k] > 0:
                V[k + 1] = w / H[k + 1, k]
            for j in range(k):
                t = cs[j] * H[j, k] + sn[j] * H[j + 1, k]
                H[j + 1, k] = -sn[j] * H[j, k] + cs[j] * H[j + 1, k]
                H[j, k] = t
            denom = np.hypot(H[k, k], H[k + 1, k])
            cs[k], sn[k] = H[k, k] / denom, H[k + 1, k] / denom
            H[k, k] = denom
            H[k + 1, k] = 0.0
            g[k + 1] = -sn[k] * g[k]
            g[k] = cs[k] * g[k]
            iters += 1
            k_done = k + 1
            est = abs(g[k + 1]) / bnorm
            if est <= cfg.tol or H[k, k] == 0:
                break
            residuals.append(est)
        y = scipy.linalg.solve_triangular(H[:k_done, :k_done], g[:k_done])
        x = x + y @ V[:k_done]
        logger.debug("gmres cycle done: %d iterations, estimate %.3e", iters, est)


@dataclass(frozen=True, eq=False)
class SchurPreconditioner:
    """Exact inverse of ``[[I, E], [F, D]]`` through the Schur complement ``S = D - F E``."""

    system: object
    S: np.ndarray
    lu: tuple

    def __call__(self, r):
        return apply_preconditioner(self, r)


def build_preconditioner(sys):
    FE = sys.apply_F(sys.E)
    S = sys.D - FE
    lu, piv = scipy.linalg.lu_factor(S, check_finite=True)
    scale = np.abs(S).max()
    if scale == 0 or np.abs(np.diag(lu)).min() <= 1e-12 * scale:
        raise SingularSchur("Schur complement D - F E is singular")
    return SchurPreconditioner(sys, S, (lu, piv))


def apply_preconditioner(prec, r):
    """Solve ``[[I, E], [F, D]] z = r``; works on vectors or column blocks."""
    sys = prec.system
    r = np.asarray(r, dtype=float)
    n = sys.n_density
    r_s, r_a = r[:n], r[n:]
    z_a = scipy.linalg.lu_solve(prec.lu, r_a - sys.apply_F(r_s))
    z_s = r_s - sys.E @ z_a
    return np.concatenate([z_s, z_a])


def dense_materialize(sys, limit=DENSE_LIMIT):
    """Dense system matrix; guarded at ``dim <= limit`` (``None`` lifts the guard)."""
    if limit is not None and sys.dim > limit:
        raise TooLarge(f"system dimension {sys.dim} exceeds dense limit {limit}")
    n = sys.n_density
    A = np.zeros((sys.dim, sys.dim))
    A[:n, :n] = np.eye(n) + 2.0 * sys._dense_kernel * sys.domain.weights[None, :]
    A[:n, n:] = sys.E
    A[n:, :n] = sys.F
    A[n:, n:] = sys.D
    return A


def preconditioned_dense(sys, prec, limit=DENSE_LIMIT):
    return apply_preconditioner(prec, dense_materialize(sys, limit))


def condition_number(A):
    """2-norm condition number from the singular values."""
    s = scipy.linalg.svdvals(np.asarray(A, dtype=float))
    if s[-1] < 1e-300:
        raise SingularMatrix("matrix is numerically singular")
    return float(s[0] / s[-1])


def condition_estimate(A, tol=1e-10):
    """2-norm condition number by Lanczos on ``A^T A`` and its inverse.

    Cheaper than a full SVD for large dense matrices: one LU factorization
    plus a few dozen triangular solves.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    lu = scipy.linalg.lu_factor(A, check_finite=True)
    if np.abs(np.diag(lu[0])).min() < 1e-300:
        raise SingularMatrix("matrix is numerically singular")
    gram = LinearOperator((n, n), matvec=lambda v: A.T @ (A @ v), dtype=float)
    inv_gram = LinearOperator((n, n), dtype=float,
                              matvec=lambda v: scipy.linalg.lu_solve(lu, scipy.linalg.lu_solve(lu, v, trans=1)))
    v0 = np.ones(n)
    smax2 = eigsh(gram, k=1, which="LA", tol=tol, v0=v0, return_eigenvectors=False)[0]
    inv_smin2 = eigsh(inv_gram, k=1, which="LA", tol=tol, v0=v0, return_eigenvectors=False)[0]
    return float(np.sqrt(smax2 * inv_smin2))


def operator_closure(sys, mode=None):
    return lambda v: apply_operator(sys, v, mode)
