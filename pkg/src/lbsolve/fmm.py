"""Adaptive quadtree fast multipole method for Cauchy sums.

Computes ``v_i = sum_j q_j / (z_i - z_j)`` for complex charges ``q_j`` in
O(N) work.  The tree is built over sources and targets together; boxes
split until they hold at most ``leaf_capacity`` points.  Interactions follow
the classic adaptive list scheme:

    U  leaf/leaf neighbours           direct sum
    V  same-level, parent-adjacent    multipole -> local
    W  small boxes near a leaf        multipole evaluated at leaf targets
    X  dual of W                      sources -> local expansion

Expansions are scaled by the box width so that coefficients stay O(1)
even twenty-plus levels down.
"""

import time
import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import DuplicatePointsOverflow, NoRun, TargetEqualsSource

MAX_ORDER = 60


def expansion_order(eps):
    """Number of expansion terms for a requested relative tolerance."""
    if eps <= 0:
        raise ValueError("tolerance must be positive")
    return int(min(MAX_ORDER, np.ceil(np.log(1.0 / eps) / np.log(2.0)) + 2))


# ---------------------------------------------------------------------------
# Tree construction
# ---------------------------------------------------------------------------

@njit(cache=True)
def _build_tree(x, y, cx0, cy0, w0, leaf_cap, max_depth, box_cap):
    n = x.size
    perm = np.arange(n)
    tmp = np.empty(n, np.int64)
    cx = np.empty(box_cap)
    cy = np.empty(box_cap)
    width = np.empty(box_cap)
    level = np.empty(box_cap, np.int64)
    parent = np.empty(box_cap, np.int64)
    child = -np.ones((box_cap, 4), np.int64)
    start = np.empty(box_cap, np.int64)
    count = np.empty(box_cap, np.int64)
    ix = np.empty(box_cap, np.int64)
    iy = np.empty(box_cap, np.int64)
    leaf = np.zeros(box_cap, np.bool_)
    cx[0] = cx0
    cy[0] = cy0
    width[0] = w0
    level[0] = 0
    parent[0] = -1
    start[0] = 0
    count[0] = n
    ix[0] = 0
    iy[0] = 0
    nb = 1
    overflow = False
    b = 0
    while b < nb:
        if count[b] <= leaf_cap or level[b] >= max_depth:
            leaf[b] = True
            if count[b] > leaf_cap:
                overflow = True
            b += 1
            continue
        s = start[b]
        c = count[b]
        quad_count = np.zeros(4, np.int64)
        for k in range(s, s + c):
            p = perm[k]
            q = (1 if x[p] >= cx[b] else 0) + (2 if y[p] >= cy[b] else 0)
            quad_count[q] += 1
        offs = np.zeros(4, np.int64)
        for q in range(1, 4):
            offs[q] = offs[q - 1] + quad_count[q - 1]
        fill = offs.copy()
        for k in range(s, s + c):
            p = perm[k]
            q = (1 if x[p] >= cx[b] else 0) + (2 if y[p] >= cy[b] else 0)
            tmp[s + fill[q]] = p
            fill[q] += 1
        for k in range(s, s + c):
            perm[k] = tmp[k]
        if nb + 4 > box_cap:
            return perm, nb, cx, cy, width, level, parent, child, start, count, ix, iy, leaf, overflow, True
        for q in range(4):
            if quad_count[q] == 0:
                continue
            hx = 1 if (q & 1) else 0
            hy = 1 if (q & 2) else 0
            cx[nb] = cx[b] + (0.25 if hx else -0.25) * width[b]
            cy[nb] = cy[b] + (0.25 if hy else -0.25) * width[b]
            width[nb] = 0.5 * width[b]
            level[nb] = level[b] + 1
            parent[nb] = b
            start[nb] = s + offs[q]
            count[nb] = quad_count[q]
            ix[nb] = 2 * ix[b] + hx
            iy[nb] = 2 * iy[b] + hy
            child[b, q] = nb
            nb += 1
        b += 1
    return perm, nb, cx, cy, width, level, parent, child, start, count, ix, iy, leaf, overflow, False


@njit(cache=True)
def _push(arr, n, a, b):
    if n >= arr.shape[0]:
        new = np.empty((2 * arr.shape[0], 2), np.int64)
        new[:n] = arr[:n]
        arr = new
    arr[n, 0] = a
    arr[n, 1] = b
    return arr, n + 1


@njit(cache=True)
def _adjacent(a, b, ix, iy, level, depth):
    sa = depth - level[a]
    sb = depth - level[b]
    ax0 = ix[a] << sa
    ax1 = (ix[a] + 1) << sa
    bx0 = ix[b] << sb
    bx1 = (ix[b] + 1) << sb
    if max(ax0, bx0) > min(ax1, bx1):
        return False
    ay0 = iy[a] << sa
    ay1 = (iy[a] + 1) << sa
    by0 = iy[b] << sb
    by1 = (iy[b] + 1) << sb
    return max(ay0, by0) <= min(ay1, by1)


@njit(cache=True)
def _build_lists(nb, level, parent, child, ix, iy, leaf, depth):
    coll = -np.ones((nb, 9), np.int64)
    coll[0, 0] = 0
    for b in range(1, nb):
        p = parent[b]
        cnt = 0
        for k in range(9):
            P = coll[p, k]
            if P < 0:
                break
            for q in range(4):
                c = child[P, q]
                if c >= 0 and abs(ix[c] - ix[b]) <= 1 and abs(iy[c] - iy[b]) <= 1:
                    coll[b, cnt] = c
                    cnt += 1

    vl = np.empty((max(16, 27 * nb), 2), np.int64)
    nv = 0
    for b in range(1, nb):
        p = parent[b]
        for k in range(9):
            P = coll[p, k]
            if P < 0:
                break
            for q in range(4):
                c = child[P, q]
                if c >= 0 and not (abs(ix[c] - ix[b]) <= 1 and abs(iy[c] - iy[b]) <= 1):
                    vl, nv = _push(vl, nv, b, c)

    ul = np.empty((max(16, 9 * nb), 2), np.int64)
    wl = np.empty((max(16, nb), 2), np.int64)
    xl = np.empty((max(16, nb), 2), np.int64)
    nu = 0
    nw = 0
    nx = 0
    stack = np.empty(4 * nb + 4, np.int64)
    for b in range(nb):
        if not leaf[b]:
            continue
        ul, nu = _push(ul, nu, b, b)
        for k in range(9):
            C = coll[b, k]
            if C < 0:
                break
            if C == b:
                continue
            if leaf[C]:
                ul, nu = _push(ul, nu, b, C)
                continue
            top = 0
            for q in range(4):
                if child[C, q] >= 0:
                    stack[top] = child[C, q]
                    top += 1
            while top > 0:
                top -= 1
                D = stack[top]
                if _adjacent(D, b, ix, iy, level, depth):
                    if leaf[D]:
                        ul, nu = _push(ul, nu, b, D)
                        ul, nu = _push(ul, nu, D, b)
                    else:
                        for q in range(4):
                            if child[D, q] >= 0:
                                stack[top] = child[D, q]
                                top += 1
                else:
                    wl, nw = _push(wl, nw, b, D)
                    xl, nx = _push(xl, nx, D, b)
    return vl[:nv], ul[:nu], wl[:nw], xl[:nx]


def _csr(pairs, nb):
    order = np.argsort(pairs[:, 0], kind="stable")
    pairs = pairs[order]
    ptr = np.zeros(nb + 1, dtype=np.int64)
    np.add.at(ptr, pairs[:, 0] + 1, 1)
    return np.cumsum(ptr), np.ascontiguousarray(pairs[:, 1])


@dataclass(frozen=True, eq=False)
class QuadTree:
    """Adaptive quadtree over a point set, with interaction lists.

    ``perm`` lists point indices leaf by leaf; box ``b`` owns
    ``perm[start[b]:start[b] + count[b]]``.  Interaction lists are stored in
    CSR form keyed by the target box.
    """

    points: np.ndarray
    perm: np.ndarray
    centers: np.ndarray
    width: np.ndarray
    level: np.ndarray
    parent: np.ndarray
    child: np.ndarray
    start: np.ndarray
    count: np.ndarray
    leaf: np.ndarray
    leaf_capacity: int
    max_depth: int
    u_list: tuple
    v_list: tuple
    w_list: tuple
    x_list: tuple

    @property
    def n_boxes(self):
        return self.centers.size

    @property
    def depth(self):
        return int(self.level.max())

    def leaf_of_points(self):
        out = np.empty(self.points.size, dtype=np.int64)
        for b in np.flatnonzero(self.leaf):
            out[self.perm[self.start[b]:self.start[b] + self.count[b]]] = b
        return out


def build_tree(points, leaf_capacity=30, max_depth=30):
    """Build an adaptive quadtree; boxes split while they hold more than ``leaf_capacity`` points."""
    z = np.ascontiguousarray(np.atleast_1d(np.asarray(points, dtype=complex)))
    if z.size == 0 or not np.all(np.isfinite(z)):
        raise ValueError("need at least one finite point")
    if leaf_capacity < 1 or max_depth < 0 or max_depth > 40:
        raise ValueError("invalid leaf capacity or depth")
    x = np.ascontiguousarray(z.real)
    y = np.ascontiguousarray(z.imag)
    xmin, xmax, ymin, ymax = x.min(), x.max(), y.min(), y.max()
    w0 = 1.05 * max(xmax - xmin, ymax - ymin)
    if w0 == 0:
        w0 = 1.0
    box_cap = max(64, 8 * (z.size // leaf_capacity + 1))
    while True:
        out = _build_tree(x, y, 0.5 * (xmin + xmax), 0.5 * (ymin + ymax), w0,
                          leaf_capacity, max_depth, box_cap)
        if not out[-1]:
            break
        box_cap *= 4
    perm, nb, cx, cy, width, level, parent, child, start, count, ix, iy, leaf, overflow, _ = out
    if overflow:
        warnings.warn("quadtree reached max depth with an overfull leaf (coincident points?)",
                      DuplicatePointsOverflow, stacklevel=2)
    sl = slice(0, nb)
    level = level[sl].copy()
    depth = int(level.max())
    vl, ul, wl, xl = _build_lists(nb, level, parent[sl].copy(), child[sl].copy(), ix[sl].copy(),
                                  iy[sl].copy(), leaf[sl].copy(), depth)
    return QuadTree(
        points=z, perm=perm, centers=cx[sl] + 1j * cy[sl], width=width[sl].copy(), level=level,
        parent=parent[sl].copy(), child=child[sl].copy(), start=start[sl].copy(), count=count[sl].copy(),
        leaf=leaf[sl].copy(), leaf_capacity=int(leaf_capacity), max_depth=int(max_depth),
        u_list=_csr(ul, nb), v_list=_csr(vl, nb), w_list=_csr(wl, nb), x_list=_csr(xl, nb),
    )


# ---------------------------------------------------------------------------
# Translation operators and passes
# ---------------------------------------------------------------------------

def _binomials(n):
    c = np.zeros((n + 1, n + 1))
    for i in range(n + 1):
        c[i, 0] = 1.0
        for j in range(1, i + 1):
            c[i, j] = c[i - 1, j - 1] + c[i - 1, j]
    return c


@njit(cache=True)
def _upward(z, q, perm, centers, width, parent, start, count, leaf, p, binom):
    nb = centers.size
    mp = np.zeros((nb, p), np.complex128)
    for b in range(nb):
        if not leaf[b]:
            continue
        c = centers[b]
        r = width[b]
        for k in range(start[b], start[b] + count[b]):
            j = perm[k]
            if q[j] == 0:
                continue
            t = (z[j] - c) / r
            pw = q[j]
            for m in range(p):
                mp[b, m] += pw
                pw *= t
    dpow = np.empty(p, np.complex128)
    rpow = np.empty(p)
    for m in range(p):
        rpow[m] = 0.5 ** m
    for b in range(nb - 1, 0, -1):
        pa = parent[b]
        d = (centers[b] - centers[pa]) / width[pa]
        dpow[0] = 1.0
        for m in range(1, p):
            dpow[m] = dpow[m - 1] * d
        for n in range(p):
            acc = 0j
            for m in range(n + 1):
                acc += binom[n, m] * dpow[n - m] * rpow[m] * mp[b, m]
            mp[pa, n] += acc
    return mp


@njit(cache=True)
def _downward(z, q, perm, centers, width, parent, start, count, mp, v_ptr, v_idx, x_ptr, x_idx, p, binom):
    nb = centers.size
    lc = np.zeros((nb, p), np.complex128)
    xm = np.empty(p, np.complex128)
    for b in range(nb):
        c0 = centers[b]
        rt = width[b]
        for k in range(v_ptr[b], v_ptr[b + 1]):
            s = v_idx[k]
            d = centers[s] - c0
            u = width[s] / d
            v = rt / d
            pw = 1.0 + 0j
            for m in range(p):
                xm[m] = mp[s, m] * pw * (1.0 if m % 2 == 1 else -1.0)
                pw *= u
            vn = 1.0 / d
            for n in range(p):
                acc = 0j
                for m in range(p):
                    acc += binom[m + n, n] * xm[m]
                lc[b, n] += acc * vn
                vn *= v
        for k in range(x_ptr[b], x_ptr[b + 1]):
            s = x_idx[k]
            for kk in range(start[s], start[s] + count[s]):
                j = perm[kk]
                if q[j] == 0:
                    continue
                u = z[j] - c0
                t = rt / u
                pw = -q[j] / u
                for n in range(p):
                    lc[b, n] += pw
                    pw *= t
    dpow = np.empty(p, np.complex128)
    rpow = np.empty(p)
    for m in range(p):
        rpow[m] = 0.5 ** m
    for b in range(1, nb):
        pa = parent[b]
        d = (centers[b] - centers[pa]) / width[pa]
        dpow[0] = 1.0
        for m in range(1, p):
            dpow[m] = dpow[m - 1] * d
        for kk in range(p):
            acc = 0j
            for n in range(kk, p):
                acc += lc[pa, n] * binom[n, kk] * dpow[n - kk]
            lc[b, kk] += acc * rpow[kk]
    return lc


@njit(cache=True)
def _evaluate(z, q, is_target, self_mode, perm, centers, width, start, count, leaf, mp, lc,
              u_ptr, u_idx, w_ptr, w_idx, p):
    n = z.size
    out = np.zeros(n, np.complex128)
    clash = False
    n_direct = 0
    for b in range(centers.size):
        if not leaf[b]:
            continue
        c = centers[b]
        r = width[b]
        for kt in range(start[b], start[b] + count[b]):
            i = perm[kt]
            if not is_target[i]:
                continue
            zi = z[i]
            t = (zi - c) / r
            acc = 0j
            for m in range(p - 1, -1, -1):
                acc = acc * t + lc[b, m]
            for k in range(w_ptr[b], w_ptr[b + 1]):
                s = w_idx[k]
                u = zi - centers[s]
                tt = width[s] / u
                a = 0j
                for m in range(p - 1, -1, -1):
                    a = a * tt + mp[s, m]
                acc += a / u
            for k in range(u_ptr[b], u_ptr[b + 1]):
                s = u_idx[k]
                for kk in range(start[s], start[s] + count[s]):
                    j = perm[kk]
                    if q[j] == 0:
                        continue
                    if self_mode and j == i:
                        continue
                    diff = zi - z[j]
                    if diff == 0:
                        clash = True
                        continue
                    acc += q[j] / diff
                    n_direct += 1
            out[i] = acc
    return out, clash, n_direct


# ---------------------------------------------------------------------------
# Public interface
# ---------------------------------------------------------------------------

@dataclass
class FmmStats:
    levels_used: int
    boxes: int
    near_pairs: int
    far_pairs: int
    time: float
    order: int


class CauchyFMM:
    """Reusable Cauchy-sum evaluator for a fixed set of sources and targets.

    The tree and interaction lists are built once; each call with a new set
    of charges costs O(N).  With ``targets=None`` the targets are the sources
    themselves and the ``j == i`` term is skipped.
    """

    def __init__(self, sources, targets=None, eps=1e-14, leaf_capacity=30, max_depth=30):
        self.sources = np.ascontiguousarray(np.atleast_1d(np.asarray(sources, dtype=complex)))
        self.self_mode = targets is None
        if self.self_mode:
            pts = self.sources
            self.n_targets = self.sources.size
        else:
            t = np.atleast_1d(np.asarray(targets, dtype=complex))
            pts = np.concatenate([self.sources, t])
            self.n_targets = t.size
        self.eps = eps
        self.order = expansion_order(eps)
        self._binom = _binomials(2 * self.order + 1)
        tic = time.perf_counter()
        self.tree = build_tree(pts, leaf_capacity, max_depth)
        self.build_time = time.perf_counter() - tic
        self._is_target = np.zeros(pts.size, dtype=np.bool_)
        if self.self_mode:
            self._is_target[:] = True
        else:
            self._is_target[self.sources.size:] = True
        self.last_stats = None

    def __call__(self, charges):
        q = np.asarray(charges, dtype=complex)
        if q.shape != self.sources.shape:
            raise ValueError(f"expected {self.sources.size} charges")
        if not self.self_mode:
            q = np.concatenate([q, np.zeros(self.n_targets, dtype=complex)])
        q = np.ascontiguousarray(q)
        tr = self.tree
        tic = time.perf_counter()
        mp = _upward(tr.points, q, tr.perm, tr.centers, tr.width, tr.parent, tr.start, tr.count, tr.leaf,
                     self.order, self._binom)
        lc = _downward(tr.points, q, tr.perm, tr.centers, tr.width, tr.parent, tr.start, tr.count, mp,
                       tr.v_list[0], tr.v_list[1], tr.x_list[0], tr.x_list[1], self.order, self._binom)
        out, clash, _ = _evaluate(tr.points, q, self._is_target, self.self_mode, tr.perm, tr.centers, tr.width,
                                  tr.start, tr.count, tr.leaf, mp, lc, tr.u_list[0], tr.u_list[1],
                                  tr.w_list[0], tr.w_list[1], self.order)
        elapsed = time.perf_counter() - tic
        if clash:
            raise TargetEqualsSource("a target coincides with a charged source")
        self.last_stats = FmmStats(
            levels_used=tr.depth,
            boxes=tr.n_boxes,
            near_pairs=int(tr.u_list[1].size),
            far_pairs=int(tr.v_list[1].size + tr.w_list[1].size + tr.x_list[1].size),
            time=elapsed,
            order=self.order,
        )
        return out if self.self_mode else out[self.sources.size:]


def cauchy_sum(points, charges, targets=None, eps=1e-14, leaf_capacity=30, max_depth=30):
    """One-shot ``sum_j q_j / (t_i - z_j)``; ``targets=None`` means self-interaction with ``j != i``."""
    return CauchyFMM(points, targets, eps, leaf_capacity, max_depth)(charges)


def fmm_stats(run):
    """Counters from the most recent evaluation of a :class:`CauchyFMM`."""
    if run is None or getattr(run, "last_stats", None) is None:
        raise NoRun("no completed FMM evaluation")
    return run.last_stats


def cauchy_direct(points, charges, targets=None, chunk=2048):
    """O(N^2) reference for :func:`cauchy_sum`."""
    z = np.atleast_1d(np.asarray(points, dtype=complex))
    q = np.asarray(charges, dtype=complex)
    self_mode = targets is None
    t = z if self_mode else np.atleast_1d(np.asarray(targets, dtype=complex))
    out = np.empty(t.size, dtype=complex)
    for s in range(0, t.size, chunk):
        diff = t[s:s + chunk, None] - z[None, :]
        if self_mode:
            rows = np.arange(s, min(s + chunk, t.size))
            diff[rows - s, rows] = np.inf
        out[s:s + chunk] = (q[None, :] / diff).sum(axis=1)
    return out
