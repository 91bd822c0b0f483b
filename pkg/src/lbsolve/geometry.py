"""Sphere/plane points, stereographic projection and island boundary curves.

Points on the unit sphere are float arrays of shape ``(..., 3)``; points in
the stereographic plane are complex arrays.  The projection sends the north
pole ``(0, 0, 1)`` to infinity, the south pole to the origin and the equator
to the unit circle.

Every boundary curve is sampled at ``N`` nodes equispaced in a periodic
parameter ``alpha``.  Derivatives are taken with respect to ``alpha`` and are
*not* multiplied by the mesh width ``h = 2*pi/N``.

Canonical orientation: the solution domain lies to the left of the direction
of travel.  In the plane this makes the curve of the island covering the
north pole counterclockwise and every bounded island clockwise.
"""

import enum
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import shapely

from .errors import (
    AnchorOutsideIsland,
    DegenerateCap,
    DegenerateEllipse,
    NoNorthPoleIsland,
    NorthPoleSingular,
    OverlappingIslands,
    SelfIntersecting,
    TooFewVertices,
    ZeroSpeed,
)

NORTH_POLE_TOL = 1e-13
TWO_PI = 2.0 * np.pi


# ---------------------------------------------------------------------------
# Stereographic projection
# ---------------------------------------------------------------------------

def stereo_project(x):
    """Map sphere points ``(..., 3)`` to the complex plane.

    Uses ``(1 + x3) / (x1 - i x2)`` in the northern hemisphere, which is
    algebraically identical to ``(x1 + i x2) / (1 - x3)`` but does not lose
    digits to cancellation near the north pole.
    """
    x = np.asarray(x, dtype=float)
    x1, x2, x3 = x[..., 0], x[..., 1], x[..., 2]
    rho2 = x1 * x1 + x2 * x2
    north = x3 > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        one_minus = np.where(north, rho2 / (1.0 + x3), 1.0 - x3)
        if np.any(one_minus <= NORTH_POLE_TOL):
            raise NorthPoleSingular("point at the north pole has no finite image")
        xi = np.where(north, (1.0 + x3) / (x1 - 1j * x2), (x1 + 1j * x2) / (1.0 - x3))
    return xi


def stereo_inverse(xi):
    """Map complex plane points back to the unit sphere, shape ``(..., 3)``."""
    xi = np.asarray(xi, dtype=complex)
    r2 = xi.real ** 2 + xi.imag ** 2
    d = 1.0 + r2
    return np.stack([2.0 * xi.real / d, 2.0 * xi.imag / d, (r2 - 1.0) / d], axis=-1)


def sphere_tangent(xi, dxi):
    """Return sphere positions and their parameter derivatives for a plane curve."""
    xi = np.asarray(xi, dtype=complex)
    dxi = np.asarray(dxi, dtype=complex)
    d = 1.0 + np.abs(xi) ** 2
    dr2 = 2.0 * np.real(np.conj(xi) * dxi)
    dw = 2.0 * dxi / d - 2.0 * xi * dr2 / d ** 2
    dx3 = 2.0 * dr2 / d ** 2
    return stereo_inverse(xi), np.stack([dw.real, dw.imag, dx3], axis=-1)


def spherical_angles(x):
    """Colatitude and longitude of sphere points."""
    x = np.asarray(x, dtype=float)
    theta = np.arccos(np.clip(x[..., 2], -1.0, 1.0))
    phi = np.arctan2(x[..., 1], x[..., 0])
    return theta, phi


def sphere_point(theta, phi):
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    return np.stack([np.cos(phi) * np.sin(theta), np.sin(phi) * np.sin(theta), np.cos(theta)], axis=-1)


def rotation_to_north(direction):
    """Rotation matrix taking ``direction`` to the north pole (0, 0, 1)."""
    a = np.asarray(direction, dtype=float)
    a = a / np.linalg.norm(a)
    z = np.array([0.0, 0.0, 1.0])
    v = np.cross(a, z)
    c = float(a @ z)
    s = np.linalg.norm(v)
    if s < 1e-15:
        return np.eye(3) if c > 0 else np.diag([1.0, -1.0, -1.0])
    vx = np.array([[0, -v[2], v[1]], [v[2], 0, -v[0]], [-v[1], v[0], 0]])
    return np.eye(3) + vx + vx @ vx * ((1 - c) / s ** 2)


def fibonacci_sphere(n, offset=0.5):
    """Quasi-uniform points on the sphere (golden-angle spiral)."""
    k = np.arange(n) + offset
    x3 = 1.0 - 2.0 * k / n
    phi = k * np.pi * (3.0 - np.sqrt(5.0))
    r = np.sqrt(np.clip(1.0 - x3 ** 2, 0.0, None))
    return np.stack([r * np.cos(phi), r * np.sin(phi), x3], axis=-1)


# ---------------------------------------------------------------------------
# Spectral helpers
# ---------------------------------------------------------------------------

def curve_derivatives(nodes):
    """Spectral first derivative and signed curvature of a closed curve.

    Parameters
    ----------
    nodes : complex array, shape (N,)
        Samples at ``alpha_j = 2*pi*j/N`` of a smooth periodic curve.

    Returns
    -------
    d_nodes : complex array
        Derivative with respect to ``alpha``.
    curvatures : float array
        Signed curvature, positive for a counterclockwise circle.
    """
    nodes = np.asarray(nodes, dtype=complex)
    n = nodes.size
    k = np.fft.fftfreq(n, 1.0 / n)
    coef = np.fft.fft(nodes)
    k1 = k.copy()
    if n % 2 == 0:
        k1[n // 2] = 0.0
    d1 = np.fft.ifft(1j * k1 * coef)
    d2 = np.fft.ifft(-(k ** 2) * coef)
    speed = np.abs(d1)
    if np.any(speed < 1e-12 * speed.max()) or speed.max() == 0:
        raise ZeroSpeed("parametrization has a vanishing derivative")
    kappa = np.imag(np.conj(d1) * d2) / speed ** 3
    return d1, kappa


def trig_interpolate(values, alphas):
    """Evaluate the trigonometric interpolant of equispaced samples at ``alphas``."""
    values = np.asarray(values)
    alphas = np.asarray(alphas, dtype=float)
    n = values.shape[0]
    coef = np.fft.fft(values, axis=0) / n
    k = np.fft.fftfreq(n, 1.0 / n)
    if n % 2 == 0:
        # split the Nyquist mode symmetrically so real data stays real
        nyq = n // 2
        k = np.concatenate([k, [nyq]])
        coef = np.concatenate([coef, coef[nyq:nyq + 1]])
        coef[nyq] *= 0.5
        coef[-1] *= 0.5
        k[nyq] = -nyq
    phase = np.exp(1j * np.outer(alphas, k))
    out = phase @ coef
    if np.isrealobj(values):
        return out.real
    return out


# ---------------------------------------------------------------------------
# Boundary curves
# ---------------------------------------------------------------------------

class Orientation(enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"


@dataclass(frozen=True, eq=False)
class BoundaryCurve:
    """One closed island contour in the stereographic plane.

    ``island_outside`` marks the island that covers the north pole; in the
    plane that island is the unbounded side of the curve.
    """

    nodes: np.ndarray
    d_nodes: np.ndarray
    curvatures: np.ndarray
    island_outside: bool = False

    def __post_init__(self):
        for name in ("nodes", "d_nodes", "curvatures"):
            arr = np.array(getattr(self, name), dtype=complex if name != "curvatures" else float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not (self.nodes.shape == self.d_nodes.shape == self.curvatures.shape):
            raise ValueError("nodes, d_nodes and curvatures must have equal length")

    @property
    def n_nodes(self):
        return self.nodes.size

    @property
    def h(self):
        return TWO_PI / self.n_nodes

    @property
    def alphas(self):
        return self.h * np.arange(self.n_nodes)

    @cached_property
    def signed_area(self):
        """Enclosed plane area, positive for counterclockwise traversal."""
        return 0.5 * self.h * np.sum(np.imag(np.conj(self.nodes) * self.d_nodes))

    @property
    def orientation(self):
        return Orientation.POSITIVE if self.signed_area > 0 else Orientation.NEGATIVE

    @cached_property
    def bounded_side_area(self):
        """Spherical area of the preimage of the bounded plane region."""
        integrand = 2.0 * np.imag(np.conj(self.nodes) * self.d_nodes) / (1.0 + np.abs(self.nodes) ** 2)
        return abs(self.h * integrand.sum())

    @property
    def island_area(self):
        """Spherical area of the island bounded by this curve."""
        a = self.bounded_side_area
        return 4.0 * np.pi - a if self.island_outside else a

    @cached_property
    def polygon(self):
        return shapely.Polygon(np.column_stack([self.nodes.real, self.nodes.imag]))

    def reversed(self):
        """Same curve traversed backwards, ``alpha -> -alpha``."""
        idx = (-np.arange(self.n_nodes)) % self.n_nodes
        return BoundaryCurve(self.nodes[idx], -self.d_nodes[idx], -self.curvatures[idx], self.island_outside)

    def interpolate(self, alphas):
        """Positions and parameter derivatives at arbitrary ``alphas``."""
        return trig_interpolate(self.nodes, alphas), trig_interpolate(self.d_nodes, alphas)

    def sphere_nodes(self):
        return stereo_inverse(self.nodes)


def _check_n(n, minimum):
    if int(n) != n or n < minimum:
        raise ValueError(f"need an integer number of nodes >= {minimum}, got {n}")
    return int(n)


def _tangent_frame(c):
    ref = np.array([0.0, 0.0, 1.0]) if abs(c[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    e1 = np.cross(ref, c)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(c, e1)
    return e1, e2


def _project_curve(x, dx):
    """Project a sphere curve and its derivative to the plane."""
    xi = stereo_project(x)
    w = x[:, 0] + 1j * x[:, 1]
    dw = dx[:, 0] + 1j * dx[:, 1]
    one_minus = 1.0 - x[:, 2]
    dxi = dw / one_minus + w * dx[:, 2] / one_minus ** 2
    return xi, dxi


def make_cap_circle(center, radius, n):
    """Projected boundary of the spherical cap ``{x : angle(x, center) <= radius}``.

    Caps project to exact circles, so the curvature is the reciprocal of the
    plane radius with the sign of the traversal direction.
    """
    n = _check_n(n, 8)
    if n % 2:
        raise ValueError("cap circles need an even number of nodes")
    if not (1e-6 < radius < np.pi - 1e-6):
        raise DegenerateCap(f"cap radius {radius} outside (0, pi)")
    c = np.asarray(center, dtype=float)
    c = c / np.linalg.norm(c)
    e1, e2 = _tangent_frame(c)
    alpha = TWO_PI * np.arange(n) / n
    ca, sa = np.cos(alpha)[:, None], np.sin(alpha)[:, None]
    x = np.cos(radius) * c + np.sin(radius) * (ca * e1 + sa * e2)
    dx = np.sin(radius) * (-sa * e1 + ca * e2)
    xi, dxi = _project_curve(x, dx)

    _, plane_radius = cap_plane_circle(c, radius)
    signed = np.sign(0.5 * np.sum(np.imag(np.conj(xi) * dxi)))
    kappa = np.full(n, signed / plane_radius)
    island_outside = bool(c[2] > np.cos(radius))
    return BoundaryCurve(xi, dxi, kappa, island_outside)


def cap_plane_circle(center, radius):
    """Center and radius of the plane circle bounding a projected cap."""
    c = np.asarray(center, dtype=float)
    c = c / np.linalg.norm(c)
    # the circle passes through the two meridian extremes of the cap
    theta_c, phi_c = spherical_angles(c)
    rho_a = 1.0 / np.tan((theta_c - radius) / 2.0)
    rho_b = 1.0 / np.tan((theta_c + radius) / 2.0)
    return 0.5 * (rho_a + rho_b) * np.exp(1j * phi_c), abs(rho_a - rho_b) / 2.0


def make_plane_ellipse(center, a, b, rotation, n):
    """Ellipse in the stereographic plane with analytic derivative and curvature."""
    n = _check_n(n, 4)
    if a <= 0 or b <= 0:
        raise DegenerateEllipse(f"semi-axes must be positive, got a={a}, b={b}")
    alpha = TWO_PI * np.arange(n) / n
    rot = np.exp(1j * rotation)
    xi = complex(center) + rot * (a * np.cos(alpha) + 1j * b * np.sin(alpha))
    dxi = rot * (-a * np.sin(alpha) + 1j * b * np.cos(alpha))
    kappa = a * b / (a ** 2 * np.sin(alpha) ** 2 + b ** 2 * np.cos(alpha) ** 2) ** 1.5
    return BoundaryCurve(xi, dxi, kappa, False)


def make_sphere_ellipse(center, a, b, rotation, n):
    """Ellipse drawn on the sphere through the exponential map at ``center``.

    The tangent-plane ellipse with geodesic semi-axes ``a`` and ``b`` is
    wrapped onto the sphere, projected, and differentiated spectrally.
    """
    n = _check_n(n, 8)
    if a <= 0 or b <= 0 or max(a, b) >= np.pi:
        raise DegenerateEllipse(f"geodesic semi-axes out of range: a={a}, b={b}")
    c = np.asarray(center, dtype=float)
    c = c / np.linalg.norm(c)
    e1, e2 = _tangent_frame(c)
    alpha = TWO_PI * np.arange(n) / n
    u = a * np.cos(alpha)
    v = b * np.sin(alpha)
    cr, sr = np.cos(rotation), np.sin(rotation)
    t = (cr * u - sr * v)[:, None] * e1 + (sr * u + cr * v)[:, None] * e2
    ang = np.linalg.norm(t, axis=1)[:, None]
    x = np.cos(ang) * c + np.sin(ang) * t / ang
    xi = stereo_project(x)
    d, kappa = curve_derivatives(xi)
    return BoundaryCurve(xi, d, kappa, _island_outside_from_interior(xi, c))


def _island_outside_from_interior(xi, interior_point):
    """Does the island containing ``interior_point`` (a sphere point) cover the north pole?"""
    p = np.asarray(interior_point, dtype=float)
    if 1.0 - p[2] < 1e-9:
        return True
    q = stereo_project(p)
    poly = shapely.Polygon(np.column_stack([xi.real, xi.imag]))
    return not bool(shapely.contains_xy(poly, q.real, q.imag))


def resample_polyline(points, n, island_outside=None):
    """Smooth a closed polyline and resample it at ``n`` equispaced arclength fractions.

    ``points`` may be complex plane points, an ``(m, 2)`` array of plane
    coordinates, or an ``(m, 3)`` array of sphere points.  For sphere input the
    island is taken to be the smaller of the two regions; for plane input it
    is the bounded region.  ``island_outside`` overrides either rule.

    The piecewise-linear arclength parametrization is truncated to its lowest
    ``ceil(2n/3)`` Fourier modes before resampling, so the result is smooth.
    """
    n = _check_n(n, 8)
    pts = np.asarray(points)
    sphere_input = False
    if np.iscomplexobj(pts):
        z = pts.astype(complex).ravel()
    elif pts.ndim == 2 and pts.shape[1] == 2:
        z = pts[:, 0] + 1j * pts[:, 1]
    elif pts.ndim == 2 and pts.shape[1] == 3:
        x = pts / np.linalg.norm(pts, axis=1, keepdims=True)
        z = stereo_project(x)
        sphere_input = True
    else:
        raise ValueError("polyline must be complex, (m, 2) or (m, 3)")
    if z.size > 1 and abs(z[-1] - z[0]) == 0:
        z = z[:-1]
    if z.size < 16:
        raise TooFewVertices(f"polyline has {z.size} vertices, need at least 16")
    ring = shapely.LinearRing(np.column_stack([z.real, z.imag]))
    if not ring.is_simple:
        raise SelfIntersecting("polyline crosses itself")

    seg = np.abs(np.roll(z, -1) - z)
    if np.any(seg == 0):
        raise SelfIntersecting("polyline has repeated consecutive vertices")
    s = np.concatenate([[0.0], np.cumsum(seg)])
    length = s[-1]
    m_fine = int(2 ** np.ceil(np.log2(max(4096, 8 * z.size, 4 * n))))
    t = length * np.arange(m_fine) / m_fine
    zz = np.concatenate([z, z[:1]])
    fine = np.interp(t, s, zz.real) + 1j * np.interp(t, s, zz.imag)

    coef = np.fft.fft(fine) / m_fine
    n_modes = int(np.ceil(2.0 * n / 3.0))
    kmax = min(n_modes // 2, n // 2 - 1)
    keep = np.zeros(n, dtype=complex)
    keep[: kmax + 1] = coef[: kmax + 1]
    keep[n - kmax:] = coef[m_fine - kmax:]
    nodes = np.fft.ifft(keep) * n
    d, kappa = curve_derivatives(nodes)

    if island_outside is None:
        if sphere_input:
            tmp = BoundaryCurve(nodes, d, kappa, False)
            island_outside = tmp.bounded_side_area > TWO_PI
        else:
            island_outside = False
    return BoundaryCurve(nodes, d, kappa, bool(island_outside))


def read_polyline(path):
    """Read ``x y`` (plane) or ``x1 x2 x3`` (sphere) vertices, one per line."""
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            rows.append([float(v) for v in line.split()])
    if not rows or len({len(r) for r in rows}) != 1 or len(rows[0]) not in (2, 3):
        raise ValueError(f"{path}: every vertex line needs 2 or 3 numbers")
    return np.array(rows)


# ---------------------------------------------------------------------------
# Island domains
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class IslandDomain:
    """The M-island geometry in the stereographic plane.

    After :func:`orient_and_validate`, curve 0 is the north-pole island (if
    any), every curve has canonical orientation and each anchor lies inside
    its island.
    """

    curves: tuple
    anchors: np.ndarray
    validated: bool = False

    def __post_init__(self):
        object.__setattr__(self, "curves", tuple(self.curves))
        anchors = np.array(self.anchors, dtype=complex).ravel()
        anchors.setflags(write=False)
        object.__setattr__(self, "anchors", anchors)
        if anchors.size != len(self.curves):
            raise ValueError("one anchor per curve required")
        if not self.curves:
            raise ValueError("need at least one island")

    @property
    def n_islands(self):
        return len(self.curves)

    @property
    def has_north_island(self):
        return self.curves[0].island_outside

    @cached_property
    def sizes(self):
        return np.array([c.n_nodes for c in self.curves])

    @cached_property
    def offsets(self):
        return np.concatenate([[0], np.cumsum(self.sizes)])

    @property
    def n_nodes(self):
        return int(self.offsets[-1])

    @cached_property
    def nodes(self):
        return np.concatenate([c.nodes for c in self.curves])

    @cached_property
    def d_nodes(self):
        return np.concatenate([c.d_nodes for c in self.curves])

    @cached_property
    def curvatures(self):
        return np.concatenate([c.curvatures for c in self.curves])

    @cached_property
    def weights(self):
        """Trapezoid weights ``h_k`` per node."""
        return np.concatenate([np.full(c.n_nodes, c.h) for c in self.curves])

    @cached_property
    def curve_index(self):
        return np.repeat(np.arange(self.n_islands), self.sizes)

    def curve_slice(self, k):
        return slice(int(self.offsets[k]), int(self.offsets[k + 1]))

    def island_of(self, points):
        """Index of the island containing each plane point, -1 for the solution domain."""
        z = np.atleast_1d(np.asarray(points, dtype=complex))
        out = np.full(z.shape, -1, dtype=int)
        for k, c in enumerate(self.curves):
            inside = shapely.contains_xy(c.polygon, z.real, z.imag)
            if c.island_outside:
                inside = ~inside & ~shapely.intersects_xy(c.polygon.boundary, z.real, z.imag)
            out[(out < 0) & inside] = k
        return out

    def in_domain(self, points):
        return self.island_of(points) < 0

    def boundary_distance(self, points):
        """Plane distance from each point to the nearest boundary node."""
        z = np.atleast_1d(np.asarray(points, dtype=complex))
        best = np.full(z.shape, np.inf)
        nodes = self.nodes
        for start in range(0, z.size, 512):
            chunk = z[start:start + 512]
            best[start:start + 512] = np.abs(chunk[:, None] - nodes[None, :]).min(axis=1)
        return best

    def domain_probe(self, n_candidates=2000):
        """A point of the solution domain far (in chordal sphere distance) from all curves."""
        cand = fibonacci_sphere(n_candidates)
        cand = cand[1.0 - cand[:, 2] > 1e-6]
        z = stereo_project(cand)
        ok = self.in_domain(z)
        if not ok.any():
            raise OverlappingIslands("islands cover the whole sphere")
        z, cand = z[ok], cand[ok]
        bx = stereo_inverse(self.nodes)
        dist = np.min(np.linalg.norm(cand[:, None, :] - bx[None, ::max(1, bx.shape[0] // 2000), :], axis=2), axis=1)
        return z[np.argmax(dist)]


def default_anchor(curve):
    """Plane image of the island's spherical centroid, with fallbacks.

    The centroid direction is the vector area ``1/2 ∮ x × dx`` of the
    sphere curve; its sign is chosen so the projected point lies in the island.
    """
    x, dx = sphere_tangent(curve.nodes, curve.d_nodes)
    vec = 0.5 * curve.h * np.cross(x, dx).sum(axis=0)
    poly = curve.polygon
    norm = np.linalg.norm(vec)
    if norm > 0:
        for cand in (vec / norm, -vec / norm):
            if 1.0 - cand[2] < 1e-9:
                continue
            q = stereo_project(cand)
            inside = bool(shapely.contains_xy(poly, q.real, q.imag))
            if inside != curve.island_outside:
                return complex(q)
    if curve.island_outside:
        return complex(2.0 * np.abs(curve.nodes).max() + 1.0)
    p = poly.representative_point()
    return complex(p.x, p.y)


def orient_and_validate(domain):
    """Reorder, reorient and check an :class:`IslandDomain`.

    Raises
    ------
    OverlappingIslands
        Curves intersect, islands nest, or two islands cover the north pole.
    AnchorOutsideIsland
        An anchor does not lie strictly inside its island.

    Warns
    -----
    NoNorthPoleIsland
        No island covers the north pole (allowed, but outside the usual setting).
    """
    curves = list(domain.curves)
    anchors = list(domain.anchors)
    north = [k for k, c in enumerate(curves) if c.island_outside]
    if len(north) > 1:
        raise OverlappingIslands(f"islands {north} all cover the north pole")
    if north:
        k = north[0]
        curves.insert(0, curves.pop(k))
        anchors.insert(0, anchors.pop(k))
    else:
        warnings.warn("no island covers the north pole; projected domain is unbounded", NoNorthPoleIsland,
                      stacklevel=2)

    for k, c in enumerate(curves):
        want = Orientation.POSITIVE if c.island_outside else Orientation.NEGATIVE
        if c.orientation is not want:
            curves[k] = c.reversed()

    polys = [c.polygon for c in curves]
    bounded = [k for k, c in enumerate(curves) if not c.island_outside]
    if bounded:
        tree = shapely.STRtree([polys[k] for k in bounded])
        left, right = tree.query([polys[k] for k in bounded], predicate="intersects")
        clash = left < right
        if np.any(clash):
            i, j = bounded[left[clash][0]], bounded[right[clash][0]]
            raise OverlappingIslands(f"islands {i} and {j} intersect")
    if north:
        outer = polys[0]
        for k in bounded:
            if not outer.contains(polys[k]):
                raise OverlappingIslands(f"island {k} overlaps the north-pole island")

    for k, (c, a) in enumerate(zip(curves, anchors)):
        inside = bool(shapely.contains_xy(polys[k], a.real, a.imag))
        on_edge = bool(shapely.intersects_xy(polys[k].boundary, a.real, a.imag))
        if on_edge or inside == c.island_outside:
            raise AnchorOutsideIsland(f"anchor {k} at {a} is not inside its island")

    return IslandDomain(tuple(curves), np.array(anchors), validated=True)


def make_domain(curves, anchors=None, validate=True):
    """Build an :class:`IslandDomain`; missing anchors default to island centroids."""
    curves = list(curves)
    if anchors is None:
        anchors = [None] * len(curves)
    anchors = [default_anchor(c) if a is None else complex(a) for c, a in zip(curves, anchors)]
    dom = IslandDomain(tuple(curves), np.array(anchors, dtype=complex))
    return orient_and_validate(dom) if validate else dom


def cap_domain(caps, n, anchors=None):
    """Domain of spherical caps given as ``[(center, radius), ...]``."""
    curves = [make_cap_circle(c, r, n) for c, r in caps]
    if anchors is None:
        anchors = []
        for (c, r), curve in zip(caps, curves):
            c = np.asarray(c, dtype=float) / np.linalg.norm(c)
            anchors.append(None if 1.0 - c[2] < 1e-9 else complex(stereo_project(c)))
    return make_domain(curves, anchors)


def plane_ellipse_array(n, m=15, seed=0):
    """A reproducible array of ``m`` well-separated ellipses in the plane.

    Centers sit on a 5-column grid of spacing 1 around the origin; semi-axes
    and rotations are drawn from ``seed``.
    """
    rng = np.random.default_rng(seed)
    cols = 5
    rows = int(np.ceil(m / cols))
    curves, anchors = [], []
    for k in range(m):
        r, c = divmod(k, cols)
        center = complex(c - (cols - 1) / 2.0, r - (rows - 1) / 2.0)
        a = rng.uniform(0.2, 0.35)
        b = a * rng.uniform(0.45, 0.9)
        rot = rng.uniform(0.0, np.pi)
        curves.append(make_plane_ellipse(center, a, b, rot, n))
        anchors.append(center)
    return curves, anchors


def sphere_ellipse_array(n, m, seed=0):
    """``m`` ellipses spread regularly over the sphere, one covering the north pole.

    Centers follow a golden-angle spiral rotated so the first center is the
    north pole; geodesic semi-axes are random fractions of the mean spacing.
    """
    rng = np.random.default_rng(seed)
    centers = fibonacci_sphere(m)
    centers = centers @ rotation_to_north(centers[0]).T
    spacing = np.sqrt(4.0 * np.pi / m)
    curves, anchors = [], []
    for k, c in enumerate(centers):
        a = spacing * rng.uniform(0.18, 0.3)
        b = a * rng.uniform(0.5, 1.0)
        rot = rng.uniform(0.0, np.pi)
        curve = make_sphere_ellipse(c, a, b, rot, n)
        curves.append(curve)
        anchors.append(None if curve.island_outside else complex(stereo_project(c)))
    return curves, anchors
