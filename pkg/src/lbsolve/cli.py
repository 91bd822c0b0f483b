"""Batch command-line front end.

Every command reads a YAML config (see README) and writes tab-separated
tables with ``#`` header lines carrying the config hash.  Exit status is 0
on success, 2 for config or geometry problems and 3 for numerical failures;
on failure a single ``error <CODE>: <message>`` line goes to stderr.
"""

import argparse
import hashlib
import json
import logging
import os
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml
from threadpoolctl import threadpool_limits

from . import __version__
from .errors import (
    ConfigInvalid,
    DimensionMismatch,
    GeometryParseError,
    LBSolveError,
    NoNorthPoleIsland,
    TargetNearBoundary,
)
from .geometry import (
    make_cap_circle,
    make_domain,
    make_plane_ellipse,
    make_sphere_ellipse,
    plane_ellipse_array,
    read_polyline,
    resample_polyline,
    rotation_to_north,
    sphere_ellipse_array,
    sphere_point,
    stereo_project,
)
from .linsys import DENSE_LIMIT, GmresConfig
from .solver import (
    PointVortexSet,
    SolverConfig,
    convergence_study,
    evaluate_solution,
    exact_harmonic,
    max_relative_error,
    random_vortices,
    sample_points,
    scaling_benchmark,
    solve_dirichlet,
    solve_point_vortices,
)

log = logging.getLogger("lbsolve")

COMMANDS = ("solve", "study", "bench", "vortex", "selftest")


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass
class RunConfig:
    command: str
    raw: dict
    base_dir: Path
    geometry: dict
    n: int
    boundary: dict
    solver: SolverConfig
    output: Path
    grid: dict = field(default_factory=dict)
    n_list: list = field(default_factory=list)
    vortices: dict = field(default_factory=dict)
    seed: int = 0

    @property
    def digest(self):
        blob = json.dumps(self.raw, sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(blob.encode()).hexdigest()


def _section(raw, key):
    val = raw.get(key) or {}
    if not isinstance(val, dict):
        raise ConfigInvalid(f"'{key}' must be a mapping")
    return val


def _positive(value, name, kind=float):
    try:
        value = kind(value)
    except (TypeError, ValueError):
        raise ConfigInvalid(f"{name} must be a number") from None
    if not value > 0:
        raise ConfigInvalid(f"{name} must be positive")
    return value


def _check_n(n, name="N"):
    n = _positive(n, name, int)
    if n < 8:
        raise ConfigInvalid(f"{name} must be at least 8")
    return n


def load_config(path, command, out_dir=None):
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ConfigInvalid(f"cannot read config: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigInvalid(f"config is not valid YAML: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigInvalid("config must be a mapping")
    return parse_config(raw, command, path.parent, out_dir)


def parse_config(raw, command, base_dir=Path("."), out_dir=None):
    if command not in COMMANDS:
        raise ConfigInvalid(f"unknown command {command!r}")
    gm = _section(raw, "gmres")
    fm = _section(raw, "fmm")
    gcfg = GmresConfig(_positive(gm.get("tol", 1e-11), "gmres.tol"),
                       _positive(gm.get("restart", 50), "gmres.restart", int),
                       _positive(gm.get("max_iters", 2000), "gmres.max_iters", int))
    mode = raw.get("mode", "fmm")
    if mode not in ("fmm", "direct"):
        raise ConfigInvalid("mode must be 'fmm' or 'direct'")
    scfg = SolverConfig(gcfg, mode,
                        _positive(fm.get("epsilon", 1e-14), "fmm.epsilon"),
                        _positive(fm.get("leaf_capacity", 30), "fmm.leaf_capacity", int),
                        _positive(fm.get("max_depth", 30), "fmm.max_depth", int))
    geometry = _section(raw, "geometry")
    if not geometry.get("islands") and not geometry.get("generator"):
        raise ConfigInvalid("geometry needs 'islands' or a 'generator'")

    n_list = []
    if command in ("study", "bench"):
        n_list = _section(raw, command).get("N_list") or []
        if not isinstance(n_list, list) or not n_list:
            raise ConfigInvalid(f"{command}.N_list must be a non-empty list")
        n_list = [_check_n(v, f"{command}.N_list entry") for v in n_list]
    if command == "bench" and mode != "fmm":
        raise ConfigInvalid("bench runs in fmm mode")

    output = Path(out_dir or _section(raw, "output").get("dir", "out"))
    return RunConfig(command, raw, Path(base_dir), geometry, _check_n(raw.get("N", 128)),
                     _section(raw, "boundary") or {"constant": 1.0}, scfg, output,
                     _section(raw, "grid"), n_list, _section(raw, "vortices"), int(raw.get("seed", 0)))


# ---------------------------------------------------------------------------
# Geometry from config
# ---------------------------------------------------------------------------

def _rotation(geometry):
    opts = geometry.get("rotate_north")
    if opts is None:
        return np.eye(3)
    if isinstance(opts, dict) and "lonlat" in opts:
        lon, lat = np.radians(opts["lonlat"])
        direction = sphere_point(np.pi / 2 - lat, lon)
    else:
        direction = np.asarray(opts, dtype=float)
        if direction.shape != (3,) or not np.linalg.norm(direction) > 0:
            raise ConfigInvalid("rotate_north must be a nonzero 3-vector or {lonlat: [lon, lat]}")
    return rotation_to_north(direction)


def _polyline_points(entry, base_dir, R):
    if "file" not in entry:
        raise ConfigInvalid("polyline island needs 'file'")
    path = base_dir / entry["file"]
    try:
        pts = read_polyline(path)
    except (OSError, ValueError) as exc:
        raise GeometryParseError(str(exc)) from None
    fmt = entry.get("format", "plane" if pts.shape[1] == 2 else "sphere")
    if fmt == "lonlat":
        if pts.shape[1] != 2:
            raise GeometryParseError(f"{path}: lonlat vertices need two columns")
        lon, lat = np.radians(pts[:, 0]), np.radians(pts[:, 1])
        pts = sphere_point(np.pi / 2 - lat, lon)
    elif fmt == "plane":
        if pts.shape[1] != 2:
            raise GeometryParseError(f"{path}: plane vertices need two columns")
        return pts
    elif fmt != "sphere":
        raise ConfigInvalid(f"unknown polyline format {fmt!r}")
    if pts.shape[1] != 3:
        raise GeometryParseError(f"{path}: sphere vertices need three columns")
    pts = pts / np.linalg.norm(pts, axis=1, keepdims=True)
    return pts @ R.T


def _island(entry, n, base_dir, R):
    kind = entry.get("type")
    try:
        if kind == "cap":
            c = R @ np.asarray(entry["center"], dtype=float)
            return make_cap_circle(c, float(entry["radius"]), n)
        if kind == "ellipse":
            center = entry["center"]
            return make_plane_ellipse(complex(center[0], center[1]), float(entry["a"]), float(entry["b"]),
                                      float(entry.get("rotation", 0.0)), n)
        if kind == "sphere_ellipse":
            c = R @ np.asarray(entry["center"], dtype=float)
            return make_sphere_ellipse(c, float(entry["a"]), float(entry["b"]),
                                       float(entry.get("rotation", 0.0)), n)
        if kind == "polyline":
            pts = _polyline_points(entry, base_dir, R)
            return resample_polyline(pts, n, entry.get("island_outside"))
    except (KeyError, TypeError, IndexError) as exc:
        raise ConfigInvalid(f"{kind} island missing or malformed field: {exc}") from None
    raise ConfigInvalid(f"unknown island type {kind!r}")


def _anchor(entry):
    a = entry.get("anchor")
    if a is None:
        return None
    return complex(a[0], a[1])


def build_domain(cfg, n=None):
    """Validated :class:`IslandDomain` for the config at ``n`` nodes per curve."""
    n = n or cfg.n
    geo = cfg.geometry
    R = _rotation(geo)
    curves, anchors = [], []
    gen = geo.get("generator")
    if gen:
        kind = gen.get("kind")
        count = _positive(gen.get("count", 15), "generator.count", int)
        seed = int(gen.get("seed", cfg.seed))
        if kind == "plane_ellipses":
            c, a = plane_ellipse_array(n, count, seed)
        elif kind == "sphere_ellipses":
            c, a = sphere_ellipse_array(n, count, seed)
        else:
            raise ConfigInvalid(f"unknown generator {kind!r}")
        curves += c
        anchors += a
    for entry in geo.get("islands") or []:
        if not isinstance(entry, dict):
            raise ConfigInvalid("each island must be a mapping")
        curves.append(_island(entry, n, cfg.base_dir, R))
        anchors.append(_anchor(entry))
    return make_domain(curves, anchors), R


def boundary_closure(cfg, domain):
    """Boundary data section to ``(g, exact)``; ``exact`` is None when unknown off the boundary."""
    opts = cfg.boundary
    if "constant" in opts:
        c = float(opts["constant"])
        f = lambda z: np.full(np.shape(z), c)  # noqa: E731
        return f, f
    if "poles" in opts:
        poles = opts["poles"]
        if poles == "anchors":
            poles = np.asarray(domain.anchors)
        else:
            try:
                poles = np.array([complex(p[0], p[1]) for p in poles])
            except (TypeError, IndexError):
                raise ConfigInvalid("poles must be 'anchors' or a list of [x, y]") from None
        f = lambda z: exact_harmonic(z, poles)  # noqa: E731
        return f, f
    if "file" in opts:
        try:
            vals = np.loadtxt(cfg.base_dir / opts["file"], ndmin=1)
        except (OSError, ValueError) as exc:
            raise ConfigInvalid(f"boundary file: {exc}") from None
        if vals.shape != (domain.n_nodes,):
            raise DimensionMismatch(f"boundary file has {vals.size} values, need {domain.n_nodes}")
        return vals, None
    raise ConfigInvalid("boundary needs one of 'constant', 'poles' or 'file'")


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_table(path, cfg, columns, rows, notes=()):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(f"# lbsolve {__version__} {cfg.command}\n")
        fh.write(f"# config_sha256 {cfg.digest}\n")
        for note in notes:
            fh.write(f"# {note}\n")
        fh.write("\t".join(columns) + "\n")
        for row in rows:
            fh.write("\t".join(_fmt(v) for v in row) + "\n")


def grid_points(grid):
    n_lat = _positive(grid.get("n_lat", 45), "grid.n_lat", int)
    n_lon = _positive(grid.get("n_lon", 90), "grid.n_lon", int)
    # cell centres, so neither pole is a grid point
    lat = -90.0 + (np.arange(n_lat) + 0.5) * 180.0 / n_lat
    lon = -180.0 + (np.arange(n_lon) + 0.5) * 360.0 / n_lon
    LAT, LON = np.meshgrid(lat, lon, indexing="ij")
    x = sphere_point(np.radians(90.0 - LAT.ravel()), np.radians(LON.ravel()))
    return LAT.ravel(), LON.ravel(), x, (n_lat, n_lon)


def evaluate_grid(domain, R, field_fn, grid):
    """Field on a lat-lon grid of the input frame; island points become NaN."""
    lat, lon, x, shape = grid_points(grid)
    z = stereo_project(x @ R.T)
    vals = np.full(z.shape, np.nan)
    ok = domain.in_domain(z)
    if ok.any():
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TargetNearBoundary)
            vals[ok] = field_fn(z[ok])
    return lat, lon, vals, shape


def _write_grid(cfg, name, lat, lon, vals, shape):
    write_table(cfg.output / name, cfg, ["lat", "lon", "psi"], zip(lat, lon, vals),
                [f"grid n_lat={shape[0]} n_lon={shape[1]} order=lat-major missing=nan"])


def _write_timings(cfg, timings):
    write_table(cfg.output / "timings.tsv", cfg, ["stage", "seconds"], sorted(timings.items()))


def _write_density(cfg, sol):
    dom = sol.domain
    rows = []
    for k in range(dom.n_islands):
        sl = dom.curve_slice(k)
        for j, (z, s) in enumerate(zip(dom.nodes[sl], sol.sigma[sl])):
            rows.append((k, j, z.real, z.imag, s))
    write_table(cfg.output / "density.tsv", cfg, ["curve", "node", "xi_re", "xi_im", "sigma"], rows)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _direct_guard(cfg, domain):
    if cfg.solver.mode == "direct" and domain.n_nodes + domain.n_islands > DENSE_LIMIT:
        raise ConfigInvalid(f"mode=direct needs dimension <= {DENSE_LIMIT}")


def cmd_solve(cfg):
    dom, R = build_domain(cfg)
    _direct_guard(cfg, dom)
    g, exact = boundary_closure(cfg, dom)
    sol = solve_dirichlet(dom, g, cfg.solver)
    summary = [("n_islands", dom.n_islands), ("n_nodes", dom.n_nodes),
               ("iterations", sol.iterations), ("final_residual", sol.residuals[-1])]
    summary += [(f"A_{k}", a) for k, a in enumerate(sol.A)]
    if exact is not None:
        s = sample_points(dom)
        summary.append(("max_sample_error", max_relative_error(evaluate_solution(sol, s, check=False), exact(s))))
    write_table(cfg.output / "summary.tsv", cfg, ["key", "value"], summary)
    _write_density(cfg, sol)
    if cfg.grid:
        _write_grid(cfg, "grid.tsv", *evaluate_grid(dom, R, lambda z: evaluate_solution(sol, z, check=False), cfg.grid))
    _write_timings(cfg, sol.timings)
    return summary


def _study_inputs(cfg):
    finest, _ = build_domain(cfg, max(cfg.n_list))
    _, exact = boundary_closure(cfg, finest)
    if exact is None:
        raise ConfigInvalid(f"{cfg.command} needs boundary data with a known solution (constant or poles)")
    builder = lambda n: build_domain(cfg, n)[0]  # noqa: E731
    return builder, exact, sample_points(finest)


def cmd_study(cfg):
    builder, exact, samples = _study_inputs(cfg)
    opts = _section(cfg.raw, "study")
    rows = convergence_study(builder, exact, cfg.n_list, cfg.solver, samples,
                             bool(opts.get("conditioning", True)), bool(opts.get("unpreconditioned", True)))
    cols = ["N", "iters_unprec", "iters_prec", "cond_unprec", "cond_prec", "error", "cpu"]
    table = [tuple(getattr(r, c) for c in cols) for r in rows]
    write_table(cfg.output / "study.tsv", cfg, cols, table, ["cpu is wall-clock seconds and varies between runs"])
    return rows


def cmd_bench(cfg):
    builder, exact, samples = _study_inputs(cfg)
    rows = scaling_benchmark(builder, exact, cfg.n_list, cfg.solver, samples)
    cols = ["N", "iterations", "cpu_prec", "cpu_solve", "error", "depth"]
    table = [tuple(getattr(r, c) for c in cols) for r in rows]
    write_table(cfg.output / "bench.tsv", cfg, cols, table, ["cpu columns are wall-clock seconds and vary between runs"])
    return rows


def vortex_set(cfg, domain, R):
    opts = cfg.vortices
    if "positions" in opts:
        positions = opts["positions"] or []
        strengths = opts.get("strengths") or []
        if len(strengths) != len(positions):
            raise ConfigInvalid("vortices need one strength per position")
        if not positions:
            return PointVortexSet([], [])
        pos = np.asarray(positions, dtype=float)
        if pos.ndim != 2 or pos.shape[1] not in (2, 3):
            raise ConfigInvalid("vortex positions are [x, y] plane or [x1, x2, x3] sphere points")
        if pos.shape[1] == 3:
            z = stereo_project((pos / np.linalg.norm(pos, axis=1, keepdims=True)) @ R.T)
        else:
            z = pos[:, 0] + 1j * pos[:, 1]
        return PointVortexSet(z, strengths)
    count = int(opts.get("count", 0))
    if count == 0:
        return PointVortexSet([], [])
    return random_vortices(domain, count, int(opts.get("seed", cfg.seed)),
                           float(opts.get("strength_max", 2.0 * np.pi)))


def cmd_vortex(cfg):
    dom, R = build_domain(cfg)
    _direct_guard(cfg, dom)
    vs = vortex_set(cfg, dom, R)
    fld = solve_point_vortices(dom, vs, cfg.solver)
    rel, worst, scale = fld.boundary_residual(100)
    summary = [("n_islands", dom.n_islands), ("n_vortices", vs.positions.size),
               ("iterations", fld.solution.iterations), ("boundary_residual_rel", rel),
               ("boundary_residual_abs", worst), ("boundary_scale", scale)]
    write_table(cfg.output / "summary.tsv", cfg, ["key", "value"], summary)
    write_table(cfg.output / "vortices.tsv", cfg, ["xi_re", "xi_im", "strength"],
                zip(vs.positions.real, vs.positions.imag, vs.strengths))
    _write_grid(cfg, "grid.tsv", *evaluate_grid(dom, R, lambda z: fld(z), cfg.grid))
    _write_timings(cfg, fld.solution.timings)
    return summary


def cmd_selftest(cfg=None):
    """Fast smoke checks of the kernel, the FMM and a full solve."""
    from .fmm import cauchy_direct, cauchy_sum
    from .geometry import cap_domain
    from .kernels import kernel_matrix

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NoNorthPoleIsland)
        results = []
        eq = cap_domain([((0.0, 0.0, -1.0), np.pi / 2)], 32)
        results.append(("equator_nullity", float(np.abs(kernel_matrix(eq)).max()), 1e-13))

        rng = np.random.default_rng(0)
        z = rng.random(2000) + 1j * rng.random(2000)
        q = rng.standard_normal(2000) + 0j
        exact = cauchy_direct(z, q)
        results.append(("fmm_vs_direct", float(np.abs(cauchy_sum(z, q) - exact).max() / np.abs(exact).max()), 1e-12))

        dom = cap_domain([((0.3, 0.2, -0.9), 0.4)], 128)
        f = lambda t: exact_harmonic(t, dom.anchors)  # noqa: E731
        sol = solve_dirichlet(dom, f)
        s = sample_points(dom, 50)
        results.append(("single_cap_solve", max_relative_error(evaluate_solution(sol, s, check=False), f(s)), 1e-10))
    for name, err, tol in results:
        print(f"{'PASS' if err <= tol else 'FAIL'}\t{name}\t{err:.3e}\t(tol {tol:.0e})")
    return all(err <= tol for _, err, tol in results)


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def _threads(serial):
    if serial:
        return 1
    env = os.environ.get("LBSOLVE_THREADS")
    if env is None:
        return None
    try:
        n = int(env)
    except ValueError:
        raise ConfigInvalid("LBSOLVE_THREADS must be an integer") from None
    if n < 1:
        raise ConfigInvalid("LBSOLVE_THREADS must be at least 1")
    return n


def build_parser():
    p = argparse.ArgumentParser(prog="lbsolve", description="Laplace-Beltrami Dirichlet solver for islands on the sphere")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("config", nargs=None if name != "selftest" else "?", help="YAML run configuration")
        sp.add_argument("--out", help="output directory (overrides output.dir)")
        sp.add_argument("--serial", action="store_true", help="single-threaded, reproducible mode")
        sp.add_argument("-v", "--verbose", action="count", default=0)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        threads = _threads(args.serial)
        with threadpool_limits(limits=threads):
            if args.command == "selftest":
                return 0 if cmd_selftest() else 3
            cfg = load_config(args.config, args.command, args.out)
            {"solve": cmd_solve, "study": cmd_study, "bench": cmd_bench, "vortex": cmd_vortex}[args.command](cfg)
    except LBSolveError as exc:
        print(f"error {exc.code}: {exc}", file=sys.stderr)
        return exc.exit_status
    except ValueError as exc:
        print(f"error CONFIG_INVALID: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
