import numpy as np
import pytest
import scipy.linalg

from conftest import FOUR_CAPS, THREE_CAPS, quiet_caps, quiet_domain
from lbsolve.errors import SingularMatrix, SingularSchur, TooLarge
from lbsolve.geometry import make_plane_ellipse, plane_ellipse_array
from lbsolve.linsys import (
    GmresConfig,
    apply_preconditioner,
    build_preconditioner,
    condition_estimate,
    condition_number,
    dense_materialize,
    gmres,
    operator_closure,
)
from lbsolve.solver import exact_harmonic
from lbsolve.system import apply_operator, assemble


def system_for(dom, g=None):
    return assemble(dom, np.zeros(dom.n_nodes) if g is None else g)


TEST_GEOMETRIES = {
    "one_cap": lambda: quiet_caps(THREE_CAPS[:1], 64),
    "three_caps": lambda: quiet_caps(THREE_CAPS, 64),
    "four_caps": lambda: quiet_caps(FOUR_CAPS, 64),
    "plane_ellipses": lambda: quiet_domain(*plane_ellipse_array(32, 15, 0)),
}


class TestGmres:
    def test_identity(self, rng):
        b = rng.standard_normal(20)
        res = gmres(lambda v: v, b)
        assert res.converged and res.iterations == 1
        np.testing.assert_allclose(res.x, b, rtol=1e-14)

    def test_dense_vs_lu(self, rng):
        A = np.eye(10) * 4 + rng.standard_normal((10, 10))
        b = rng.standard_normal(10)
        res = gmres(lambda v: A @ v, b)
        np.testing.assert_allclose(res.x, scipy.linalg.lu_solve(scipy.linalg.lu_factor(A), b), atol=1e-10)

    def test_monotone_within_cycle(self, rng):
        A = np.eye(60) + 0.5 * rng.standard_normal((60, 60)) / np.sqrt(60)
        cfg = GmresConfig(tol=1e-12, restart=10)
        res = gmres(lambda v: A @ v, rng.standard_normal(60), cfg=cfg)
        assert res.converged
        # every restart recomputes the true residual; estimates within a cycle never increase
        hist = res.residuals
        for start in range(0, len(hist) - 1, 11):
            cycle = hist[start:start + 11]
            assert all(b <= a * (1 + 1e-12) for a, b in zip(cycle, cycle[1:]))

    def test_no_convergence_flag(self, rng):
        A = rng.standard_normal((40, 40))
        res = gmres(lambda v: A @ v, rng.standard_normal(40), cfg=GmresConfig(tol=1e-14, restart=2, max_iters=4))
        assert not res.converged and res.iterations == 4

    def test_zero_rhs(self):
        res = gmres(lambda v: v, np.zeros(5))
        assert res.converged and np.all(res.x == 0)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            GmresConfig(tol=0)
        with pytest.raises(ValueError):
            GmresConfig(restart=0)


class TestPreconditioner:
    def test_single_island_schur(self):
        sys = system_for(quiet_caps(THREE_CAPS[:1], 32))
        prec = build_preconditioner(sys)
        np.testing.assert_array_equal(prec.S, [[1.0]])
        r = np.arange(33.0)
        z = apply_preconditioner(prec, r)
        assert z[-1] == pytest.approx(r[-1])

    def test_schur_matches_dense(self):
        dom = quiet_caps(THREE_CAPS[:2], 32)
        sys = system_for(dom)
        S = build_preconditioner(sys).S
        np.testing.assert_allclose(S, sys.D - sys.F @ sys.E, atol=1e-14)

    def test_duplicate_anchors_singular(self):
        c1 = make_plane_ellipse(0, 0.3, 0.3, 0, 32)
        c2 = make_plane_ellipse(1, 0.3, 0.3, 0, 32)
        c3 = make_plane_ellipse(2, 0.3, 0.3, 0, 32)
        dom = quiet_domain([c1, c2, c3], [0.0, 1.0, 2.0])
        sys = system_for(dom)
        E = sys.E.copy()
        E[:, 2] = E[:, 1]
        object.__setattr__(sys, "E", E)
        with pytest.raises(SingularSchur):
            build_preconditioner(sys)

    def test_block_triangular_action(self, rng):
        dom = quiet_caps(THREE_CAPS, 32)
        sys = system_for(dom)
        prec = build_preconditioner(sys)
        r = np.zeros(sys.dim)
        r[:32] = rng.standard_normal(32)  # curve 0 has no constraint row
        np.testing.assert_allclose(apply_preconditioner(prec, r), r, atol=1e-15)

    @pytest.mark.parametrize("name", list(TEST_GEOMETRIES))
    def test_inverse_identity(self, rng, name):
        sys = system_for(TEST_GEOMETRIES[name]())
        prec = build_preconditioner(sys)
        n = sys.n_density
        R = rng.standard_normal((sys.dim, 100))
        Z = apply_preconditioner(prec, R)
        back = np.vstack([Z[:n] + sys.E @ Z[n:], sys.apply_F(Z[:n]) + sys.D @ Z[n:]])
        np.testing.assert_allclose(back, R, atol=1e-12 * np.abs(R).max())


class TestDense:
    def test_matches_apply(self, rng):
        sys = system_for(quiet_caps(THREE_CAPS, 32))
        A = dense_materialize(sys)
        for _ in range(20):
            v = rng.standard_normal(sys.dim)
            np.testing.assert_allclose(A @ v, apply_operator(sys, v, "direct"), atol=1e-12)
        np.testing.assert_allclose(A[:, 5], apply_operator(sys, np.eye(sys.dim)[5], "direct"), atol=1e-14)

    def test_equator_identity_block(self):
        sys = system_for(quiet_caps([((0.0, 0.0, 1.0), np.pi / 2)], 16))
        np.testing.assert_allclose(dense_materialize(sys)[:16, :16], np.eye(16), atol=1e-13)

    def test_guard(self):
        curves, anchors = plane_ellipse_array(512, 15, 0)
        sys = system_for(quiet_domain(curves, anchors))
        with pytest.raises(TooLarge):
            dense_materialize(sys)

    def test_condition_numbers(self):
        assert condition_number(np.eye(4)) == pytest.approx(1.0)
        assert condition_number(np.diag([1.0, 10.0])) == pytest.approx(10.0)
        with pytest.raises(SingularMatrix):
            condition_number(np.zeros((2, 2)))

    def test_estimate_matches_svd(self, rng):
        A = rng.standard_normal((200, 200)) + 5 * np.eye(200)
        assert condition_estimate(A) == pytest.approx(condition_number(A), rel=1e-8)

    def test_lu_agrees_with_gmres(self):
        dom = quiet_caps(THREE_CAPS, 128)
        g = exact_harmonic(dom.nodes, dom.anchors)
        sys = assemble(dom, g)
        res = gmres(operator_closure(sys), sys.rhs, build_preconditioner(sys))
        x = scipy.linalg.solve(dense_materialize(sys), sys.rhs)
        assert np.abs(res.x - x).max() <= 1e-9 * np.abs(x).max()

    def test_preconditioned_iterations_flat(self):
        iters = []
        for n in (32, 64, 128, 256):
            dom = quiet_caps(THREE_CAPS, n)
            sys = assemble(dom, exact_harmonic(dom.nodes, dom.anchors))
            iters.append(gmres(operator_closure(sys), sys.rhs, build_preconditioner(sys)).iterations)
        assert max(iters) - min(iters) <= 2


def _smallest_sv(A):
    return np.linalg.svd(A, compute_uv=False)[-1]


def test_smallest_singular_value_scaling():
    # the decay of the plain augmented matrix comes from the unweighted sum-of-strengths
    # row; rescaled by sqrt(N), or after preconditioning, it is flat in N
    plain, rescaled, prec = [], [], []
    for n in (32, 128, 512):
        sys = system_for(quiet_caps(THREE_CAPS, n))
        A = dense_materialize(sys)
        plain.append(_smallest_sv(A))
        B = A.copy()
        B[sys.n_density] *= np.sqrt(n)
        rescaled.append(_smallest_sv(B))
        prec.append(_smallest_sv(apply_preconditioner(build_preconditioner(sys), A)))
    assert plain[-1] < 0.5 * plain[0]
    assert max(rescaled) / min(rescaled) < 1.01
    assert max(prec) / min(prec) < 1.01
