import warnings

import numpy as np
import pytest

from conftest import quiet_domain
from lbsolve.errors import DuplicatePointsOverflow, NoRun, TargetEqualsSource
from lbsolve.fmm import CauchyFMM, build_tree, cauchy_direct, cauchy_sum, expansion_order, fmm_stats
from lbsolve.geometry import make_domain, sphere_ellipse_array
from lbsolve.kernels import dlp_apply_direct
from oracles import scaled_cauchy_error


def random_problem(rng, n):
    z = rng.random(n) + 1j * rng.random(n)
    q = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return z, q


class TestTree:
    def test_single_point(self):
        tr = build_tree([0.3 + 0.1j])
        assert tr.depth == 0 and tr.n_boxes == 1

    def test_uniform_leaves(self, rng):
        z = rng.random(10_000) + 1j * rng.random(10_000)
        tr = build_tree(z, leaf_capacity=30)
        leaves = np.flatnonzero(tr.leaf)
        assert tr.count[leaves].max() <= 30
        assert abs(tr.depth - np.ceil(np.log(10_000 / 30) / np.log(4))) <= 2
        # every point in exactly one leaf
        owned = np.concatenate([tr.perm[tr.start[b]:tr.start[b] + tr.count[b]] for b in leaves])
        assert np.array_equal(np.sort(owned), np.arange(z.size))

    def test_no_empty_boxes(self, rng):
        z = np.concatenate([rng.random(500) * 1e-3, 5 + 5j + rng.random(500)])
        tr = build_tree(z)
        assert np.all(tr.count > 0)

    def test_clustered_depth(self, rng):
        z = np.concatenate([1e-6 * (rng.random(2000) + 1j * rng.random(2000)), rng.random(2000) * 50])
        assert build_tree(z).depth > 10

    def test_duplicates(self):
        z = np.concatenate([np.full(40, 0.5 + 0.5j), np.linspace(0, 1, 10)])
        with pytest.warns(DuplicatePointsOverflow):
            tr = build_tree(z, leaf_capacity=30, max_depth=12)
        assert tr.depth <= 12

    def test_bad_input(self):
        with pytest.raises(ValueError):
            build_tree([])
        with pytest.raises(ValueError):
            build_tree([np.nan])


class TestSums:
    def test_trivial(self):
        assert cauchy_sum([0.0], [1.0], targets=[2.0])[0] == pytest.approx(0.5)

    def test_order(self):
        assert expansion_order(1e-14) == 49
        assert expansion_order(1e-300) == 60

    @pytest.mark.parametrize("n", [256, 1024, 4096])
    def test_vs_direct(self, rng, n):
        z, q = random_problem(rng, n)
        assert scaled_cauchy_error(cauchy_sum(z, q), cauchy_direct(z, q), z, q) <= 1e-12

    def test_random_configurations(self, rng):
        for _ in range(20):
            n = int(2 ** rng.integers(8, 15))
            eps = 10.0 ** -rng.integers(6, 15)
            z = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) * 10.0 ** rng.uniform(-3, 3)
            q = rng.standard_normal(n) + 0j
            m = min(n, 256)
            got = cauchy_sum(z, q, eps=eps)[:m]
            diff = z[:m, None] - z[None, :]
            diff[np.arange(m), np.arange(m)] = np.inf
            ref = (q[None, :] / diff).sum(axis=1)
            scale = (np.abs(q)[None, :] / np.abs(diff)).sum(axis=1).max()
            assert np.abs(got - ref).max() / scale <= 10 * eps

    def test_separate_targets(self, rng):
        z, q = random_problem(rng, 3000)
        t = 0.5 + 0.5j + 2 * (rng.random(500) - 0.5 + 1j * (rng.random(500) - 0.5))
        assert scaled_cauchy_error(cauchy_sum(z, q, t), cauchy_direct(z, q, t), z, q, t) <= 1e-12

    def test_target_equals_source(self, rng):
        z, q = random_problem(rng, 100)
        with pytest.raises(TargetEqualsSource):
            cauchy_sum(z, q, targets=[z[7]])

    def test_linearity_translation(self, rng):
        z, q = random_problem(rng, 2000)
        q2 = rng.standard_normal(2000) + 0j
        f = CauchyFMM(z)
        a, b = f(q), f(q2)
        np.testing.assert_allclose(f(2 * q - 3 * q2), 2 * a - 3 * b, rtol=0, atol=1e-12 * np.abs(a).max())
        shifted = cauchy_sum(z + (3 - 2j), q)
        assert np.abs(shifted - a).max() <= 1e-12 * np.abs(a).max()

    def test_deterministic(self, rng):
        z, q = random_problem(rng, 5000)
        assert np.array_equal(cauchy_sum(z, q), cauchy_sum(z, q))

    def test_equator_kernel_nullity(self):
        # Im part of the Cauchy sum plus the correction reproduces the direct (zero) kernel action
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            from lbsolve.geometry import cap_domain
            dom = cap_domain([((0.0, 0.0, 1.0), np.pi / 2)], 128)
        sigma = np.ones(128)
        t = np.array([0.2 + 0.1j, -0.4j])
        w = dom.weights * sigma
        cauchy = cauchy_sum(dom.nodes, w * dom.d_nodes, t)
        from lbsolve.kernels import correction_weights
        via_fmm = -cauchy.imag / (2 * np.pi) + correction_weights(dom.nodes, dom.d_nodes) @ w
        np.testing.assert_allclose(via_fmm, dlp_apply_direct(dom, sigma, t), atol=1e-13)


class TestStats:
    def test_no_run(self):
        with pytest.raises(NoRun):
            fmm_stats(None)
        with pytest.raises(NoRun):
            fmm_stats(CauchyFMM([0.0, 1.0]))

    def test_uniform_levels(self, rng):
        z, q = random_problem(rng, 1000)
        f = CauchyFMM(z)
        f(q)
        st = fmm_stats(f)
        assert st.levels_used <= 6
        assert st.boxes == f.tree.n_boxes and st.near_pairs > 0 and st.far_pairs > 0

    def test_ellipse_array_depth(self):
        curves, anchors = sphere_ellipse_array(64, 407, seed=0)
        dom = make_domain(curves, anchors)
        f = CauchyFMM(dom.nodes)
        f(np.ones(dom.n_nodes, dtype=complex))
        assert fmm_stats(f).levels_used >= 12


def test_plane_domain_nodes_roundtrip():
    from lbsolve.geometry import make_plane_ellipse
    dom = quiet_domain([make_plane_ellipse(0, 0.3, 0.2, 0.1, 64)])
    q = np.ones(64, dtype=complex)
    assert scaled_cauchy_error(cauchy_sum(dom.nodes, q), cauchy_direct(dom.nodes, q), dom.nodes, q) <= 1e-13
