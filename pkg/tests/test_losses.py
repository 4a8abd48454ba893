import numpy as np
import pytest

from panoplane.gradcheck import validate_gradients
from panoplane.losses import (
    LossConfig,
    LossError,
    ScalePredictions,
    ScaleTargets,
    berhu,
    berhu_threshold,
    downsample_targets,
    loss_baseline,
    loss_curvature,
    loss_depth,
    loss_normal,
    loss_plane,
    loss_total,
    plane_weight,
)
from panoplane.sphere import EquirectGrid, FloatMap, Vec3Map, ray_map


def random_maps(seed, width=32, height=16):
    rng = np.random.default_rng(seed)
    grid = EquirectGrid(width, height)
    shape = grid.shape
    z = FloatMap(grid, rng.uniform(0.5, 5.0, shape), rng.random(shape) < 0.9)
    z_star = FloatMap(grid, rng.uniform(0.5, 5.0, shape))
    c_star = FloatMap(grid, rng.uniform(0.0, 2.0, shape))
    n_raw = Vec3Map(grid, rng.normal(size=shape + (3,)), rng.random(shape) < 0.9)
    ns = rng.normal(size=shape + (3,))
    ns /= np.linalg.norm(ns, axis=-1, keepdims=True)
    n_star = Vec3Map(grid, ns)
    return grid, z, z_star, c_star, n_raw, n_star


class TestBerhu:
    def test_l1_branch(self):
        v, g = berhu(np.array([0.5, -0.5]), 1.0)
        np.testing.assert_allclose(v, [0.5, 0.5])
        np.testing.assert_allclose(g, [1.0, -1.0])

    def test_l2_branch(self):
        v, g = berhu(np.array([3.0]), 1.0)
        np.testing.assert_allclose(v, [5.0])  # (9 + 1) / 2
        np.testing.assert_allclose(g, [3.0])

    def test_continuity_at_knee(self):
        t = 0.7
        eps = 1e-12
        lo, _ = berhu(t - eps, t)
        hi, _ = berhu(t + eps, t)
        assert abs(lo - hi) < 1e-9
        assert berhu(t, t)[0] == pytest.approx(t)

    def test_gradient_continuity_at_knee(self):
        t = 0.7
        _, glo = berhu(t - 1e-12, t)
        _, ghi = berhu(t + 1e-12, t)
        assert abs(glo - ghi) < 1e-9

    def test_rejects_nonpositive_threshold(self):
        with pytest.raises(LossError):
            berhu(np.zeros(3), 0.0)

    def test_threshold_fraction_of_max(self):
        err = np.array([[1.0, -4.0], [2.0, 0.5]])
        mask = np.ones((2, 2), bool)
        assert berhu_threshold(err, mask) == pytest.approx(0.8)
        mask[0, 1] = False
        assert berhu_threshold(err, mask) == pytest.approx(0.4)

    def test_threshold_empty_mask(self):
        with pytest.raises(LossError):
            berhu_threshold(np.ones((2, 2)), np.zeros((2, 2), bool))


class TestPlaneWeight:
    def test_planar_full_weight(self):
        assert plane_weight(3.0, 0.0) == pytest.approx(3.0)

    def test_monotone_decreasing_in_curvature(self):
        c = np.linspace(0.0, 10.0, 100)
        w = plane_weight(1.0, c)
        assert (np.diff(w) < 0).all()
        assert (w > 0).all()

    def test_known_value(self):
        assert plane_weight(2.0, 1.0) == pytest.approx(2.0 / np.e)

    def test_rejects_negative_curvature_norm(self):
        with pytest.raises(LossError):
            plane_weight(1.0, -0.1)


class TestTermValues:
    def test_depth_zero_on_perfect_prediction(self):
        _, z, _, c_star, _, _ = random_maps(0)
        v, g = loss_depth(z, z, c_star)
        assert v == 0.0

    def test_depth_hand_value(self):
        # Single valid pixel, error 0.1, curvature 0 -> BerHu with
        # T = 0.02 gives the L2 branch: (0.01 + 0.0004) / 0.04 = 0.26.
        grid = EquirectGrid(4, 2)
        mask = np.zeros(grid.shape, bool)
        mask[0, 0] = True
        z = FloatMap(grid, np.full(grid.shape, 1.1), mask)
        z_star = FloatMap(grid, np.ones(grid.shape))
        c_star = FloatMap(grid, np.zeros(grid.shape))
        v, _ = loss_depth(z, z_star, c_star)
        assert v == pytest.approx(0.26)

    def test_depth_curvature_downweights(self):
        grid, z, z_star, _, _, _ = random_maps(1)
        flat = FloatMap(grid, np.zeros(grid.shape))
        curved = FloatMap(grid, np.full(grid.shape, 2.0))
        v_flat, _ = loss_depth(z, z_star, flat)
        v_curved, _ = loss_depth(z, z_star, curved)
        assert v_curved == pytest.approx(v_flat * np.exp(-2.0))

    def test_normal_minimized_at_alignment(self):
        grid, _, _, c_star, _, n_star = random_maps(2)
        aligned = Vec3Map(grid, 2.5 * n_star.values)
        v, _ = loss_normal(aligned, n_star, c_star)
        mask = n_star.mask & c_star.mask
        expected = -np.mean(np.exp(-c_star.values)[mask])
        assert v == pytest.approx(expected)

    def test_normal_scale_invariant_value(self):
        grid, _, _, c_star, n_raw, n_star = random_maps(3)
        v1, _ = loss_normal(n_raw, n_star, c_star)
        v2, _ = loss_normal(Vec3Map(grid, 7.0 * n_raw.values, n_raw.mask), n_star, c_star)
        assert v2 == pytest.approx(v1)

    def test_curvature_sparsity_term(self):
        # Perfect boundary prediction still pays the eta * |c| sparsity tax.
        grid = EquirectGrid(8, 4)
        c = FloatMap(grid, np.full(grid.shape, 0.5))
        v, _ = loss_curvature(c, c, LossConfig(eta=0.1))
        assert v == pytest.approx(0.1 * 0.5 * np.exp(-0.5))

    def test_plane_zero_on_consistent_inputs(self):
        grid, z, _, c_star, _, n_star = random_maps(4)
        v, gz, gn = loss_plane(z, n_star, z, n_star, c_star)
        assert v == pytest.approx(0.0, abs=1e-12)

    def test_plane_residual_formula(self):
        # One pixel; check the value against the residual computed by hand.
        grid = EquirectGrid(4, 2)
        mask = np.zeros(grid.shape, bool)
        mask[1, 2] = True
        rng = np.random.default_rng(5)
        z = FloatMap(grid, rng.uniform(1, 2, grid.shape), mask)
        z_star = FloatMap(grid, rng.uniform(1, 2, grid.shape))
        n = rng.normal(size=grid.shape + (3,))
        n /= np.linalg.norm(n, axis=-1, keepdims=True)
        n_star = Vec3Map(grid, n)
        c_star = FloatMap(grid, np.zeros(grid.shape))
        rays = ray_map(grid)
        r = (
            z.values[1, 2] * np.dot(n[1, 2], rays[1, 2])
            - z_star.values[1, 2] * np.dot(n[1, 2], rays[1, 2])
        )
        t = max(0.2 * abs(r), np.finfo(np.float64).tiny)
        expected = abs(r) if abs(r) <= t else (r * r + t * t) / (2 * t)
        v, _, _ = loss_plane(z, n_star, z_star, n_star, c_star)
        assert v == pytest.approx(expected)

    def test_empty_mask_raises(self):
        grid = EquirectGrid(4, 2)
        empty = FloatMap(grid, np.ones(grid.shape), np.zeros(grid.shape, bool))
        full = FloatMap(grid, np.ones(grid.shape))
        with pytest.raises(LossError):
            loss_depth(empty, full, full)


class TestDownsample:
    def make_targets(self, seed, width=16, height=8):
        rng = np.random.default_rng(seed)
        grid = EquirectGrid(width, height)
        depth = FloatMap(grid, rng.uniform(1, 5, grid.shape), rng.random(grid.shape) < 0.8)
        n = rng.normal(size=grid.shape + (3,))
        n /= np.linalg.norm(n, axis=-1, keepdims=True)
        normals = Vec3Map(grid, n)
        boundary = FloatMap(grid, rng.uniform(0, 1, grid.shape))
        return ScaleTargets(depth, normals, boundary)

    def test_constant_preserved(self):
        grid = EquirectGrid(16, 8)
        t = ScaleTargets(
            FloatMap(grid, np.full(grid.shape, 2.0)),
            Vec3Map(grid, np.tile(np.array([0.0, 0.0, 1.0]), grid.shape + (1,))),
            FloatMap(grid, np.full(grid.shape, 0.3)),
        )
        small = downsample_targets(t)
        assert small.depth.grid.shape == (4, 8)
        np.testing.assert_allclose(small.depth.values, 2.0)
        np.testing.assert_allclose(small.normals.values[..., 2], 1.0)
        np.testing.assert_allclose(small.boundary.values, 0.3)

    def test_block_average_oracle(self):
        t = self.make_targets(6)
        small = downsample_targets(t)
        # Loop oracle for depth at every low-res pixel.
        for i in range(small.depth.grid.height):
            for j in range(small.depth.grid.width):
                blkv = t.depth.values[2 * i : 2 * i + 2, 2 * j : 2 * j + 2]
                blkm = t.depth.mask[2 * i : 2 * i + 2, 2 * j : 2 * j + 2]
                if blkm.any():
                    assert small.depth.mask[i, j]
                    assert small.depth.values[i, j] == pytest.approx(blkv[blkm].mean())
                else:
                    assert not small.depth.mask[i, j]

    def test_normals_unit_length(self):
        small = downsample_targets(self.make_targets(7))
        norms = np.linalg.norm(small.normals.values[small.normals.mask], axis=-1)
        np.testing.assert_allclose(norms, 1.0, atol=1e-12)


class TestTotal:
    def make_pair(self, seed):
        rng = np.random.default_rng(seed)
        out = []
        for width, height in ((16, 8), (32, 16)):
            grid = EquirectGrid(width, height)
            shape = grid.shape
            n = rng.normal(size=shape + (3,))
            nstar = n / np.linalg.norm(n, axis=-1, keepdims=True)
            preds = ScalePredictions(
                FloatMap(grid, rng.uniform(1, 5, shape)),
                Vec3Map(grid, rng.normal(size=shape + (3,))),
                FloatMap(grid, rng.uniform(0, 1, shape)),
            )
            targets = ScaleTargets(
                FloatMap(grid, rng.uniform(1, 5, shape)),
                Vec3Map(grid, nstar),
                FloatMap(grid, rng.uniform(0, 1, shape)),
            )
            out.append((preds, targets))
        return [p for p, _ in out], [t for _, t in out]

    def test_weighted_sum_of_terms(self):
        preds, targets = self.make_pair(8)
        cfg = LossConfig()
        res = loss_total(preds, targets, cfg)
        weights = {"depth": cfg.alpha, "normal": cfg.beta,
                   "curvature": cfg.gamma, "plane": cfg.zeta}
        acc = sum(weights[name][s] * v for (name, s), v in res.terms.items())
        assert res.total == pytest.approx(acc)

    def test_zero_weight_skips_term(self):
        preds, targets = self.make_pair(9)
        cfg = LossConfig(gamma=(0.0, 0.0))
        res = loss_total(preds, targets, cfg)
        assert ("curvature", 0) not in res.terms
        assert ("curvature", 1) not in res.terms
        assert (res.grad_boundary[1] == 0).all()

    def test_gradient_shapes(self):
        preds, targets = self.make_pair(10)
        res = loss_total(preds, targets)
        assert res.grad_depth[0].shape == (8, 16)
        assert res.grad_normals[1].shape == (16, 32, 3)

    def test_wrong_scale_count(self):
        preds, targets = self.make_pair(11)
        with pytest.raises(LossError):
            loss_total(preds[:1], targets[:1])

    def test_negative_weight_rejected(self):
        with pytest.raises(LossError):
            LossConfig(alpha=(-0.1, 0.6))


class TestBaseline:
    def test_zero_on_perfect_constant(self):
        grid = EquirectGrid(8, 4)
        z = FloatMap(grid, np.full(grid.shape, 2.0))
        v, grads = loss_baseline([z, z], [z, z])
        assert v == 0.0
        assert all((g == 0).all() for g in grads)

    def test_hand_value_single_scale_pair(self):
        # Constant truth, prediction off by 1 everywhere, no gradient
        # penalty: loss is alpha0*N0 + alpha1*N1 over total count.
        cfg = LossConfig(beta=(0.0, 0.0))
        g0, g1 = EquirectGrid(8, 4), EquirectGrid(16, 8)
        z0 = FloatMap(g0, np.full(g0.shape, 3.0))
        z1 = FloatMap(g1, np.full(g1.shape, 3.0))
        t0 = FloatMap(g0, np.full(g0.shape, 2.0))
        t1 = FloatMap(g1, np.full(g1.shape, 2.0))
        v, _ = loss_baseline([z0, z1], [t0, t1], cfg)
        n0, n1 = 32, 128
        assert v == pytest.approx((cfg.alpha[0] * n0 + cfg.alpha[1] * n1) / (n0 + n1))

    def test_gradient_penalty_wraps_longitude(self):
        # A single column step pays the same penalty at the seam as inside.
        cfg = LossConfig(alpha=(0.0, 0.0), beta=(1.0, 1.0))
        grid = EquirectGrid(8, 4)
        target = FloatMap(grid, np.zeros(grid.shape))

        def penalty(step_col):
            z = np.zeros(grid.shape)
            z[:, step_col:] = 1.0
            if step_col == 0:
                z[:] = 0.0
                z[:, 4:] = 1.0
            return loss_baseline([target, FloatMap(grid, z)], [target, target], cfg)[0]

        inside = penalty(4)
        z = np.zeros(grid.shape)
        z[:, :4] = 1.0  # steps at column 4 and at the wrap 7->0
        seam = loss_baseline([target, FloatMap(grid, z)], [target, target], cfg)[0]
        assert seam == pytest.approx(inside)

    def test_mismatched_scales(self):
        grid = EquirectGrid(8, 4)
        z = FloatMap(grid, np.ones(grid.shape))
        with pytest.raises(LossError):
            loss_baseline([z], [z, z])


class TestFiniteDifference:
    def test_all_terms_below_tolerance(self):
        reports = validate_gradients(seed=0, samples=200)
        names = {r["term"] for r in reports}
        assert names == {"depth", "normal", "curvature", "plane_depth",
                         "plane_normal", "baseline"}
        for r in reports:
            assert r["samples"] > 0
            assert r["max_rel_err"] < 1e-4, r
