import numpy as np
import pytest

from panoplane.curvature import (
    CurvatureMap,
    boundary_map,
    curvature_map,
    local_basis,
    principal_curvatures,
    second_form,
)
from panoplane.sphere import EquirectGrid, FloatMap, GeometryError, Vec3Map, ray_map

from conftest import dilate_wrap


class TestLocalBasis:
    def test_z_normal(self):
        u, v = local_basis(np.array([0.0, 0.0, 1.0]))
        np.testing.assert_allclose(np.abs(u), [1, 0, 0], atol=1e-15)
        for a, b in ((u, v), (u, [0, 0, 1]), (v, [0, 0, 1])):
            assert abs(np.dot(a, b)) < 1e-15

    def test_fallback_branch(self):
        u, v = local_basis(np.array([0.0, 1.0, 0.0]))
        n = np.array([0.0, 1.0, 0.0])
        for a, b in ((u, v), (u, n), (v, n)):
            assert abs(np.dot(a, b)) < 1e-12
        assert np.linalg.norm(u) == pytest.approx(1.0)
        assert np.linalg.norm(v) == pytest.approx(1.0)

    def test_random_orthonormality(self):
        rng = np.random.default_rng(0)
        n = rng.normal(size=(1000, 3))
        n /= np.linalg.norm(n, axis=1, keepdims=True)
        u, v = local_basis(n)
        worst = max(
            np.abs(np.einsum("ij,ij->i", u, v)).max(),
            np.abs(np.einsum("ij,ij->i", u, n)).max(),
            np.abs(np.einsum("ij,ij->i", v, n)).max(),
        )
        assert worst < 1e-12

    def test_zero_vector_rejected(self):
        with pytest.raises(GeometryError):
            local_basis(np.zeros(3))


class TestPrincipalCurvatures:
    def test_zero_matrix(self):
        assert principal_curvatures(0.0, 0.0, 0.0) == (0.0, 0.0)

    def test_diagonal(self):
        k1, k2 = principal_curvatures(2.0, 0.0, 0.0)
        assert (k1, k2) == (2.0, 0.0)

    def test_hand_eigendecomposition(self):
        # [[1, 1], [1, 1]] has eigenvalues 2 and 0.
        k1, k2 = principal_curvatures(1.0, 1.0, 1.0)
        assert k1 == pytest.approx(2.0)
        assert k2 == pytest.approx(0.0, abs=1e-15)

    def test_trace_determinant_identities(self):
        rng = np.random.default_rng(1)
        a, b, c = rng.normal(size=(3, 5000))
        k1, k2 = principal_curvatures(a, b, c)
        assert np.abs(k1 + k2 - (a + c)).max() < 1e-12
        assert np.abs(k1 * k2 - (a * c - b * b)).max() < 1e-12
        assert (k1 >= k2).all()


class TestSecondForm:
    def test_constant_normal_zero(self):
        grid = EquirectGrid(32, 16)
        n = np.tile(np.array([0.0, 0.0, 1.0]), grid.shape + (1,))
        f = second_form(Vec3Map(grid, n), 8, 16)
        assert (f.a, f.b, f.c) == (0.0, 0.0, 0.0)

    def test_invalid_neighbor_masks_pixel(self):
        grid = EquirectGrid(32, 16)
        n = np.tile(np.array([0.0, 0.0, 1.0]), grid.shape + (1,))
        mask = np.ones(grid.shape, bool)
        mask[8, 15] = False
        with pytest.raises(GeometryError):
            second_form(Vec3Map(grid, n, mask), 8, 16)

    def test_sphere_magnitude(self):
        # Normal map of the unit sphere seen from its center: the curvature
        # magnitude must be 1 at mid-latitudes.
        grid = EquirectGrid(512, 256)
        nm = Vec3Map(grid, -ray_map(grid))
        curv = curvature_map(nm)
        mid = np.abs(np.degrees(grid.latitudes())) < 60
        mag = np.hypot(curv.k1, curv.k2)[mid]
        np.testing.assert_allclose(mag, 1.0, rtol=0.05)

    def test_planar_room_regions(self, room_gt):
        _, normals, boundary, _, _ = room_gt
        curv = curvature_map(normals)
        off_edge = ~dilate_wrap(boundary.values > 0, 2) & curv.mask
        assert np.hypot(curv.k1, curv.k2)[off_edge].max() < 1e-3


class TestBoundaryMap:
    def test_all_planar_zero(self):
        grid = EquirectGrid(16, 8)
        curv = CurvatureMap(grid, np.zeros(grid.shape), np.zeros(grid.shape),
                            np.ones(grid.shape, bool))
        assert boundary_map(curv).values.max() == 0.0

    def test_pythagorean(self):
        grid = EquirectGrid(16, 8)
        curv = CurvatureMap(grid, np.full(grid.shape, 3.0), np.full(grid.shape, 4.0),
                            np.ones(grid.shape, bool))
        np.testing.assert_allclose(boundary_map(curv).values, 5.0)

    def test_room_edges_dominate(self, room_gt):
        _, normals, boundary, _, _ = room_gt
        bm = boundary_map(curvature_map(normals))
        edge = dilate_wrap(boundary.values > 0, 1) & bm.mask
        interior = ~dilate_wrap(boundary.values > 0, 2) & bm.mask
        edge_level = np.median(bm.values[edge & (bm.values > 0)])
        in_plane = np.median(bm.values[interior])
        assert edge_level > 10 * max(in_plane, 1e-12)

    def test_basis_sign_invariance(self):
        # ||c|| must not depend on the sign/order of the tangent basis;
        # equivalently it is invariant under k1/k2 swap and negation.
        rng = np.random.default_rng(2)
        a, b, c = rng.normal(size=(3, 100))
        k1, k2 = principal_curvatures(a, b, c)
        swapped = np.hypot(-k2, -k1)
        np.testing.assert_allclose(np.hypot(k1, k2), swapped, atol=1e-15)

    def test_locally_constant_normals_zero_curvature(self, room_gt):
        _, normals, _, _, _ = room_gt
        curv = curvature_map(normals)
        same = np.ones(normals.grid.shape, bool)
        for shift, axis in ((1, 1), (-1, 1)):
            same &= (np.roll(normals.values, shift, axis=axis) == normals.values).all(axis=-1)
        same[1:] &= (normals.values[:-1] == normals.values[1:]).all(axis=-1)
        same[:-1] &= (normals.values[1:] == normals.values[:-1]).all(axis=-1)
        sel = same & curv.mask
        assert np.hypot(curv.k1, curv.k2)[sel].max() == 0.0
