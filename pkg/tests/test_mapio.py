import numpy as np
import pytest

from panoplane.icosphere import mesh_from_depth
from panoplane.mapio import (
    MapIOError,
    read_curvature_pfm,
    read_label_png,
    read_mask_png,
    read_obj,
    read_pfm,
    read_ply,
    read_rgb_png,
    write_curvature_pfm,
    write_label_png,
    write_mask_png,
    write_obj,
    write_pfm,
    write_ply,
    write_rgb_png,
)
from panoplane.sphere import EquirectGrid, FloatMap


@pytest.fixture
def small_mesh(room_gt):
    depth, _, _, _, rgb = room_gt
    return mesh_from_depth(depth, rgb, level=2)


class TestPfm:
    def test_single_channel_roundtrip(self, tmp_path):
        rng = np.random.default_rng(0)
        vals = rng.normal(size=(16, 32)).astype(np.float32)
        p = tmp_path / "a.pfm"
        write_pfm(p, vals)
        np.testing.assert_array_equal(read_pfm(p), vals)

    def test_three_channel_roundtrip(self, tmp_path):
        rng = np.random.default_rng(1)
        vals = rng.normal(size=(8, 16, 3)).astype(np.float32)
        p = tmp_path / "a.pfm"
        write_pfm(p, vals)
        np.testing.assert_array_equal(read_pfm(p), vals)

    def test_one_pixel_byte_layout(self, tmp_path):
        # 3.5 as little-endian float32 is 00 00 60 40; rows bottom-up.
        p = tmp_path / "one.pfm"
        write_pfm(p, np.array([[3.5]], dtype=np.float32))
        data = p.read_bytes()
        assert data == b"Pf\n1 1\n-1.0\n" + bytes([0x00, 0x00, 0x60, 0x40])

    def test_row_order_bottom_up(self, tmp_path):
        vals = np.array([[1.0, 2.0], [3.0, 4.0]], dtype=np.float32)
        p = tmp_path / "rows.pfm"
        write_pfm(p, vals)
        payload = p.read_bytes().split(b"-1.0\n", 1)[1]
        stored = np.frombuffer(payload, dtype="<f4").reshape(2, 2)
        np.testing.assert_array_equal(stored, vals[::-1])

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "bad.pfm"
        p.write_bytes(b"P6\n1 1\n-1.0\n\x00\x00\x00\x00")
        with pytest.raises(MapIOError):
            read_pfm(p)

    def test_big_endian_rejected(self, tmp_path):
        p = tmp_path / "be.pfm"
        p.write_bytes(b"Pf\n1 1\n1.0\n\x40\x60\x00\x00")
        with pytest.raises(MapIOError):
            read_pfm(p)

    def test_truncated_payload(self, tmp_path):
        p = tmp_path / "short.pfm"
        p.write_bytes(b"Pf\n2 2\n-1.0\n\x00\x00\x60\x40")
        with pytest.raises(MapIOError):
            read_pfm(p)

    def test_two_channel_shape_rejected(self, tmp_path):
        with pytest.raises(MapIOError):
            write_pfm(tmp_path / "x.pfm", np.zeros((4, 4, 2)))

    def test_curvature_roundtrip(self, tmp_path):
        rng = np.random.default_rng(2)
        k1 = rng.normal(size=(8, 16)).astype(np.float32)
        k2 = rng.normal(size=(8, 16)).astype(np.float32)
        p = tmp_path / "c.pfm"
        write_curvature_pfm(p, k1, k2)
        r1, r2 = read_curvature_pfm(p)
        np.testing.assert_array_equal(r1, k1)
        np.testing.assert_array_equal(r2, k2)
        # The pad channel really is zero on disk.
        assert (read_pfm(p)[..., 2] == 0).all()


class TestPng:
    def test_rgb_roundtrip_quantized(self, tmp_path):
        rng = np.random.default_rng(3)
        rgb = rng.random((8, 16, 3))
        p = tmp_path / "rgb.png"
        write_rgb_png(p, rgb)
        back = read_rgb_png(p)
        assert np.abs(back - rgb).max() <= 0.5 / 255.0 + 1e-12

    def test_exact_on_quantized_values(self, tmp_path):
        rgb = np.round(np.random.default_rng(4).random((4, 8, 3)) * 255) / 255.0
        p = tmp_path / "q.png"
        write_rgb_png(p, rgb)
        np.testing.assert_allclose(read_rgb_png(p), rgb, atol=1e-12)

    def test_mask_roundtrip(self, tmp_path):
        mask = np.random.default_rng(5).random((8, 16)) < 0.5
        p = tmp_path / "m.png"
        write_mask_png(p, mask)
        np.testing.assert_array_equal(read_mask_png(p), mask)

    def test_label_roundtrip_16bit(self, tmp_path):
        labels = np.array([[0, 1, 2], [300, 65535, 7]], dtype=np.int32)
        p = tmp_path / "l.png"
        write_label_png(p, labels)
        np.testing.assert_array_equal(read_label_png(p), labels)

    def test_label_overflow_rejected(self, tmp_path):
        with pytest.raises(MapIOError):
            write_label_png(tmp_path / "l.png", np.array([[70000]]))
        with pytest.raises(MapIOError):
            write_label_png(tmp_path / "l.png", np.array([[-1]]))


class TestMeshFormats:
    def test_obj_roundtrip(self, tmp_path, small_mesh):
        p = tmp_path / "m.obj"
        write_obj(p, small_mesh)
        verts, faces, colors = read_obj(p)
        np.testing.assert_allclose(verts, small_mesh.positions(), rtol=1e-6)
        np.testing.assert_array_equal(faces, small_mesh.valid_faces())
        assert colors is not None
        np.testing.assert_allclose(colors, small_mesh.colors, rtol=1e-6)

    def test_obj_without_colors(self, tmp_path, small_mesh):
        small_mesh.colors = None
        p = tmp_path / "m.obj"
        write_obj(p, small_mesh)
        _, _, colors = read_obj(p)
        assert colors is None

    def test_ply_roundtrip(self, tmp_path, small_mesh):
        p = tmp_path / "m.ply"
        write_ply(p, small_mesh)
        verts, faces, colors = read_ply(p)
        np.testing.assert_allclose(verts, small_mesh.positions(), atol=1e-6)
        np.testing.assert_array_equal(faces, small_mesh.valid_faces())
        assert np.abs(colors - small_mesh.colors).max() <= 0.5 / 255.0 + 1e-12

    def test_ply_header_is_binary_le(self, tmp_path, small_mesh):
        p = tmp_path / "m.ply"
        write_ply(p, small_mesh)
        head = p.read_bytes()[:200]
        assert head.startswith(b"ply\nformat binary_little_endian 1.0\n")

    def test_ply_ascii_rejected(self, tmp_path):
        p = tmp_path / "a.ply"
        p.write_bytes(b"ply\nformat ascii 1.0\nend_header\n")
        with pytest.raises(MapIOError):
            read_ply(p)

    def test_deterministic_bytes(self, tmp_path, small_mesh):
        p1, p2 = tmp_path / "a.ply", tmp_path / "b.ply"
        write_ply(p1, small_mesh)
        write_ply(p2, small_mesh)
        assert p1.read_bytes() == p2.read_bytes()
        o1, o2 = tmp_path / "a.obj", tmp_path / "b.obj"
        write_obj(o1, small_mesh)
        write_obj(o2, small_mesh)
        assert o1.read_bytes() == o2.read_bytes()
