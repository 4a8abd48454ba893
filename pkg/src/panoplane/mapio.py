"""Bit-exact file I/O for the artifact formats.

Float rasters travel as PFM (portable float map): "Pf" for 1 channel,
"PF" for 3, scale line "-1.0" (little-endian), rows stored bottom-up per
the PFM convention. Curvature pairs are stored as a 3-channel PFM with a
zero third channel, since PFM has no 2-channel variant. RGB images and
masks are PNG (mask 0 = invalid); label maps are 16-bit PNG. Meshes go
out as Wavefront OBJ with per-vertex colors and as binary little-endian
PLY.
"""

from __future__ import annotations

import struct

import numpy as np
from PIL import Image

from .icosphere import ScaledMesh
from .sphere import EquirectGrid, FloatMap, Vec3Map


class MapIOError(ValueError):
    """Raised on malformed files; never yields partial data."""


def write_pfm(path, values: np.ndarray) -> None:
    """Write a (H, W) or (H, W, 3) float array as little-endian PFM."""
    values = np.asarray(values, dtype=np.float32)
    if values.ndim == 2:
        header = b"Pf"
    elif values.ndim == 3 and values.shape[2] == 3:
        header = b"PF"
    else:
        raise MapIOError(f"PFM supports 1 or 3 channels, got shape {values.shape}")
    h, w = values.shape[:2]
    with open(path, "wb") as f:
        f.write(header + b"\n")
        f.write(f"{w} {h}\n".encode())
        f.write(b"-1.0\n")
        f.write(np.ascontiguousarray(values[::-1]).tobytes())


def read_pfm(path) -> np.ndarray:
    """Read a little-endian PFM; returns float32 (H, W) or (H, W, 3)."""
    with open(path, "rb") as f:
        magic = f.readline().strip()
        if magic == b"PF":
            channels = 3
        elif magic == b"Pf":
            channels = 1
        else:
            raise MapIOError(f"not a PFM file (magic {magic!r})")
        dims = f.readline().split()
        if len(dims) != 2:
            raise MapIOError("malformed PFM dimensions line")
        w, h = int(dims[0]), int(dims[1])
        scale = float(f.readline())
        if scale >= 0:
            raise MapIOError("big-endian PFM (positive scale) is not supported")
        count = w * h * channels
        data = np.frombuffer(f.read(count * 4), dtype="<f4")
        if data.size != count:
            raise MapIOError("truncated PFM payload")
    shape = (h, w) if channels == 1 else (h, w, 3)
    return data.reshape(shape)[::-1].copy()


def write_curvature_pfm(path, k1: np.ndarray, k2: np.ndarray) -> None:
    """Pack (k1, k2) into the first two channels of a 3-channel PFM."""
    stacked = np.stack([k1, k2, np.zeros_like(k1)], axis=-1)
    write_pfm(path, stacked)


def read_curvature_pfm(path) -> tuple[np.ndarray, np.ndarray]:
    data = read_pfm(path)
    if data.ndim != 3:
        raise MapIOError("curvature PFM must be 3-channel")
    return data[..., 0], data[..., 1]


def write_rgb_png(path, rgb: np.ndarray) -> None:
    """(H, W, 3) floats in [0, 1] -> 8-bit PNG."""
    arr = np.clip(np.asarray(rgb) * 255.0 + 0.5, 0, 255).astype(np.uint8)
    Image.fromarray(arr, mode="RGB").save(path)


def read_rgb_png(path) -> np.ndarray:
    img = Image.open(path).convert("RGB")
    return np.asarray(img, dtype=np.float64) / 255.0


def write_mask_png(path, mask: np.ndarray) -> None:
    """Boolean mask -> single-channel PNG, 0 = invalid, 255 = valid."""
    arr = np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(path)


def read_mask_png(path) -> np.ndarray:
    img = Image.open(path).convert("L")
    return np.asarray(img) != 0


def write_label_png(path, labels: np.ndarray) -> None:
    """Integer labels -> 16-bit PNG; labels above 65535 are rejected."""
    labels = np.asarray(labels)
    if labels.min() < 0 or labels.max() > 65535:
        raise MapIOError("labels must fit in uint16")
    Image.fromarray(labels.astype(np.uint16)).save(path)


def read_label_png(path) -> np.ndarray:
    img = Image.open(path)
    return np.asarray(img, dtype=np.int32)


def write_obj(path, mesh: ScaledMesh) -> None:
    """Wavefront OBJ with per-vertex colors on the vertex lines."""
    pos = mesh.positions()
    faces = mesh.valid_faces()
    with open(path, "w") as f:
        for i in range(pos.shape[0]):
            x, y, z = pos[i]
            if mesh.colors is not None:
                r, g, b = mesh.colors[i]
                f.write(f"v {x:.9g} {y:.9g} {z:.9g} {r:.9g} {g:.9g} {b:.9g}\n")
            else:
                f.write(f"v {x:.9g} {y:.9g} {z:.9g}\n")
        for a, b, c in faces + 1:
            f.write(f"f {a} {b} {c}\n")


def read_obj(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Parse OBJ vertex/face/color lines; colors is None when absent."""
    verts, colors, faces = [], [], []
    with open(path) as f:
        for line in f:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                nums = [float(x) for x in parts[1:]]
                verts.append(nums[:3])
                if len(nums) >= 6:
                    colors.append(nums[3:6])
            elif parts[0] == "f":
                faces.append([int(p.split("/")[0]) - 1 for p in parts[1:4]])
    return (
        np.array(verts, dtype=np.float64),
        np.array(faces, dtype=np.int64) if faces else np.zeros((0, 3), np.int64),
        np.array(colors, dtype=np.float64) if colors else None,
    )


def write_ply(path, mesh: ScaledMesh) -> None:
    """Binary little-endian PLY with float positions and uchar colors."""
    pos = mesh.positions().astype("<f4")
    faces = mesh.valid_faces()
    has_color = mesh.colors is not None
    with open(path, "wb") as f:
        header = ["ply", "format binary_little_endian 1.0",
                  f"element vertex {pos.shape[0]}",
                  "property float x", "property float y", "property float z"]
        if has_color:
            header += ["property uchar red", "property uchar green", "property uchar blue"]
        header += [f"element face {faces.shape[0]}",
                   "property list uchar int vertex_indices", "end_header"]
        f.write(("\n".join(header) + "\n").encode())
        if has_color:
            col = np.clip(mesh.colors * 255.0 + 0.5, 0, 255).astype(np.uint8)
            for i in range(pos.shape[0]):
                f.write(pos[i].tobytes())
                f.write(col[i].tobytes())
        else:
            f.write(np.ascontiguousarray(pos).tobytes())
        for tri in faces.astype("<i4"):
            f.write(struct.pack("<B", 3) + tri.tobytes())


def read_ply(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Read the binary little-endian PLY subset written by write_ply."""
    with open(path, "rb") as f:
        if f.readline().strip() != b"ply":
            raise MapIOError("not a PLY file")
        if b"binary_little_endian" not in f.readline():
            raise MapIOError("only binary little-endian PLY is supported")
        n_verts = n_faces = 0
        props = []
        element = None
        while True:
            line = f.readline()
            if not line:
                raise MapIOError("PLY header missing end_header")
            parts = line.split()
            if parts[0] == b"element":
                element = parts[1]
                if element == b"vertex":
                    n_verts = int(parts[2])
                elif element == b"face":
                    n_faces = int(parts[2])
            elif parts[0] == b"property" and element == b"vertex":
                props.append(parts[1])
            elif parts[0] == b"end_header":
                break
        has_color = b"uchar" in props
        stride = 12 + (3 if has_color else 0)
        raw = f.read(n_verts * stride)
        if len(raw) != n_verts * stride:
            raise MapIOError("truncated PLY vertex data")
        buf = np.frombuffer(raw, dtype=np.uint8).reshape(n_verts, stride)
        verts = buf[:, :12].copy().view("<f4").reshape(n_verts, 3).astype(np.float64)
        colors = buf[:, 12:].astype(np.float64) / 255.0 if has_color else None
        faces = np.empty((n_faces, 3), dtype=np.int64)
        for i in range(n_faces):
            (cnt,) = struct.unpack("<B", f.read(1))
            if cnt != 3:
                raise MapIOError("only triangle faces are supported")
            faces[i] = np.frombuffer(f.read(12), dtype="<i4")
    return verts, faces, colors
