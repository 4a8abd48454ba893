"""Equirectangular spherical image geometry.

Coordinate conventions (single source of truth for the whole package):

* The camera sits at the origin of a y-up right-handed frame.
* Latitude phi in (-pi/2, pi/2) increases toward +y (up); longitude lam in
  (-pi, pi) is 0 along +z and increases toward +x.
* An equirectangular grid is W x H with W == 2*H. Pixel centers:
  phi = pi/2 - (i + 0.5) * pi / H, lam = (j + 0.5) * 2*pi / W - pi.
* The unit viewing ray for (phi, lam) is
  (cos(phi)*sin(lam), sin(phi), cos(phi)*cos(lam)).
* Depth everywhere means Euclidean ray distance from the camera center,
  never planar Z.

Cubemap convention: faces ordered (+x, -x, +y, -y, +z, -z). For a ray
direction d and its dominant-axis face, the in-face coordinates are

    +x: u = -z/|x|, v = -y/|x|      -x: u = +z/|x|, v = -y/|x|
    +y: u = +x/|y|, v = +z/|y|      -y: u = +x/|y|, v = -z/|y|
    +z: u = +x/|z|, v = -y/|z|      -z: u = -x/|z|, v = -y/|z|

with u, v in [-1, 1] mapping to columns/rows by col = (u+1)/2 * S - 0.5,
row = (v+1)/2 * S - 0.5 (pixel centers).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class GeometryError(ValueError):
    """Raised on invalid geometric inputs (bad grid, negative depth, ...)."""


@dataclass(frozen=True)
class EquirectGrid:
    """A fixed 2:1 equirectangular pixel grid."""

    width: int
    height: int

    def __post_init__(self):
        if self.width != 2 * self.height:
            raise GeometryError(
                f"equirect grid must be 2:1, got {self.width}x{self.height}"
            )
        if self.height < 1:
            raise GeometryError("grid height must be positive")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    def latitudes(self) -> np.ndarray:
        """Per-row latitude of pixel centers, shape (H,)."""
        i = np.arange(self.height, dtype=np.float64)
        return np.pi / 2 - (i + 0.5) * np.pi / self.height

    def longitudes(self) -> np.ndarray:
        """Per-column longitude of pixel centers, shape (W,)."""
        j = np.arange(self.width, dtype=np.float64)
        return (j + 0.5) * 2 * np.pi / self.width - np.pi

    def pixel_coords(self, phi: np.ndarray, lam: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Continuous (row, col) for spherical coords, inverse of the center map."""
        phi = np.asarray(phi, dtype=np.float64)
        lam = np.asarray(lam, dtype=np.float64)
        row = (np.pi / 2 - phi) * self.height / np.pi - 0.5
        col = (lam + np.pi) * self.width / (2 * np.pi) - 0.5
        return row, col


@dataclass
class FloatMap:
    """Dense per-pixel scalar raster (depth in meters, boundary, ...) with mask."""

    grid: EquirectGrid
    values: np.ndarray
    mask: np.ndarray = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.grid.shape:
            raise GeometryError(
                f"values shape {self.values.shape} != grid shape {self.grid.shape}"
            )
        if self.mask is None:
            self.mask = np.ones(self.grid.shape, dtype=bool)
        else:
            self.mask = np.asarray(self.mask, dtype=bool)
            if self.mask.shape != self.grid.shape:
                raise GeometryError("mask shape does not match grid")

    def copy(self) -> "FloatMap":
        return FloatMap(self.grid, self.values.copy(), self.mask.copy())


@dataclass
class Vec3Map:
    """Dense per-pixel 3-vector raster (normals, points, RGB) with mask."""

    grid: EquirectGrid
    values: np.ndarray
    mask: np.ndarray = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.grid.shape + (3,):
            raise GeometryError(
                f"values shape {self.values.shape} != {self.grid.shape + (3,)}"
            )
        if self.mask is None:
            self.mask = np.ones(self.grid.shape, dtype=bool)
        else:
            self.mask = np.asarray(self.mask, dtype=bool)
            if self.mask.shape != self.grid.shape:
                raise GeometryError("mask shape does not match grid")

    def copy(self) -> "Vec3Map":
        return Vec3Map(self.grid, self.values.copy(), self.mask.copy())


# Face index order. FACE_AXES[f] is the outward axis of face f.
FACE_NAMES = ("+x", "-x", "+y", "-y", "+z", "-z")
FACE_AXES = np.array(
    [
        [1, 0, 0],
        [-1, 0, 0],
        [0, 1, 0],
        [0, -1, 0],
        [0, 0, 1],
        [0, 0, -1],
    ],
    dtype=np.float64,
)
# u/v directions of each face in the convention documented above.
FACE_U = np.array(
    [
        [0, 0, -1],
        [0, 0, 1],
        [1, 0, 0],
        [1, 0, 0],
        [1, 0, 0],
        [-1, 0, 0],
    ],
    dtype=np.float64,
)
FACE_V = np.array(
    [
        [0, -1, 0],
        [0, -1, 0],
        [0, 0, 1],
        [0, 0, -1],
        [0, -1, 0],
        [0, -1, 0],
    ],
    dtype=np.float64,
)


@dataclass
class CubeMap:
    """Six square faces in (+x, -x, +y, -y, +z, -z) order, scalar or 3-vector."""

    faces: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.faces) != 6:
            raise GeometryError("cubemap needs exactly 6 faces")
        self.faces = [np.asarray(f, dtype=np.float64) for f in self.faces]
        s = self.faces[0].shape[0]
        for f in self.faces:
            if f.shape[0] != f.shape[1] or f.shape[0] != s:
                raise GeometryError("cubemap faces must be square and equal size")
            if f.ndim not in (2, 3):
                raise GeometryError("cubemap faces must be 2D or 3D arrays")

    @property
    def face_size(self) -> int:
        return self.faces[0].shape[0]

    @property
    def channels(self) -> int:
        return 1 if self.faces[0].ndim == 2 else self.faces[0].shape[2]


def geodesic_map(grid: EquirectGrid) -> np.ndarray:
    """Per-pixel (latitude, longitude) channels, shape (H, W, 2)."""
    phi = grid.latitudes()
    lam = grid.longitudes()
    out = np.empty(grid.shape + (2,), dtype=np.float64)
    out[:, :, 0] = phi[:, None]
    out[:, :, 1] = lam[None, :]
    return out


def spherical_to_ray(phi: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """Unit rays for (phi, lam); broadcasts, returns (..., 3)."""
    phi = np.asarray(phi, dtype=np.float64)
    lam = np.asarray(lam, dtype=np.float64)
    cp = np.cos(phi)
    return np.stack([cp * np.sin(lam), np.sin(phi), cp * np.cos(lam)], axis=-1)


def ray_to_spherical(rays: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(phi, lam) recovered from unit rays."""
    rays = np.asarray(rays, dtype=np.float64)
    phi = np.arcsin(np.clip(rays[..., 1], -1.0, 1.0))
    lam = np.arctan2(rays[..., 0], rays[..., 2])
    return phi, lam


def ray_map(grid: EquirectGrid) -> np.ndarray:
    """Unit viewing ray per pixel, shape (H, W, 3)."""
    g = geodesic_map(grid)
    return spherical_to_ray(g[:, :, 0], g[:, :, 1])


def ray_direction(grid: EquirectGrid, row: int, col: int) -> np.ndarray:
    """Unit viewing ray of a single pixel."""
    if not (0 <= row < grid.height and 0 <= col < grid.width):
        raise GeometryError(f"pixel ({row}, {col}) out of bounds for {grid.shape}")
    phi = np.pi / 2 - (row + 0.5) * np.pi / grid.height
    lam = (col + 0.5) * 2 * np.pi / grid.width - np.pi
    return spherical_to_ray(phi, lam)


def back_project(depth: FloatMap) -> Vec3Map:
    """Lift a ray-distance depth map to 3D points X = z * ray."""
    z = depth.values
    if np.any(z[depth.mask] < 0):
        raise GeometryError("negative depth at a valid pixel")
    rays = ray_map(depth.grid)
    pts = z[:, :, None] * rays
    return Vec3Map(depth.grid, pts, depth.mask.copy())


def classify_face(dirs: np.ndarray) -> np.ndarray:
    """Index of the cube face each direction pierces (dominant axis)."""
    dirs = np.asarray(dirs, dtype=np.float64)
    ax = np.abs(dirs)
    dominant = np.argmax(ax, axis=-1)  # 0=x, 1=y, 2=z
    sign_neg = np.take_along_axis(dirs, dominant[..., None], axis=-1)[..., 0] < 0
    return dominant * 2 + sign_neg.astype(np.int64)


def face_uv(dirs: np.ndarray, face: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(u, v) in [-1, 1] on the given face for each direction."""
    dirs = np.asarray(dirs, dtype=np.float64)
    axis = np.einsum("...k,...k->...", dirs, FACE_AXES[face])
    u = np.einsum("...k,...k->...", dirs, FACE_U[face]) / axis
    v = np.einsum("...k,...k->...", dirs, FACE_V[face]) / axis
    return u, v


def face_ray_directions(face: int, size: int) -> np.ndarray:
    """Unit ray direction at every pixel center of one cube face, (S, S, 3)."""
    idx = np.arange(size, dtype=np.float64)
    u = (idx + 0.5) / size * 2 - 1
    v = (idx + 0.5) / size * 2 - 1
    uu, vv = np.meshgrid(u, v)
    d = (
        FACE_AXES[face][None, None, :]
        + uu[:, :, None] * FACE_U[face][None, None, :]
        + vv[:, :, None] * FACE_V[face][None, None, :]
    )
    return d / np.linalg.norm(d, axis=-1, keepdims=True)


def planar_to_ray_depth(cube: CubeMap) -> CubeMap:
    """Convert per-face planar-Z depth faces to ray-distance faces."""
    if cube.channels != 1:
        raise GeometryError("planar depth conversion expects scalar faces")
    size = cube.face_size
    out = []
    for f in range(6):
        dirs = face_ray_directions(f, size)
        # |d . axis| is the cosine between the ray and the face axis.
        cosang = np.abs(dirs @ FACE_AXES[f])
        out.append(cube.faces[f] / cosang)
    return CubeMap(out)


def _sample_face_nearest(face: np.ndarray, row: np.ndarray, col: np.ndarray) -> np.ndarray:
    s = face.shape[0]
    r = np.clip(np.round(row).astype(np.int64), 0, s - 1)
    c = np.clip(np.round(col).astype(np.int64), 0, s - 1)
    return face[r, c]


def _sample_face_bilinear(face: np.ndarray, row: np.ndarray, col: np.ndarray) -> np.ndarray:
    s = face.shape[0]
    r = np.clip(row, 0.0, s - 1.0)
    c = np.clip(col, 0.0, s - 1.0)
    r0 = np.floor(r).astype(np.int64)
    c0 = np.floor(c).astype(np.int64)
    r1 = np.minimum(r0 + 1, s - 1)
    c1 = np.minimum(c0 + 1, s - 1)
    fr = r - r0
    fc = c - c0
    if face.ndim == 3:
        fr = fr[..., None]
        fc = fc[..., None]
    return (
        face[r0, c0] * (1 - fr) * (1 - fc)
        + face[r0, c1] * (1 - fr) * fc
        + face[r1, c0] * fr * (1 - fc)
        + face[r1, c1] * fr * fc
    )


def equirect_from_cubemap(cube: CubeMap, grid: EquirectGrid, interp: str = "bilinear"):
    """Resample a cubemap to equirectangular along each pixel's viewing ray.

    Use interp="bilinear" for color and "nearest" for depth. Sampling clamps
    at face edges (no cross-face blending). Returns FloatMap for scalar
    cubes, Vec3Map for 3-channel cubes.
    """
    if interp not in ("bilinear", "nearest"):
        raise GeometryError(f"unknown interpolation {interp!r}")
    dirs = ray_map(grid)
    face = classify_face(dirs)
    u, v = face_uv(dirs, face)
    size = cube.face_size
    col = (u + 1) / 2 * size - 0.5
    row = (v + 1) / 2 * size - 0.5

    if cube.channels == 3:
        out = np.zeros(grid.shape + (3,), dtype=np.float64)
    else:
        out = np.zeros(grid.shape, dtype=np.float64)
    sampler = _sample_face_nearest if interp == "nearest" else _sample_face_bilinear
    for f in range(6):
        sel = face == f
        if not np.any(sel):
            continue
        out[sel] = sampler(cube.faces[f], row[sel], col[sel])
    if cube.channels == 3:
        return Vec3Map(grid, out)
    return FloatMap(grid, out)
