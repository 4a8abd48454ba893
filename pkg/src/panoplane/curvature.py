"""Principal curvature from a normal map via the second fundamental form.

Curvature is computed from the normal map alone. Derivatives are central
differences of the normal, scaled to arc length on the unit sphere
(longitude step carries a cos(phi) factor) so the result has 1/meter
units at unit radius. Rows clamp at the poles, columns wrap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sphere import EquirectGrid, FloatMap, GeometryError, Vec3Map


@dataclass
class SecondForm:
    """Entries of the symmetric 2x2 shape matrix [[A, B], [B, C]]."""

    a: float
    b: float
    c: float


@dataclass
class CurvatureMap:
    """Per-pixel principal curvatures (k1 >= k2), units 1/meter."""

    grid: EquirectGrid
    k1: np.ndarray
    k2: np.ndarray
    mask: np.ndarray


def local_basis(n: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Tangent vectors (u, v) completing an orthonormal basis with n.

    u = normalize(a x n) with a = (0,1,0), falling back to a = (1,0,0)
    when n is nearly parallel to +y. Broadcasts over leading dims.
    """
    n = np.asarray(n, dtype=np.float64)
    norm = np.linalg.norm(n, axis=-1)
    if np.any(norm < 1e-12):
        raise GeometryError("zero-length normal has no tangent basis")
    use_fallback = np.abs(n[..., 1] / norm) > 0.99
    a = np.where(
        use_fallback[..., None],
        np.array([1.0, 0.0, 0.0]),
        np.array([0.0, 1.0, 0.0]),
    )
    u = np.cross(a, n)
    u /= np.linalg.norm(u, axis=-1, keepdims=True)
    v = np.cross(n / norm[..., None], u)
    return u, v


def second_form_map(
    normals: Vec3Map, use_arc_length: bool = True
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Shape-matrix entries (A, B, C) at every pixel plus a validity mask.

    A = -(dn/dx) . u, B = -(dn/dy) . u, C = -(dn/dx) . v, with x along
    longitude and y along latitude. A pixel needs itself and its 4
    neighbors valid (columns wrap; rows clamp, with the difference step
    shortened accordingly).
    """
    grid = normals.grid
    h, w = grid.shape
    n = normals.values
    mask = normals.mask

    left = np.roll(n, 1, axis=1)
    right = np.roll(n, -1, axis=1)
    mask_x = mask & np.roll(mask, 1, axis=1) & np.roll(mask, -1, axis=1)

    rows = np.arange(h)
    up = np.clip(rows - 1, 0, h - 1)
    down = np.clip(rows + 1, 0, h - 1)
    row_steps = (down - up).astype(np.float64)  # 1 at the poles, else 2

    dndx = (right - left) / 2.0
    dndy = (n[down] - n[up]) / row_steps[:, None, None]
    mask_y = mask & mask[up] & mask[down]

    if use_arc_length:
        dx = np.cos(grid.latitudes()) * (2 * np.pi / w)
        dy = np.pi / h
    else:
        dx = np.ones(h)
        dy = 1.0
    dndx = dndx / dx[:, None, None]
    dndy = dndy / dy

    valid = mask_x & mask_y
    safe_n = np.where(valid[..., None], n, np.array([0.0, 0.0, 1.0]))
    u, v = local_basis(safe_n)
    a = -np.einsum("ijk,ijk->ij", dndx, u)
    b = -np.einsum("ijk,ijk->ij", dndy, u)
    c = -np.einsum("ijk,ijk->ij", dndx, v)
    return a, b, c, valid


def second_form(normals: Vec3Map, row: int, col: int, use_arc_length: bool = True) -> SecondForm:
    """Shape matrix at a single pixel; raises if any required neighbor is invalid."""
    a, b, c, valid = second_form_map(normals, use_arc_length=use_arc_length)
    if not valid[row, col]:
        raise GeometryError(f"pixel ({row}, {col}) lacks valid 4-neighborhood")
    return SecondForm(float(a[row, col]), float(b[row, col]), float(c[row, col]))


def principal_curvatures(a, b, c) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form eigenvalues of [[A, B], [B, C]], sorted k1 >= k2."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    m = (a + c) / 2.0
    r = np.sqrt(((a - c) / 2.0) ** 2 + b**2)
    return m + r, m - r


def curvature_map(normals: Vec3Map, use_arc_length: bool = True) -> CurvatureMap:
    """Principal curvature raster from a normal map."""
    a, b, c, valid = second_form_map(normals, use_arc_length=use_arc_length)
    k1, k2 = principal_curvatures(a, b, c)
    k1 = np.where(valid, k1, 0.0)
    k2 = np.where(valid, k2, 0.0)
    return CurvatureMap(normals.grid, k1, k2, valid)


def boundary_map(curv: CurvatureMap) -> FloatMap:
    """Plane-boundary indicator: per-pixel L2 norm of (k1, k2)."""
    return FloatMap(curv.grid, np.hypot(curv.k1, curv.k2), curv.mask.copy())
