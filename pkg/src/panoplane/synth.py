"""Analytic piecewise-planar scene generator.

Scenes are collections of planes n.X + d = 0 (n unit and camera-facing,
d > 0 since the camera at the origin lies strictly inside the scene),
optionally clipped to axis-aligned rectangles for box faces. Rendering is
exact ray-plane intersection per pixel, so the depth/normal/label maps
serve as ground truth for every downstream test.

Boundary ground truth is label-transition based: a pixel is boundary (1)
iff its wrap-aware 4-neighborhood spans two or more labels. Analytic
curvature at a crease is not a finite number, so the numeric curvature
path is validated against these transition locations instead.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .sphere import EquirectGrid, FloatMap, GeometryError, Vec3Map, ray_map
from .segmentation import LabelMap

# Flat per-plane colors for RGB output and label visualization.
PALETTE = np.array(
    [
        [0.894, 0.102, 0.110],
        [0.216, 0.494, 0.722],
        [0.302, 0.686, 0.290],
        [0.596, 0.306, 0.639],
        [1.000, 0.498, 0.000],
        [0.651, 0.337, 0.157],
        [0.969, 0.506, 0.749],
        [0.400, 0.761, 0.647],
        [0.988, 0.553, 0.384],
        [0.553, 0.627, 0.796],
        [0.906, 0.541, 0.765],
        [0.651, 0.847, 0.329],
    ]
)


class SceneError(ValueError):
    """Raised for invalid scene definitions (camera outside, no hit, ...)."""


@dataclass
class ScenePlane:
    """A plane n.X + d = 0, optionally bounded to an axis-aligned rectangle.

    bounds, when present, is a (3, 2) array of per-axis [lo, hi] limits in
    camera coordinates; the plane's own axis has lo == hi.
    """

    normal: np.ndarray
    distance: float
    bounds: np.ndarray = None

    def __post_init__(self):
        self.normal = np.asarray(self.normal, dtype=np.float64)
        n = np.linalg.norm(self.normal)
        if n < 1e-12:
            raise SceneError("plane normal must be nonzero")
        self.normal = self.normal / n
        if self.distance <= 0:
            raise SceneError("plane distance must be positive (camera-facing)")
        if self.bounds is not None:
            self.bounds = np.asarray(self.bounds, dtype=np.float64)

    def as_dict(self) -> dict:
        out = {"n": [float(x) for x in self.normal], "d": float(self.distance)}
        if self.bounds is not None:
            out["bounds"] = self.bounds.tolist()
        return out


@dataclass
class SynthScene:
    """Piecewise-planar scene around a camera at the origin."""

    planes: list

    @staticmethod
    def from_dict(spec: dict) -> "SynthScene":
        if "room" in spec:
            room = spec["room"]
            return make_room(
                tuple(room["dims"]),
                tuple(room.get("camera_offset", (0.0, 0.0, 0.0))),
                [tuple(map(tuple, b)) for b in spec.get("boxes", [])],
            )
        planes = [
            ScenePlane(p["n"], p["d"], p.get("bounds")) for p in spec["planes"]
        ]
        return SynthScene(planes)

    def as_dict(self) -> dict:
        return {"planes": [p.as_dict() for p in self.planes]}

    @staticmethod
    def from_json(path) -> "SynthScene":
        with open(path) as f:
            return SynthScene.from_dict(json.load(f))


def make_room(
    dims: tuple,
    camera_offset: tuple = (0.0, 0.0, 0.0),
    boxes: list = (),
) -> SynthScene:
    """Axis-aligned cuboid room, optionally with boxes resting on the floor.

    dims = (w, h, l) along (x, y, z); the room spans +/- dims/2 around its
    center and the camera sits at camera_offset from that center. Each box
    is ((cx, cz), (sx, sy, sz)): footprint center on the floor plus size.
    Box bottoms are against the floor, so each contributes 5 visible
    planes; the room contributes 6.
    """
    w, h, l = dims
    off = np.asarray(camera_offset, dtype=np.float64)
    half = np.array([w / 2, h / 2, l / 2])
    if np.any(np.abs(off) >= half):
        raise SceneError("camera must be strictly inside the room")
    planes = []
    for axis in range(3):
        for sign in (1.0, -1.0):
            n = np.zeros(3)
            n[axis] = -sign  # wall at +half faces inward (camera-facing)
            d = half[axis] - sign * off[axis]
            planes.append(ScenePlane(n, d))

    floor_y = -half[1] - off[1]
    for (cx, cz), (sx, sy, sz) in boxes:
        c = np.array([cx, 0.0, cz]) - np.array([off[0], 0.0, off[2]])
        x0, x1 = c[0] - sx / 2, c[0] + sx / 2
        z0, z1 = c[2] - sz / 2, c[2] + sz / 2
        y0, y1 = floor_y, floor_y + sy
        if x0 <= 0 <= x1 and z0 <= 0 <= z1 and y0 <= 0 <= y1:
            raise SceneError("camera must be outside every box")
        # Top face.
        planes.append(
            ScenePlane((0, 1 if y1 < 0 else -1, 0), abs(y1),
                       np.array([[x0, x1], [y1, y1], [z0, z1]]))
        )
        # Four side faces; normals face the camera side of each slab.
        for axis, (lo, hi) in ((0, (x0, x1)), (2, (z0, z1))):
            for val in (lo, hi):
                n = np.zeros(3)
                n[axis] = 1.0 if val < 0 else -1.0
                b = np.array([[x0, x1], [y0, y1], [z0, z1]], dtype=np.float64)
                b[axis] = [val, val]
                planes.append(ScenePlane(n, abs(val), b))
    return SynthScene(planes)


def transition_boundary(labels: np.ndarray) -> np.ndarray:
    """1.0 where the wrap-aware 4-neighborhood spans >= 2 labels."""
    b = np.zeros(labels.shape, dtype=np.float64)
    b[np.roll(labels, 1, axis=1) != labels] = 1.0
    b[np.roll(labels, -1, axis=1) != labels] = 1.0
    b[1:][labels[:-1] != labels[1:]] = 1.0
    b[:-1][labels[1:] != labels[:-1]] = 1.0
    return b


def render_gt(scene: SynthScene, grid: EquirectGrid):
    """Exact ground truth: (depth, normals, boundary, labels, rgb).

    Per pixel, the nearest positive ray-plane intersection that respects
    the plane's bounds wins. Depth is Euclidean ray distance; labels are
    1-based plane indices; rgb is a flat per-plane color.
    """
    rays = ray_map(grid)
    h, w = grid.shape
    best_t = np.full((h, w), np.inf)
    best_idx = np.full((h, w), -1, dtype=np.int64)
    for idx, plane in enumerate(scene.planes):
        ndotb = rays @ plane.normal
        with np.errstate(divide="ignore"):
            t = -plane.distance / ndotb
        hit = (ndotb < 0) & (t > 0)
        if plane.bounds is not None:
            pts = t[..., None] * rays
            tol = 1e-9
            for axis in range(3):
                lo, hi = plane.bounds[axis]
                if lo == hi:
                    continue
                hit &= (pts[..., axis] >= lo - tol) & (pts[..., axis] <= hi + tol)
        closer = hit & (t < best_t)
        best_t[closer] = t[closer]
        best_idx[closer] = idx
    if np.any(best_idx < 0):
        raise SceneError("a viewing ray hits no plane; camera not enclosed")

    depth = FloatMap(grid, best_t)
    normals_arr = np.stack([p.normal for p in scene.planes])[best_idx]
    normals = Vec3Map(grid, normals_arr)
    labels = LabelMap(grid, (best_idx + 1).astype(np.int32), len(scene.planes))
    boundary = FloatMap(grid, transition_boundary(labels.labels))
    rgb = Vec3Map(grid, PALETTE[best_idx % len(PALETTE)])
    return depth, normals, boundary, labels, rgb
