"""Per-segment plane estimation and pixel-to-plane projection.

Each segment gets a plane n.X + d = 0 with the normal fixed to the
segment's median normal and the distance found by 1-parameter RANSAC
followed by an exact least-squares refinement over the inliers. Pixels
are then moved onto the plane along their viewing rays.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .sphere import FloatMap, GeometryError, Vec3Map, ray_map
from .segmentation import LabelMap

logger = logging.getLogger(__name__)

GRAZING_COS = 1e-3  # |n.ray| below this keeps the raw depth


class PlaneFitError(ValueError):
    """Raised when a segment cannot produce a plane."""


@dataclass
class RansacConfig:
    iterations: int = 100
    inlier_tol: float = 0.05  # meters, point-to-plane
    seed: int = 0
    min_inlier_fraction: float = 0.5  # gate below which a fit is rejected

    def __post_init__(self):
        if self.iterations < 1:
            raise PlaneFitError("need at least one RANSAC iteration")
        if self.inlier_tol <= 0:
            raise PlaneFitError("inlier tolerance must be positive")


@dataclass
class PlaneSegment:
    """A fitted segment: plane n.X + d = 0 with its pixel and inlier sets."""

    label: int
    rows: np.ndarray
    cols: np.ndarray
    normal: np.ndarray
    distance: float
    inliers: np.ndarray  # boolean over the segment's pixels
    accepted: bool = True

    @property
    def n_pixels(self) -> int:
        return self.rows.size

    @property
    def n_inliers(self) -> int:
        return int(np.count_nonzero(self.inliers))

    def as_dict(self) -> dict:
        return {
            "label": int(self.label),
            "n": [float(x) for x in self.normal],
            "d": float(self.distance),
            "n_pixels": self.n_pixels,
            "n_inliers": self.n_inliers,
            "accepted": bool(self.accepted),
        }


def median_normal(rows, cols, normals: Vec3Map) -> np.ndarray:
    """Component-wise median of a segment's valid normals, renormalized."""
    valid = normals.mask[rows, cols]
    if not np.any(valid):
        raise PlaneFitError("segment has no valid normals")
    seg = normals.values[rows[valid], cols[valid]]
    med = np.median(seg, axis=0)
    norm = np.linalg.norm(med)
    if norm < 1e-12:
        raise PlaneFitError("median normal is the zero vector")
    return med / norm


def ransac_distance(
    rows, cols, depth: FloatMap, normal: np.ndarray, cfg: RansacConfig = None
) -> tuple[float, np.ndarray]:
    """Plane distance by 1-parameter RANSAC with least-squares refinement.

    Pixels are taken in raster order; each iteration hypothesizes
    d = -n.X from one sampled pixel and counts point-to-plane inliers.
    The best hypothesis (ties to smaller |d|) is refined to the exact 1-D
    least-squares minimizer d* = -mean(n.X) over its inliers. Returns
    (d, inlier flags over the segment pixels).
    """
    cfg = cfg or RansacConfig()
    valid = depth.mask[rows, cols]
    if not np.any(valid):
        raise PlaneFitError("segment has no valid depth")
    rays = ray_map(depth.grid)[rows[valid], cols[valid]]
    z = depth.values[rows[valid], cols[valid]]
    proj = z * (rays @ normal)  # n.X per pixel

    rng = np.random.default_rng(cfg.seed)
    best_count = -1
    best_d = 0.0
    for _ in range(cfg.iterations):
        i = int(rng.integers(proj.size))
        d = -proj[i]
        count = int(np.count_nonzero(np.abs(proj + d) <= cfg.inlier_tol))
        if count > best_count or (count == best_count and abs(d) < abs(best_d)):
            best_count = count
            best_d = d
    inl = np.abs(proj + best_d) <= cfg.inlier_tol
    d_star = float(-np.mean(proj[inl]))

    inliers = np.zeros(rows.size, dtype=bool)
    inliers[np.flatnonzero(valid)[inl]] = True
    return d_star, inliers


def project_to_plane(
    rows, cols, normal: np.ndarray, distance: float, grid
) -> tuple[np.ndarray, np.ndarray]:
    """Ray-plane intersection depths for a segment's pixels.

    Returns (depths, grazing flags); grazing rays (|n.ray| < 1e-3) get
    depth nan and must keep their original value.
    """
    rays = ray_map(grid)[rows, cols]
    ndotb = rays @ normal
    grazing = np.abs(ndotb) < GRAZING_COS
    with np.errstate(divide="ignore", invalid="ignore"):
        z = -distance / ndotb
    z = np.where(grazing, np.nan, z)
    return z, grazing


def fit_all(
    segmentation: LabelMap,
    depth: FloatMap,
    normals: Vec3Map,
    cfg: RansacConfig = None,
) -> tuple[list[PlaneSegment], FloatMap]:
    """Fit a plane per segment and return the plane-adjusted depth map.

    Label-0 pixels keep the raw depth. A segment whose fit fails or whose
    inlier fraction falls below the config gate keeps its raw depth too
    (logged, never fatal). Deterministic given the RANSAC seed: segment k
    uses seed + k.
    """
    cfg = cfg or RansacConfig()
    adjusted = depth.copy()
    segments = []
    rays = ray_map(depth.grid)
    for label in range(1, segmentation.n_segments + 1):
        rows, cols = segmentation.segment_pixels(label)
        try:
            n = median_normal(rows, cols, normals)
            # Camera-facing convention for the segment's median ray.
            med_ray = np.median(rays[rows, cols], axis=0)
            if n @ med_ray > 0:
                n = -n
            seg_cfg = RansacConfig(
                cfg.iterations, cfg.inlier_tol, cfg.seed + label, cfg.min_inlier_fraction
            )
            d, inliers = ransac_distance(rows, cols, depth, n, seg_cfg)
        except PlaneFitError as exc:
            logger.warning("segment %d: fit failed (%s); keeping raw depth", label, exc)
            segments.append(
                PlaneSegment(label, rows, cols, np.zeros(3), 0.0,
                             np.zeros(rows.size, bool), accepted=False)
            )
            continue
        seg = PlaneSegment(label, rows, cols, n, d, inliers)
        frac = seg.n_inliers / max(seg.n_pixels, 1)
        if frac < cfg.min_inlier_fraction:
            logger.warning(
                "segment %d: inlier fraction %.2f below gate %.2f; keeping raw depth",
                label, frac, cfg.min_inlier_fraction,
            )
            seg.accepted = False
            segments.append(seg)
            continue
        z, grazing = project_to_plane(rows, cols, n, d, depth.grid)
        keep = ~grazing & depth.mask[rows, cols] & (z > 0)
        adjusted.values[rows[keep], cols[keep]] = z[keep]
        segments.append(seg)
    return segments, adjusted
