"""Depth and surface-normal evaluation metrics.

Depth metrics follow the standard monocular-depth set (AbsRel, SqRel,
linear and log RMS, delta thresholds at 1.25^k) after median scaling.
Delta thresholds use a strict inequality; the median of an even-count
sample is its lower-middle element. Normal metrics are per-pixel angular
error statistics.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .sphere import FloatMap, Vec3Map


class MetricsError(ValueError):
    """Raised on invalid metric inputs."""


NORMAL_ANGLE_THRESHOLDS_DEG = (7.5, 15.0, 30.0, 45.0)


@dataclass
class DepthMetrics:
    abs_rel: float
    sq_rel: float
    rms_lin: float
    rms_log: float
    delta1: float
    delta2: float
    delta3: float

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class NormalMetrics:
    mean_angle_deg: float
    frac_under: dict  # {threshold_deg: fraction}

    def as_dict(self) -> dict:
        return {
            "mean_angle_deg": self.mean_angle_deg,
            "frac_under": {str(k): v for k, v in self.frac_under.items()},
        }


def lower_median(x: np.ndarray) -> float:
    """Lower-middle element: sorted[(n-1)//2]."""
    x = np.sort(np.asarray(x).ravel())
    if x.size == 0:
        raise MetricsError("median of empty sample")
    return float(x[(x.size - 1) // 2])


def median_scale(pred: FloatMap, gt: FloatMap, mask: np.ndarray = None) -> FloatMap:
    """Rescale pred by median(gt)/median(pred) over the valid mask."""
    m = pred.mask & gt.mask
    if mask is not None:
        m = m & mask
    if not np.any(m):
        raise MetricsError("empty mask for median scaling")
    mp = lower_median(pred.values[m])
    mg = lower_median(gt.values[m])
    if mp <= 0 or mg <= 0:
        raise MetricsError("median scaling requires positive medians")
    return FloatMap(pred.grid, pred.values * (mg / mp), pred.mask.copy())


def depth_cap_from_stats(depths: np.ndarray, n_std: float = 4.375) -> float:
    """Evaluation depth cap: mean + n_std standard deviations of the sample."""
    depths = np.asarray(depths, dtype=np.float64)
    if depths.size == 0:
        raise MetricsError("no depths to derive cap from")
    return float(depths.mean() + n_std * depths.std())


def valid_mask(gt: FloatMap, depth_cap: float) -> np.ndarray:
    """Pixels with 0 < gt <= depth_cap, intersected with input validity."""
    if depth_cap <= 0:
        raise MetricsError("depth cap must be positive")
    return gt.mask & (gt.values > 0) & (gt.values <= depth_cap)


def depth_metrics(pred: FloatMap, gt: FloatMap, mask: np.ndarray = None) -> DepthMetrics:
    """Standard depth metric set over the mask; pred should be pre-scaled."""
    m = pred.mask & gt.mask
    if mask is not None:
        m = m & mask
    if not np.any(m):
        raise MetricsError("empty mask")
    p = pred.values[m]
    g = gt.values[m]
    if np.any(p <= 0):
        raise MetricsError("nonpositive prediction on mask (log undefined)")
    if np.any(g <= 0):
        raise MetricsError("nonpositive ground truth on mask")
    diff = p - g
    ratio = np.maximum(p / g, g / p)
    return DepthMetrics(
        abs_rel=float(np.mean(np.abs(diff) / g)),
        sq_rel=float(np.mean(diff**2 / g)),
        rms_lin=float(np.sqrt(np.mean(diff**2))),
        rms_log=float(np.sqrt(np.mean((np.log(p) - np.log(g)) ** 2))),
        delta1=float(np.mean(ratio < 1.25)),
        delta2=float(np.mean(ratio < 1.25**2)),
        delta3=float(np.mean(ratio < 1.25**3)),
    )


def normal_metrics(pred: Vec3Map, gt: Vec3Map, mask: np.ndarray = None) -> NormalMetrics:
    """Angular error statistics between unit normal maps."""
    m = pred.mask & gt.mask
    if mask is not None:
        m = m & mask
    if not np.any(m):
        raise MetricsError("empty mask")
    p = pred.values[m]
    g = gt.values[m]
    pn = np.linalg.norm(p, axis=-1)
    gn = np.linalg.norm(g, axis=-1)
    if np.any(pn < 1e-12) or np.any(gn < 1e-12):
        raise MetricsError("zero-length normal on mask")
    cos = np.sum(p * g, axis=-1) / (pn * gn)
    ang = np.degrees(np.arccos(np.clip(cos, -1.0, 1.0)))
    return NormalMetrics(
        mean_angle_deg=float(ang.mean()),
        frac_under={t: float(np.mean(ang < t)) for t in NORMAL_ANGLE_THRESHOLDS_DEG},
    )
