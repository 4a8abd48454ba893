"""Plane segmentation: Otsu threshold on the boundary map, then connected
components with longitude wrap.

The segmentation is parameter-free in the thresholding sense: the only
knobs are the histogram bin count and the minimum component size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sphere import EquirectGrid, FloatMap


class SegmentationError(ValueError):
    """Raised when the boundary map cannot be segmented."""


DEFAULT_BINS = 256
DEFAULT_MIN_SIZE = 100


@dataclass
class LabelMap:
    """Per-pixel segment labels: 0 = boundary/unassigned, 1..K = segments."""

    grid: EquirectGrid
    labels: np.ndarray  # (H, W) int
    n_segments: int

    def segment_pixels(self, label: int) -> tuple[np.ndarray, np.ndarray]:
        """(rows, cols) of a segment's pixels, raster order."""
        return np.nonzero(self.labels == label)


def otsu_threshold(boundary: FloatMap, bins: int = DEFAULT_BINS) -> float:
    """Threshold maximizing between-class variance over a linear histogram.

    The histogram spans [min, max] of the valid values; ties break toward
    the lower bin; the returned value is the chosen bin's upper edge.
    """
    vals = boundary.values[boundary.mask]
    if vals.size == 0:
        raise SegmentationError("no valid pixels")
    lo, hi = float(vals.min()), float(vals.max())
    if lo == hi:
        raise SegmentationError("constant boundary map: no separation possible")
    hist, edges = np.histogram(vals, bins=bins, range=(lo, hi))
    p = hist.astype(np.float64) / vals.size
    centers = (edges[:-1] + edges[1:]) / 2

    w0 = np.cumsum(p)
    mu = np.cumsum(p * centers)
    mu_t = mu[-1]
    # Between-class variance for a cut after bin k (classes [0..k], [k+1..]).
    w0c = w0[:-1]
    muc = mu[:-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        sigma_b = (mu_t * w0c - muc) ** 2 / (w0c * (1 - w0c))
    sigma_b[np.isnan(sigma_b)] = -np.inf
    k = int(np.argmax(sigma_b))  # argmax takes the first (lower) maximizer
    return float(edges[k + 1])


def connected_components(
    planar_mask: np.ndarray,
    wrap: bool = True,
    min_size: int = DEFAULT_MIN_SIZE,
) -> LabelMap:
    """Label 4-connected true regions; columns 0 and W-1 are adjacent when
    wrap is on. Labels are assigned in first-visited raster order; regions
    smaller than min_size are relabeled 0.
    """
    planar_mask = np.asarray(planar_mask, dtype=bool)
    h, w = planar_mask.shape
    grid = EquirectGrid(w, h)
    labels = np.zeros((h, w), dtype=np.int32)
    next_label = 0
    flat = planar_mask.ravel()
    lab_flat = labels.ravel()
    for start in np.flatnonzero(flat):
        if lab_flat[start] != 0:
            continue
        next_label += 1
        stack = [start]
        lab_flat[start] = next_label
        while stack:
            idx = stack.pop()
            r, c = divmod(idx, w)
            if r > 0:
                n = idx - w
                if flat[n] and lab_flat[n] == 0:
                    lab_flat[n] = next_label
                    stack.append(n)
            if r < h - 1:
                n = idx + w
                if flat[n] and lab_flat[n] == 0:
                    lab_flat[n] = next_label
                    stack.append(n)
            if c > 0 or wrap:
                n = idx - 1 if c > 0 else idx + w - 1
                if flat[n] and lab_flat[n] == 0:
                    lab_flat[n] = next_label
                    stack.append(n)
            if c < w - 1 or wrap:
                n = idx + 1 if c < w - 1 else idx - w + 1
                if flat[n] and lab_flat[n] == 0:
                    lab_flat[n] = next_label
                    stack.append(n)

    # Drop small components, then compact labels to 1..K preserving the
    # raster order of each surviving component's first pixel.
    counts = np.bincount(labels.ravel(), minlength=next_label + 1)
    keep = counts >= min_size
    keep[0] = False
    remap = np.zeros(next_label + 1, dtype=np.int32)
    remap[keep] = np.arange(1, int(keep.sum()) + 1)
    labels = remap[labels]
    return LabelMap(grid, labels, int(keep.sum()))


def segment_planes(
    boundary: FloatMap,
    bins: int = DEFAULT_BINS,
    min_size: int = DEFAULT_MIN_SIZE,
) -> LabelMap:
    """Boundary map -> plane segment labels.

    Pixels below the Otsu threshold are planar; components are found with
    longitude wrap. A constant (boundary-free) map degenerates to a single
    whole-sphere segment rather than an error.
    """
    try:
        t = otsu_threshold(boundary, bins=bins)
    except SegmentationError:
        return connected_components(boundary.mask.copy(), wrap=True, min_size=min_size)
    planar = boundary.mask & (boundary.values < t)
    return connected_components(planar, wrap=True, min_size=min_size)
