"""Plane-aware multi-task loss kernel with analytic gradients.

Standalone differentiable functions: each loss term returns its value and
the gradient with respect to the predictions, suitable for embedding in
any trainer and for finite-difference validation. The BerHu threshold T
is set per call to 20% of the max absolute error over the valid mask and
is treated as a constant during differentiation. The plane-aware weight
exp(-||c*||) uses ground-truth curvature only, so no gradient flows
through it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .sphere import EquirectGrid, FloatMap, Vec3Map, ray_map


class LossError(ValueError):
    """Raised on invalid loss inputs (empty mask, bad threshold, ...)."""


@dataclass
class LossConfig:
    """Hyper-parameters of the two-scale total loss.

    Index 0 is the 2x-downsampled scale, index 1 full resolution. The
    curvature weight at scale 0 defaults to zero.
    """

    alpha: tuple = (0.3, 0.6)  # depth
    beta: tuple = (0.1, 0.4)  # normals
    gamma: tuple = (0.0, 0.3)  # curvature / boundary
    zeta: tuple = (0.3, 0.6)  # plane distance
    eta: float = 0.1  # L1 sparsity coefficient inside the curvature term
    berhu_fraction: float = 0.2

    def __post_init__(self):
        for w in (*self.alpha, *self.beta, *self.gamma, *self.zeta, self.eta):
            if w < 0:
                raise LossError("loss weights must be non-negative")


@dataclass
class ScalePredictions:
    """One scale's predictions: depth, raw normals, boundary magnitude."""

    depth: FloatMap
    normals: Vec3Map
    boundary: FloatMap


@dataclass
class ScaleTargets:
    """One scale's ground truth; curvature_norm is ||c*||, >= 0."""

    depth: FloatMap
    normals: Vec3Map
    boundary: FloatMap


@dataclass
class LossResult:
    """Total loss, per-term values, and gradients per prediction tensor."""

    total: float
    terms: dict  # {(name, scale): value}
    grad_depth: list  # per-scale (H, W) arrays
    grad_normals: list  # per-scale (H, W, 3) arrays
    grad_boundary: list  # per-scale (H, W) arrays


def berhu(x, t: float):
    """Reverse Huber: |x| below the knee t, (x^2 + t^2)/(2t) above.

    Returns (value, dvalue/dx); both branches meet at |x| = t with value t.
    """
    if t <= 0:
        raise LossError("BerHu threshold must be positive")
    x = np.asarray(x, dtype=np.float64)
    ax = np.abs(x)
    small = ax <= t
    value = np.where(small, ax, (x * x + t * t) / (2 * t))
    grad = np.where(small, np.sign(x), x / t)
    return value, grad


def berhu_threshold(errors: np.ndarray, mask: np.ndarray, fraction: float = 0.2) -> float:
    """T = fraction * max |error| over the valid mask, floored at eps."""
    if not np.any(mask):
        raise LossError("empty mask: no valid pixels for threshold")
    m = float(np.max(np.abs(errors[mask])))
    return max(fraction * m, np.finfo(np.float64).tiny)


def plane_weight(x, c_star_norm):
    """Plane-aware weight: x * exp(-||c*||); full weight on planar pixels."""
    c = np.asarray(c_star_norm, dtype=np.float64)
    if np.any(c < 0):
        raise LossError("ground-truth curvature norm must be >= 0")
    return np.asarray(x, dtype=np.float64) * np.exp(-c)


def _check_mask(mask):
    count = int(np.count_nonzero(mask))
    if count == 0:
        raise LossError("empty mask")
    return count


def loss_depth(z: FloatMap, z_star: FloatMap, c_star: FloatMap, config: LossConfig = None):
    """Plane-weighted BerHu on depth errors; returns (value, d/dz)."""
    config = config or LossConfig()
    mask = z.mask & z_star.mask & c_star.mask
    count = _check_mask(mask)
    err = z.values - z_star.values
    t = berhu_threshold(err, mask, config.berhu_fraction)
    b, db = berhu(err, t)
    w = np.exp(-c_star.values)
    value = float(np.sum((w * b)[mask]) / count)
    grad = np.where(mask, w * db / count, 0.0)
    return value, grad


def _normalize_with_jacobian(n_raw: np.ndarray, mask: np.ndarray):
    """Unit normals and the pullback of a cotangent through normalization.

    Returns (n_unit, pullback) where pullback(g) maps a gradient w.r.t.
    the unit normal to a gradient w.r.t. the raw vector:
    (I - n n^T) g / ||raw||.
    """
    norm = np.linalg.norm(n_raw, axis=-1)
    if np.any(norm[mask] < 1e-300):
        raise LossError("zero-length raw normal at a valid pixel")
    safe = np.where(mask, norm, 1.0)
    n = n_raw / safe[..., None]

    def pullback(g):
        return (g - n * np.sum(g * n, axis=-1, keepdims=True)) / safe[..., None]

    return n, pullback


def loss_normal(n_raw: Vec3Map, n_star: Vec3Map, c_star: FloatMap, config: LossConfig = None):
    """Plane-weighted negative cosine between predicted and true normals.

    Predictions are normalized internally; the returned gradient is with
    respect to the raw (unnormalized) vectors.
    """
    mask = n_raw.mask & n_star.mask & c_star.mask
    count = _check_mask(mask)
    n, pullback = _normalize_with_jacobian(n_raw.values, mask)
    cos = np.sum(n * n_star.values, axis=-1)
    w = np.exp(-c_star.values)
    value = float(np.sum((w * -cos)[mask]) / count)
    g_unit = -n_star.values * (w / count)[..., None]
    grad = np.where(mask[..., None], pullback(g_unit), 0.0)
    return value, grad


def loss_curvature(
    c: FloatMap, c_star: FloatMap, config: LossConfig = None
):
    """Plane-weighted BerHu on boundary-magnitude error plus L1 sparsity.

    The prediction is the scalar boundary magnitude ||c||; its L1 norm is
    |c|. The sparsity term sits inside the plane weight, so it is also
    curvature-down-weighted.
    """
    config = config or LossConfig()
    mask = c.mask & c_star.mask
    count = _check_mask(mask)
    err = c.values - c_star.values
    t = berhu_threshold(err, mask, config.berhu_fraction)
    b, db = berhu(err, t)
    inner = b + config.eta * np.abs(c.values)
    w = np.exp(-c_star.values)
    value = float(np.sum((w * inner)[mask]) / count)
    grad = np.where(mask, w * (db + config.eta * np.sign(c.values)) / count, 0.0)
    return value, grad


def loss_plane(
    z: FloatMap,
    n_raw: Vec3Map,
    z_star: FloatMap,
    n_star: Vec3Map,
    c_star: FloatMap,
    config: LossConfig = None,
):
    """Plane-distance consistency: BerHu on n.X(z) - n*.X(z*).

    X(z) = z * ray, so the residual is z*(n.ray) - z**(n*.ray). Returns
    (value, d/dz, d/dn_raw).
    """
    config = config or LossConfig()
    mask = z.mask & n_raw.mask & z_star.mask & n_star.mask & c_star.mask
    count = _check_mask(mask)
    rays = ray_map(z.grid)
    n, pullback = _normalize_with_jacobian(n_raw.values, mask)
    n_dot_b = np.sum(n * rays, axis=-1)
    nstar_dot_b = np.sum(n_star.values * rays, axis=-1)
    r = z.values * n_dot_b - z_star.values * nstar_dot_b
    t = berhu_threshold(r, mask, config.berhu_fraction)
    b, db = berhu(r, t)
    w = np.exp(-c_star.values)
    value = float(np.sum((w * b)[mask]) / count)
    coeff = w * db / count
    grad_z = np.where(mask, coeff * n_dot_b, 0.0)
    g_unit = (coeff * z.values)[..., None] * rays
    grad_n = np.where(mask[..., None], pullback(g_unit), 0.0)
    return value, grad_z, grad_n


def downsample_targets(t: ScaleTargets) -> ScaleTargets:
    """Build the half-resolution targets by 2x2 area averaging.

    Depth and boundary average over valid pixels (mask-renormalized);
    normals average then renormalize. A low-res pixel is valid if any of
    its four sources is.
    """
    grid = t.depth.grid
    if grid.height % 2 != 0:
        raise LossError("grid height must be even for 2x downsampling")
    small = EquirectGrid(grid.width // 2, grid.height // 2)

    def blocks(a):
        if a.ndim == 2:
            return a.reshape(small.height, 2, small.width, 2).transpose(0, 2, 1, 3).reshape(
                small.height, small.width, 4
            )
        return a.reshape(small.height, 2, small.width, 2, 3).transpose(0, 2, 1, 3, 4).reshape(
            small.height, small.width, 4, 3
        )

    mblk = blocks(t.depth.mask.astype(np.float64))
    counts = mblk.sum(axis=-1)
    valid = counts > 0
    safe = np.maximum(counts, 1.0)

    def avg(a):
        return (blocks(a) * mblk).sum(axis=-1) / safe

    depth = FloatMap(small, np.where(valid, avg(t.depth.values), 0.0), valid)

    nmblk = blocks(t.normals.mask.astype(np.float64))
    ncounts = nmblk.sum(axis=-1)
    nvalid = ncounts > 0
    nsum = (blocks(t.normals.values) * nmblk[..., None]).sum(axis=-2)
    norm = np.linalg.norm(nsum, axis=-1)
    nvalid = nvalid & (norm > 1e-12)
    nvals = np.where(nvalid[..., None], nsum / np.maximum(norm, 1e-300)[..., None], 0.0)
    normals = Vec3Map(small, nvals, nvalid)

    bmblk = blocks(t.boundary.mask.astype(np.float64))
    bcounts = bmblk.sum(axis=-1)
    bvalid = bcounts > 0
    bvals = (blocks(t.boundary.values) * bmblk).sum(axis=-1) / np.maximum(bcounts, 1.0)
    boundary = FloatMap(small, np.where(bvalid, bvals, 0.0), bvalid)
    return ScaleTargets(depth, normals, boundary)


def loss_total(
    preds: list[ScalePredictions], targets: list[ScaleTargets], config: LossConfig = None
) -> LossResult:
    """Two-scale weighted sum of depth, normal, curvature, and plane terms.

    preds/targets are [scale0, scale1] with scale 0 at half resolution.
    A zero weight skips its term entirely (no empty-mask error from an
    unused branch).
    """
    config = config or LossConfig()
    if len(preds) != 2 or len(targets) != 2:
        raise LossError("expected predictions and targets at exactly two scales")
    total = 0.0
    terms = {}
    grad_depth, grad_normals, grad_boundary = [], [], []
    for s in (0, 1):
        p, t = preds[s], targets[s]
        gz = np.zeros(p.depth.grid.shape)
        gn = np.zeros(p.depth.grid.shape + (3,))
        gc = np.zeros(p.depth.grid.shape)
        if config.alpha[s] > 0:
            v, g = loss_depth(p.depth, t.depth, t.boundary, config)
            terms[("depth", s)] = v
            total += config.alpha[s] * v
            gz += config.alpha[s] * g
        if config.beta[s] > 0:
            v, g = loss_normal(p.normals, t.normals, t.boundary, config)
            terms[("normal", s)] = v
            total += config.beta[s] * v
            gn += config.beta[s] * g
        if config.gamma[s] > 0:
            v, g = loss_curvature(p.boundary, t.boundary, config)
            terms[("curvature", s)] = v
            total += config.gamma[s] * v
            gc += config.gamma[s] * g
        if config.zeta[s] > 0:
            v, g_z, g_n = loss_plane(p.depth, p.normals, t.depth, t.normals, t.boundary, config)
            terms[("plane", s)] = v
            total += config.zeta[s] * v
            gz += config.zeta[s] * g_z
            gn += config.zeta[s] * g_n
        grad_depth.append(gz)
        grad_normals.append(gn)
        grad_boundary.append(gc)
    return LossResult(float(total), terms, grad_depth, grad_normals, grad_boundary)


def _forward_gradient(z: np.ndarray):
    """Forward differences with longitude wrap; last row's vertical diff is 0."""
    gx = np.roll(z, -1, axis=1) - z
    gy = np.zeros_like(z)
    gy[:-1] = z[1:] - z[:-1]
    return gx, gy


def loss_baseline(
    z_scales: list[FloatMap], z_star_scales: list[FloatMap], config: LossConfig = None
):
    """Two-scale L2 depth loss with an L2 penalty on the depth gradient.

    Globally normalized by the total valid-pixel count across scales.
    Returns (value, [d/dz per scale]). Gradient-penalty terms count only
    where both pixels of a difference are valid.
    """
    config = config or LossConfig()
    if len(z_scales) != len(z_star_scales):
        raise LossError("scale count mismatch")
    masks = [z.mask & zs.mask for z, zs in zip(z_scales, z_star_scales)]
    total_count = sum(int(np.count_nonzero(m)) for m in masks)
    if total_count == 0:
        raise LossError("empty mask")
    value = 0.0
    grads = []
    for s, (z, zs, mask) in enumerate(zip(z_scales, z_star_scales, masks)):
        a, b = config.alpha[s], config.beta[s]
        err = np.where(mask, z.values - zs.values, 0.0)
        value += a * np.sum(err * err)
        grad = 2 * a * err

        gx, gy = _forward_gradient(z.values)
        mx = mask & np.roll(mask, -1, axis=1)
        my = np.zeros_like(mask)
        my[:-1] = mask[:-1] & mask[1:]
        gx = np.where(mx, gx, 0.0)
        gy = np.where(my, gy, 0.0)
        value += b * (np.sum(gx * gx) + np.sum(gy * gy))
        # Adjoint of the forward differences.
        grad += 2 * b * (np.roll(gx, 1, axis=1) - gx)
        gy_shift = np.zeros_like(gy)
        gy_shift[1:] = gy[:-1]
        grad += 2 * b * (gy_shift - gy)
        grads.append(grad / total_count)
    return float(value / total_count), grads
