"""Central finite-difference validation of the loss-kernel gradients.

Samples random prediction/target maps, excludes the non-differentiable
loci (BerHu knee, the max-error pixel that pins the threshold, the |x|
kink at zero error, zero-length normals), and compares every analytic
gradient entry against a two-sided difference quotient.
"""

from __future__ import annotations

import numpy as np

from . import losses
from .sphere import EquirectGrid, FloatMap, Vec3Map, ray_map

FD_STEP = 1e-5
# Keep sample points this far from any kink so the FD stencil stays on
# one smooth branch.
KINK_MARGIN = 1e-3


def _rel_err(fd, an):
    scale = max(abs(fd), abs(an))
    if scale < 1e-10:
        return 0.0
    return abs(fd - an) / scale


def _sample_indices(rng, smooth, shape, n):
    flat = np.flatnonzero(smooth)
    if flat.size == 0:
        return []
    chosen = rng.choice(flat, size=min(n, flat.size), replace=False)
    return [np.unravel_index(i, shape) for i in chosen]


def _fd_scalar_term(f, x0, grad, smooth, rng, n):
    worst = 0.0
    count = 0
    for idx in _sample_indices(rng, smooth, x0.shape, n):
        xp = x0.copy()
        xp[idx] += FD_STEP
        xm = x0.copy()
        xm[idx] -= FD_STEP
        fd = (f(xp) - f(xm)) / (2 * FD_STEP)
        worst = max(worst, _rel_err(fd, grad[idx]))
        count += 1
    return worst, count


def _berhu_smooth(err, mask):
    t = losses.berhu_threshold(err, mask)
    max_err = np.abs(err[mask]).max()
    return (
        mask
        & (np.abs(np.abs(err) - t) > KINK_MARGIN)
        & (np.abs(err) > KINK_MARGIN)
        & (np.abs(err) < max_err - KINK_MARGIN)
    )


def validate_gradients(
    seed: int = 0, samples: int = 1000, width: int = 64, height: int = 32
) -> list[dict]:
    """Run the FD suite; returns one report dict per loss term."""
    rng = np.random.default_rng(seed)
    grid = EquirectGrid(width, height)
    shape = grid.shape

    def fmap(lo, hi, p=0.9):
        return FloatMap(grid, rng.uniform(lo, hi, shape), rng.random(shape) < p)

    z = fmap(0.5, 5.0)
    z_star = fmap(0.5, 5.0)
    c_star = FloatMap(grid, rng.uniform(0.0, 2.0, shape))
    n_raw = Vec3Map(grid, rng.normal(size=shape + (3,)), rng.random(shape) < 0.9)
    ns = rng.normal(size=shape + (3,))
    ns /= np.linalg.norm(ns, axis=-1, keepdims=True)
    n_star = Vec3Map(grid, ns)
    c = fmap(0.0, 1.0)
    c_star2 = FloatMap(grid, rng.uniform(0.0, 1.0, shape))

    reports = []

    # Depth term.
    mask = z.mask & z_star.mask
    err = z.values - z_star.values
    smooth = _berhu_smooth(err, mask)
    _, grad = losses.loss_depth(z, z_star, c_star)
    worst, count = _fd_scalar_term(
        lambda x: losses.loss_depth(FloatMap(grid, x, z.mask), z_star, c_star)[0],
        z.values, grad, smooth, rng, samples,
    )
    reports.append({"term": "depth", "max_rel_err": worst, "samples": count})

    # Normal term (gradient w.r.t. raw vector components).
    nmask = n_raw.mask
    _, grad = losses.loss_normal(n_raw, n_star, c_star)
    smooth3 = np.repeat(nmask[:, :, None], 3, axis=2)
    worst, count = _fd_scalar_term(
        lambda x: losses.loss_normal(Vec3Map(grid, x, n_raw.mask), n_star, c_star)[0],
        n_raw.values, grad, smooth3, rng, samples,
    )
    reports.append({"term": "normal", "max_rel_err": worst, "samples": count})

    # Curvature term: also keep away from the |c| kink at zero.
    cmask = c.mask & c_star2.mask
    cerr = c.values - c_star2.values
    smooth = _berhu_smooth(cerr, cmask) & (c.values > KINK_MARGIN)
    _, grad = losses.loss_curvature(c, c_star2)
    worst, count = _fd_scalar_term(
        lambda x: losses.loss_curvature(FloatMap(grid, x, c.mask), c_star2)[0],
        c.values, grad, smooth, rng, samples,
    )
    reports.append({"term": "curvature", "max_rel_err": worst, "samples": count})

    # Plane-distance term, both gradients.
    pmask = z.mask & n_raw.mask & z_star.mask
    rays = ray_map(grid)
    nunit = n_raw.values / np.linalg.norm(n_raw.values, axis=-1, keepdims=True)
    r = z.values * np.einsum("ijk,ijk->ij", nunit, rays) - z_star.values * np.einsum(
        "ijk,ijk->ij", n_star.values, rays
    )
    smooth = _berhu_smooth(r, pmask)
    _, grad_z, grad_n = losses.loss_plane(z, n_raw, z_star, n_star, c_star)
    worst, count = _fd_scalar_term(
        lambda x: losses.loss_plane(FloatMap(grid, x, z.mask), n_raw, z_star, n_star, c_star)[0],
        z.values, grad_z, smooth, rng, samples,
    )
    reports.append({"term": "plane_depth", "max_rel_err": worst, "samples": count})
    worst, count = _fd_scalar_term(
        lambda x: losses.loss_plane(z, Vec3Map(grid, x, n_raw.mask), z_star, n_star, c_star)[0],
        n_raw.values, grad_n, np.repeat(smooth[:, :, None], 3, axis=2), rng, samples,
    )
    reports.append({"term": "plane_normal", "max_rel_err": worst, "samples": count})

    # Baseline (scale-1 gradient; the L2 terms are smooth everywhere).
    small = EquirectGrid(width // 2, height // 2)
    z0 = FloatMap(small, rng.uniform(0.5, 5.0, small.shape), rng.random(small.shape) < 0.9)
    z0s = FloatMap(small, rng.uniform(0.5, 5.0, small.shape))
    _, grads = losses.loss_baseline([z0, z], [z0s, z_star])
    worst, count = _fd_scalar_term(
        lambda x: losses.loss_baseline([z0, FloatMap(grid, x, z.mask)], [z0s, z_star])[0],
        z.values, grads[1], z.mask, rng, samples,
    )
    reports.append({"term": "baseline", "max_rel_err": worst, "samples": count})
    return reports
