"""Figure rendering for CLI reports.

Every report-producing subcommand drops a matplotlib figure next to its
delimited/JSON output so results can be eyeballed without extra tooling.
Uses the Agg backend; nothing here opens a window.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .segmentation import LabelMap
from .sphere import FloatMap, Vec3Map
from .synth import PALETTE


def _masked(values, mask):
    return np.ma.masked_array(values, mask=~mask)


def save_depth_figure(path, depth: FloatMap, title: str = "depth (m)") -> None:
    fig, ax = plt.subplots(figsize=(8, 4))
    im = ax.imshow(_masked(depth.values, depth.mask), cmap="turbo")
    ax.set_title(title)
    ax.axis("off")
    fig.colorbar(im, ax=ax, shrink=0.8)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)


def save_scalar_figure(path, m: FloatMap, title: str, cmap: str = "magma") -> None:
    fig, ax = plt.subplots(figsize=(8, 4))
    im = ax.imshow(_masked(m.values, m.mask), cmap=cmap)
    ax.set_title(title)
    ax.axis("off")
    fig.colorbar(im, ax=ax, shrink=0.8)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)


def save_normal_figure(path, normals: Vec3Map, title: str = "normals") -> None:
    rgb = (normals.values + 1.0) / 2.0
    rgb = np.where(normals.mask[..., None], rgb, 0.0)
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.imshow(np.clip(rgb, 0, 1))
    ax.set_title(title)
    ax.axis("off")
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)


def label_colors(labels: np.ndarray) -> np.ndarray:
    """Fixed-palette colorization; label 0 renders black."""
    out = PALETTE[(labels - 1) % len(PALETTE)]
    out[labels == 0] = 0.0
    return out


def save_label_figure(path, seg: LabelMap, title: str = "plane segments") -> None:
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.imshow(label_colors(seg.labels))
    ax.set_title(f"{title} (K={seg.n_segments})")
    ax.axis("off")
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)


def save_metrics_figure(path, pred: FloatMap, gt: FloatMap, mask: np.ndarray) -> None:
    """Side-by-side prediction / ground truth / absolute error panel."""
    err = np.abs(pred.values - gt.values)
    fig, axes = plt.subplots(1, 3, figsize=(15, 3.2))
    for ax, (vals, name, cmap) in zip(
        axes,
        [(pred.values, "prediction", "turbo"), (gt.values, "ground truth", "turbo"),
         (err, "abs error", "magma")],
    ):
        im = ax.imshow(_masked(vals, mask), cmap=cmap)
        ax.set_title(name)
        ax.axis("off")
        fig.colorbar(im, ax=ax, shrink=0.8)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
