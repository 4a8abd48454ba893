"""Command-line interface.

One binary with subcommands: synth, resample, derive-gt, curvature,
loss-check, eval, segment, popup. Options take precedence over the JSON
config file, which takes precedence over built-in defaults. Failures emit
a machine-readable JSON object on stderr and a nonzero exit code.
"""

from __future__ import annotations

import csv
import functools
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import gradcheck, mapio, metrics as metrics_mod, viz
from .curvature import boundary_map, curvature_map
from .pipeline import derive_gt, popup
from .planes import RansacConfig
from .segmentation import DEFAULT_BINS, DEFAULT_MIN_SIZE, LabelMap, segment_planes
from .sphere import CubeMap, EquirectGrid, FloatMap, Vec3Map
from .synth import SynthScene, make_room, render_gt

FACE_ORDER = ("posx", "negx", "posy", "negy", "posz", "negz")


def fail_json(exc: BaseException) -> None:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    click.echo(json.dumps(payload), err=True)
    sys.exit(1)


def json_errors(f):
    @functools.wraps(f)
    def wrapper(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except click.ClickException:
            raise
        except Exception as exc:  # noqa: BLE001 - CLI boundary
            fail_json(exc)

    return wrapper


def load_config(path):
    if path is None:
        return {}
    with open(path) as f:
        return json.load(f)


def resolve(flag_value, config: dict, key: str, default):
    """Flag > config file > default."""
    if flag_value is not None:
        return flag_value
    if key in config:
        return config[key]
    return default


def common_options(f):
    f = click.option("--width", type=int, default=None, help="Equirect width (default 512).")(f)
    f = click.option("--height", type=int, default=None, help="Equirect height (default 256).")(f)
    f = click.option("--ico-level", type=int, default=None, help="Icosphere subdivision level (default 7).")(f)
    f = click.option("--seed", type=int, default=None, help="Deterministic RNG seed (default 0).")(f)
    f = click.option("--out-dir", type=click.Path(), default=".", show_default=True, help="Output directory.")(f)
    f = click.option("--config", "config_path", type=click.Path(exists=True), default=None, help="JSON config file.")(f)
    return f


def make_grid(width, height, config):
    w = resolve(width, config, "width", 512)
    h = resolve(height, config, "height", 256)
    return EquirectGrid(w, h)


def ransac_from(config, seed):
    return RansacConfig(
        iterations=config.get("ransac_iterations", 100),
        inlier_tol=config.get("ransac_inlier_tol", 0.05),
        seed=seed,
        min_inlier_fraction=config.get("min_inlier_fraction", 0.5),
    )


def load_scalar(path, with_mask=None) -> FloatMap:
    vals = mapio.read_pfm(path)
    if vals.ndim != 2:
        raise mapio.MapIOError(f"{path}: expected a 1-channel PFM")
    h, w = vals.shape
    mask = mapio.read_mask_png(with_mask) if with_mask else None
    return FloatMap(EquirectGrid(w, h), vals.astype(np.float64), mask)


def load_vec3(path, with_mask=None) -> Vec3Map:
    vals = mapio.read_pfm(path)
    if vals.ndim != 3:
        raise mapio.MapIOError(f"{path}: expected a 3-channel PFM")
    h, w = vals.shape[:2]
    mask = mapio.read_mask_png(with_mask) if with_mask else None
    return Vec3Map(EquirectGrid(w, h), vals.astype(np.float64), mask)


def load_cube(paths) -> CubeMap:
    faces = []
    for p in paths:
        if str(p).endswith(".png"):
            faces.append(mapio.read_rgb_png(p))
        else:
            faces.append(mapio.read_pfm(p).astype(np.float64))
    return CubeMap(faces)


@click.group()
def main():
    """Plane-aware 360 reconstruction toolkit."""


@main.command()
@common_options
@click.option("--scene", "scene_path", type=click.Path(exists=True), default=None,
              help="Scene JSON; defaults to a 4x3x5 m room with one box.")
@json_errors
def synth(width, height, ico_level, seed, out_dir, config_path, scene_path):
    """Render analytic ground-truth maps for a piecewise-planar scene."""
    config = load_config(config_path)
    grid = make_grid(width, height, config)
    if scene_path:
        scene = SynthScene.from_json(scene_path)
    else:
        scene = make_room((4.0, 3.0, 5.0), (0.5, -0.2, 0.3),
                          boxes=[((1.0, 1.5), (0.8, 0.9, 0.7))])
    depth, normals, boundary, labels, rgb = render_gt(scene, grid)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    mapio.write_pfm(out / "depth.pfm", depth.values)
    mapio.write_pfm(out / "normals.pfm", normals.values)
    mapio.write_pfm(out / "boundary.pfm", boundary.values)
    mapio.write_label_png(out / "labels.png", labels.labels)
    mapio.write_rgb_png(out / "rgb.png", np.clip(rgb.values, 0, 1))
    with open(out / "scene.json", "w") as f:
        json.dump(scene.as_dict(), f, indent=2)
    viz.save_depth_figure(out / "depth_fig.png", depth)
    viz.save_normal_figure(out / "normals_fig.png", normals)
    viz.save_label_figure(out / "labels_fig.png", labels)
    click.echo(json.dumps({"planes": len(scene.planes), "out_dir": str(out)}))


@main.command()
@common_options
@click.argument("faces", nargs=6, type=click.Path(exists=True))
@click.option("--interp", type=click.Choice(["bilinear", "nearest"]), default="bilinear",
              show_default=True)
@click.option("--planar-depth", is_flag=True,
              help="Faces store planar Z; convert to ray distance first.")
@click.option("--out", "out_name", default="equirect.pfm", show_default=True)
@json_errors
def resample(width, height, ico_level, seed, out_dir, config_path, faces, interp,
             planar_depth, out_name):
    """Resample a cubemap (posx negx posy negy posz negz) to equirect."""
    from .sphere import equirect_from_cubemap, planar_to_ray_depth

    config = load_config(config_path)
    grid = make_grid(width, height, config)
    cube = load_cube(faces)
    if planar_depth:
        cube = planar_to_ray_depth(cube)
    result = equirect_from_cubemap(cube, grid, interp=interp)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    mapio.write_pfm(out / out_name, result.values)
    click.echo(json.dumps({"out": str(out / out_name), "shape": list(result.values.shape)}))


@main.command("derive-gt")
@common_options
@click.option("--depth-face", "depth_faces", nargs=6, type=click.Path(exists=True),
              required=True, help="Six depth face PFMs (posx negx posy negy posz negz).")
@click.option("--rgb-face", "rgb_faces", nargs=6, type=click.Path(exists=True),
              default=None, help="Six RGB face PNGs.")
@click.option("--planar-depth", is_flag=True,
              help="Depth faces store planar Z; convert to ray distance.")
@json_errors
def derive_gt_cmd(width, height, ico_level, seed, out_dir, config_path, depth_faces,
                  rgb_faces, planar_depth):
    """Derive equirect depth, normal, curvature, and boundary ground truth."""
    config = load_config(config_path)
    grid = make_grid(width, height, config)
    level = resolve(ico_level, config, "ico_level", 7)
    gt = derive_gt(
        load_cube(depth_faces),
        load_cube(rgb_faces) if rgb_faces else None,
        grid,
        ico_level=level,
        depth_is_planar=planar_depth,
    )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    mapio.write_pfm(out / "depth.pfm", gt.depth.values)
    mapio.write_mask_png(out / "depth_mask.png", gt.depth.mask)
    mapio.write_pfm(out / "normals.pfm", gt.normals.values)
    mapio.write_mask_png(out / "normals_mask.png", gt.normals.mask)
    mapio.write_curvature_pfm(out / "curvature.pfm", gt.k1, gt.k2)
    mapio.write_pfm(out / "boundary.pfm", gt.boundary.values)
    if gt.rgb is not None:
        mapio.write_rgb_png(out / "rgb.png", np.clip(gt.rgb.values, 0, 1))
    viz.save_depth_figure(out / "depth_fig.png", gt.depth)
    viz.save_normal_figure(out / "normals_fig.png", gt.normals)
    viz.save_scalar_figure(out / "boundary_fig.png", gt.boundary, "plane boundary ||c||")
    click.echo(json.dumps({"out_dir": str(out)}))


@main.command()
@common_options
@click.argument("normals_path", type=click.Path(exists=True))
@click.option("--mask", "mask_path", type=click.Path(exists=True), default=None)
@click.option("--pixel-steps", is_flag=True,
              help="Difference in raw pixel steps instead of arc length.")
@json_errors
def curvature(width, height, ico_level, seed, out_dir, config_path, normals_path,
              mask_path, pixel_steps):
    """Principal curvature and boundary map from a normal map PFM."""
    normals = load_vec3(normals_path, mask_path)
    curv = curvature_map(normals, use_arc_length=not pixel_steps)
    boundary = boundary_map(curv)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    mapio.write_curvature_pfm(out / "curvature.pfm", curv.k1, curv.k2)
    mapio.write_pfm(out / "boundary.pfm", boundary.values)
    mapio.write_mask_png(out / "boundary_mask.png", boundary.mask)
    viz.save_scalar_figure(out / "boundary_fig.png", boundary, "plane boundary ||c||")
    click.echo(json.dumps({"out_dir": str(out)}))


@main.command("loss-check")
@common_options
@click.option("--samples", type=int, default=1000, show_default=True)
@json_errors
def loss_check(width, height, ico_level, seed, out_dir, config_path, samples):
    """Validate analytic loss gradients against finite differences."""
    config = load_config(config_path)
    reports = gradcheck.validate_gradients(
        seed=resolve(seed, config, "seed", 0), samples=samples
    )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "loss_check.json", "w") as f:
        json.dump(reports, f, indent=2)
    click.echo(json.dumps(reports))
    if any(r["max_rel_err"] > 1e-4 for r in reports):
        fail_json(RuntimeError("gradient check exceeded 1e-4 relative error"))


@main.command("eval")
@common_options
@click.option("--pred", "pred_path", type=click.Path(exists=True), required=True)
@click.option("--gt", "gt_path", type=click.Path(exists=True), required=True)
@click.option("--pred-normals", type=click.Path(exists=True), default=None)
@click.option("--gt-normals", type=click.Path(exists=True), default=None)
@click.option("--mask", "mask_path", type=click.Path(exists=True), default=None)
@click.option("--depth-cap", type=float, default=None,
              help="Validity cap; default mean + 4.375 std of the GT depths.")
@json_errors
def eval_cmd(width, height, ico_level, seed, out_dir, config_path, pred_path, gt_path,
             pred_normals, gt_normals, mask_path, depth_cap):
    """Depth (and optionally normal) metrics with median scaling."""
    gt = load_scalar(gt_path, mask_path)
    pred = load_scalar(pred_path)
    cap = depth_cap if depth_cap is not None else metrics_mod.depth_cap_from_stats(
        gt.values[gt.mask & (gt.values > 0)]
    )
    mask = metrics_mod.valid_mask(gt, cap)
    scaled = metrics_mod.median_scale(pred, gt, mask)
    dm = metrics_mod.depth_metrics(scaled, gt, mask)
    result = {"depth": dm.as_dict(), "depth_cap": cap}
    if pred_normals and gt_normals:
        nm = metrics_mod.normal_metrics(load_vec3(pred_normals), load_vec3(gt_normals), mask)
        result["normals"] = nm.as_dict()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "metrics.json", "w") as f:
        json.dump(result, f, indent=2)
    flat = dict(result["depth"])
    if "normals" in result:
        flat["mean_angle_deg"] = result["normals"]["mean_angle_deg"]
        for k, v in result["normals"]["frac_under"].items():
            flat[f"frac_under_{k}"] = v
    with open(out / "metrics.csv", "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(flat))
        writer.writeheader()
        writer.writerow(flat)
    viz.save_metrics_figure(out / "eval_fig.png", scaled, gt, mask)
    click.echo(json.dumps(result))


@main.command()
@common_options
@click.argument("boundary_path", type=click.Path(exists=True))
@click.option("--mask", "mask_path", type=click.Path(exists=True), default=None)
@json_errors
def segment(width, height, ico_level, seed, out_dir, config_path, boundary_path, mask_path):
    """Otsu + connected components plane segmentation of a boundary map."""
    config = load_config(config_path)
    boundary = load_scalar(boundary_path, mask_path)
    seg = segment_planes(
        boundary,
        bins=config.get("otsu_bins", DEFAULT_BINS),
        min_size=config.get("min_segment_size", DEFAULT_MIN_SIZE),
    )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    mapio.write_label_png(out / "labels.png", seg.labels)
    viz.save_label_figure(out / "labels_fig.png", seg)
    click.echo(json.dumps({"segments": seg.n_segments, "out_dir": str(out)}))


@main.command("popup")
@common_options
@click.option("--depth", "depth_path", type=click.Path(exists=True), required=True)
@click.option("--normals", "normals_path", type=click.Path(exists=True), required=True)
@click.option("--boundary", "boundary_path", type=click.Path(exists=True), required=True)
@click.option("--rgb", "rgb_path", type=click.Path(exists=True), default=None)
@click.option("--mask", "mask_path", type=click.Path(exists=True), default=None)
@json_errors
def popup_cmd(width, height, ico_level, seed, out_dir, config_path, depth_path,
              normals_path, boundary_path, rgb_path, mask_path):
    """Piecewise-planar pop-up model from depth, normal, and boundary maps."""
    config = load_config(config_path)
    depth = load_scalar(depth_path, mask_path)
    normals = load_vec3(normals_path)
    boundary = load_scalar(boundary_path)
    rgb = None
    if rgb_path:
        arr = mapio.read_rgb_png(rgb_path)
        rgb = Vec3Map(depth.grid, arr)
    result = popup(
        depth,
        normals,
        boundary,
        rgb=rgb,
        ransac=ransac_from(config, resolve(seed, config, "seed", 0)),
        ico_level=resolve(ico_level, config, "ico_level", 7),
        bins=config.get("otsu_bins", DEFAULT_BINS),
        min_size=config.get("min_segment_size", DEFAULT_MIN_SIZE),
    )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    mapio.write_obj(out / "model.obj", result.mesh)
    mapio.write_ply(out / "model.ply", result.mesh)
    mapio.write_label_png(out / "labels.png", result.segmentation.labels)
    mapio.write_pfm(out / "adjusted_depth.pfm", result.adjusted_depth.values)
    with open(out / "planes.json", "w") as f:
        json.dump([s.as_dict() for s in result.segments], f, indent=2)
    viz.save_label_figure(out / "labels_fig.png", result.segmentation)
    viz.save_depth_figure(out / "adjusted_depth_fig.png", result.adjusted_depth,
                          "plane-adjusted depth (m)")
    click.echo(json.dumps({
        "segments": result.segmentation.n_segments,
        "accepted": sum(1 for s in result.segments if s.accepted),
        "out_dir": str(out),
    }))


if __name__ == "__main__":
    main()
