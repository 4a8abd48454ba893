"""Orchestration: the pop-up reconstruction flow and ground-truth derivation."""

from __future__ import annotations

from dataclasses import dataclass

from .curvature import boundary_map, curvature_map
from .icosphere import ScaledMesh, derive_normals_from_depth, mesh_from_depth
from .planes import PlaneSegment, RansacConfig, fit_all
from .segmentation import DEFAULT_BINS, DEFAULT_MIN_SIZE, LabelMap, segment_planes
from .sphere import CubeMap, EquirectGrid, FloatMap, Vec3Map, equirect_from_cubemap, planar_to_ray_depth


@dataclass
class PopupResult:
    mesh: ScaledMesh
    segmentation: LabelMap
    segments: list
    adjusted_depth: FloatMap


def popup(
    depth: FloatMap,
    normals: Vec3Map,
    boundary: FloatMap,
    rgb: Vec3Map = None,
    ransac: RansacConfig = None,
    ico_level: int = 7,
    bins: int = DEFAULT_BINS,
    min_size: int = DEFAULT_MIN_SIZE,
) -> PopupResult:
    """Full pop-up model: segment planes, fit them, project, and mesh.

    Segments failing the RANSAC inlier-fraction gate keep their raw depth
    (graceful degradation, never fatal). Deterministic for a fixed seed.
    """
    seg = segment_planes(boundary, bins=bins, min_size=min_size)
    segments, adjusted = fit_all(seg, depth, normals, ransac or RansacConfig())
    mesh = mesh_from_depth(adjusted, rgb, level=ico_level)
    return PopupResult(mesh, seg, segments, adjusted)


@dataclass
class DerivedGroundTruth:
    rgb: Vec3Map
    depth: FloatMap
    normals: Vec3Map
    k1: object  # (H, W) principal curvature arrays
    k2: object
    boundary: FloatMap


def derive_gt(
    depth_cube: CubeMap,
    rgb_cube: CubeMap = None,
    grid: EquirectGrid = None,
    ico_level: int = 7,
    depth_is_planar: bool = False,
) -> DerivedGroundTruth:
    """Cube-map RGB-D -> equirect ground truth maps.

    Resamples color bilinearly and depth nearest, derives normals through
    the icosphere mesh, and takes principal curvature of those normals for
    the plane-boundary map. Set depth_is_planar when the cube faces store
    per-face planar Z rather than ray distance.
    """
    grid = grid or EquirectGrid(512, 256)
    if depth_is_planar:
        depth_cube = planar_to_ray_depth(depth_cube)
    depth = equirect_from_cubemap(depth_cube, grid, interp="nearest")
    rgb = None
    if rgb_cube is not None:
        rgb = equirect_from_cubemap(rgb_cube, grid, interp="bilinear")
    normals = derive_normals_from_depth(depth, level=ico_level)
    curv = curvature_map(normals)
    boundary = boundary_map(curv)
    return DerivedGroundTruth(rgb, depth, normals, curv.k1, curv.k2, boundary)
