"""Plane-aware 360-degree reconstruction toolkit.

Spherical image geometry, icosphere meshing, principal-curvature plane
boundaries, the plane-aware multi-task loss kernel with analytic
gradients, depth/normal evaluation metrics, and the piecewise-planar
pop-up reconstruction pipeline.
"""

from .sphere import (
    CubeMap,
    EquirectGrid,
    FloatMap,
    GeometryError,
    Vec3Map,
    back_project,
    equirect_from_cubemap,
    geodesic_map,
    ray_direction,
    ray_map,
)
from .icosphere import (
    IcoMesh,
    ScaledMesh,
    build_icosphere,
    derive_normals_from_depth,
    mesh_from_depth,
    sample_at_vertices,
)
from .curvature import CurvatureMap, boundary_map, curvature_map, principal_curvatures
from .losses import LossConfig, LossResult, loss_baseline, loss_total
from .metrics import DepthMetrics, NormalMetrics, depth_metrics, median_scale, normal_metrics
from .segmentation import LabelMap, connected_components, otsu_threshold, segment_planes
from .planes import PlaneSegment, RansacConfig, fit_all
from .synth import SynthScene, make_room, render_gt
from .pipeline import PopupResult, derive_gt, popup

__version__ = "0.1.0"
