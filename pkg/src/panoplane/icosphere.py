"""Subdivided icosahedral sphere meshes.

A level-k icosphere has 10*4^k + 2 vertices and 20*4^k faces. Subdivision
is midpoint split + reprojection to the unit sphere, with shared midpoints
deduplicated. Children of face f occupy indices 4f..4f+3 in corner order
(a, b, c, center), which lets ``locate_faces`` find the containing face of
any direction by descending the subdivision tree instead of searching.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .sphere import EquirectGrid, FloatMap, GeometryError, Vec3Map, ray_map, ray_to_spherical

_PHI = (1.0 + np.sqrt(5.0)) / 2.0

_BASE_VERTICES = np.array(
    [
        [-1, _PHI, 0], [1, _PHI, 0], [-1, -_PHI, 0], [1, -_PHI, 0],
        [0, -1, _PHI], [0, 1, _PHI], [0, -1, -_PHI], [0, 1, -_PHI],
        [_PHI, 0, -1], [_PHI, 0, 1], [-_PHI, 0, -1], [-_PHI, 0, 1],
    ],
    dtype=np.float64,
)
_BASE_VERTICES /= np.linalg.norm(_BASE_VERTICES, axis=1, keepdims=True)

# Counter-clockwise seen from outside (verified: normal . centroid > 0).
_BASE_FACES = np.array(
    [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ],
    dtype=np.int64,
)


@dataclass
class IcoMesh:
    """Unit-sphere triangle mesh from recursive icosahedron subdivision."""

    level: int
    vertices: np.ndarray  # (V, 3) unit vectors
    faces: np.ndarray  # (F, 3) vertex indices, CCW from outside

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_faces(self) -> int:
        return self.faces.shape[0]

    def edges(self) -> np.ndarray:
        """Unique undirected edges, (E, 2) sorted vertex pairs."""
        e = np.concatenate(
            [self.faces[:, [0, 1]], self.faces[:, [1, 2]], self.faces[:, [2, 0]]]
        )
        return np.unique(np.sort(e, axis=1), axis=0)

    def euler_characteristic(self) -> int:
        return self.n_vertices - self.edges().shape[0] + self.n_faces

    def vertex_spherical(self) -> tuple[np.ndarray, np.ndarray]:
        """(phi, lam) of every vertex."""
        return ray_to_spherical(self.vertices)


def build_icosphere(level: int) -> IcoMesh:
    """Build a level-k icosphere; k=0 is the base icosahedron."""
    if level < 0:
        raise GeometryError("subdivision level must be >= 0")
    verts = _BASE_VERTICES.copy()
    faces = _BASE_FACES.copy()
    for _ in range(level):
        verts, faces = _subdivide(verts, faces)
    return IcoMesh(level, verts, faces)


def _subdivide(verts: np.ndarray, faces: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    nv = verts.shape[0]
    ea = np.sort(faces[:, [0, 1]], axis=1)
    eb = np.sort(faces[:, [1, 2]], axis=1)
    ec = np.sort(faces[:, [2, 0]], axis=1)
    all_edges = np.concatenate([ea, eb, ec])
    uniq, inv = np.unique(all_edges, axis=0, return_inverse=True)
    mids = verts[uniq[:, 0]] + verts[uniq[:, 1]]
    mids /= np.linalg.norm(mids, axis=1, keepdims=True)
    new_verts = np.concatenate([verts, mids])

    f = faces.shape[0]
    mab = nv + inv[:f]
    mbc = nv + inv[f : 2 * f]
    mca = nv + inv[2 * f :]
    a, b, c = faces[:, 0], faces[:, 1], faces[:, 2]
    # Child order (a, b, c, center) must match locate_faces' descent.
    children = np.stack(
        [
            np.stack([a, mab, mca], axis=1),
            np.stack([mab, b, mbc], axis=1),
            np.stack([mca, mbc, c], axis=1),
            np.stack([mab, mbc, mca], axis=1),
        ],
        axis=1,
    )
    return new_verts, children.reshape(-1, 3)


def locate_faces(mesh: IcoMesh, dirs: np.ndarray) -> np.ndarray:
    """Index of the mesh face whose spherical triangle contains each direction.

    Works for any input shape (..., 3); directions need not be normalized.
    """
    dirs = np.asarray(dirs, dtype=np.float64)
    flat = dirs.reshape(-1, 3)
    n = flat.shape[0]
    face_idx = np.full(n, -1, dtype=np.int64)

    bv = _BASE_VERTICES
    # Locate the base face: all three signed volumes det(vi, vj, r) >= 0.
    eps = -1e-12
    unresolved = np.ones(n, dtype=bool)
    for f in range(20):
        v0, v1, v2 = bv[_BASE_FACES[f]]
        s0 = flat @ np.cross(v0, v1)
        s1 = flat @ np.cross(v1, v2)
        s2 = flat @ np.cross(v2, v0)
        inside = unresolved & (s0 >= eps) & (s1 >= eps) & (s2 >= eps)
        face_idx[inside] = f
        unresolved &= ~inside
    if np.any(unresolved):
        # Numerically on an edge/vertex of every candidate; take the base
        # face with the least-negative containment slack.
        rem = flat[unresolved]
        best = None
        best_f = None
        for f in range(20):
            v0, v1, v2 = bv[_BASE_FACES[f]]
            slack = np.minimum.reduce(
                [rem @ np.cross(v0, v1), rem @ np.cross(v1, v2), rem @ np.cross(v2, v0)]
            )
            if best is None:
                best, best_f = slack, np.full(rem.shape[0], f)
            else:
                better = slack > best
                best = np.where(better, slack, best)
                best_f = np.where(better, f, best_f)
        face_idx[unresolved] = best_f

    a = bv[_BASE_FACES[face_idx, 0]]
    b = bv[_BASE_FACES[face_idx, 1]]
    c = bv[_BASE_FACES[face_idx, 2]]
    for _ in range(mesh.level):
        mab = a + b
        mab /= np.linalg.norm(mab, axis=1, keepdims=True)
        mbc = b + c
        mbc /= np.linalg.norm(mbc, axis=1, keepdims=True)
        mca = c + a
        mca /= np.linalg.norm(mca, axis=1, keepdims=True)
        # Corner child test: r on the corner's side of the midpoint chord.
        pa = np.cross(mab, mca)
        pb = np.cross(mbc, mab)
        pc = np.cross(mca, mbc)
        in_a = np.einsum("ij,ij->i", flat, pa) * np.einsum("ij,ij->i", a, pa) > 0
        in_b = ~in_a & (np.einsum("ij,ij->i", flat, pb) * np.einsum("ij,ij->i", b, pb) > 0)
        in_c = ~in_a & ~in_b & (
            np.einsum("ij,ij->i", flat, pc) * np.einsum("ij,ij->i", c, pc) > 0
        )
        child = np.full(n, 3, dtype=np.int64)
        child[in_a] = 0
        child[in_b] = 1
        child[in_c] = 2
        face_idx = face_idx * 4 + child

        na = np.where(in_a[:, None], a, np.where(in_b[:, None], mab, np.where(in_c[:, None], mca, mab)))
        nb = np.where(in_a[:, None], mab, np.where(in_b[:, None], b, np.where(in_c[:, None], mbc, mbc)))
        nc = np.where(in_a[:, None], mca, np.where(in_b[:, None], mbc, np.where(in_c[:, None], c, mca)))
        a, b, c = na, nb, nc
    return face_idx.reshape(dirs.shape[:-1])


def sample_at_vertices(
    m: FloatMap | Vec3Map, mesh: IcoMesh, interp: str = "bilinear"
) -> tuple[np.ndarray, np.ndarray]:
    """Sample an equirect map at each mesh vertex's (phi, lam).

    Longitude wraps (bilinear across the seam blends columns W-1 and 0);
    rows clamp at the poles. Returns (values, valid); a vertex is invalid
    if any contributing pixel is masked out.
    """
    if interp not in ("bilinear", "nearest"):
        raise GeometryError(f"unknown interpolation {interp!r}")
    grid = m.grid
    phi, lam = mesh.vertex_spherical()
    row, col = grid.pixel_coords(phi, lam)
    h, w = grid.shape
    if interp == "nearest":
        r = np.clip(np.round(row).astype(np.int64), 0, h - 1)
        c = np.round(col).astype(np.int64) % w
        return m.values[r, c], m.mask[r, c]

    r0 = np.floor(row).astype(np.int64)
    c0 = np.floor(col).astype(np.int64)
    fr = row - r0
    fc = col - c0
    r0c = np.clip(r0, 0, h - 1)
    r1c = np.clip(r0 + 1, 0, h - 1)
    c0w = c0 % w
    c1w = (c0 + 1) % w
    if m.values.ndim == 3:
        wfr = fr[:, None]
        wfc = fc[:, None]
    else:
        wfr, wfc = fr, fc
    vals = (
        m.values[r0c, c0w] * (1 - wfr) * (1 - wfc)
        + m.values[r0c, c1w] * (1 - wfr) * wfc
        + m.values[r1c, c0w] * wfr * (1 - wfc)
        + m.values[r1c, c1w] * wfr * wfc
    )
    valid = m.mask[r0c, c0w] & m.mask[r0c, c1w] & m.mask[r1c, c0w] & m.mask[r1c, c1w]
    return vals, valid


@dataclass
class ScaledMesh:
    """An icosphere with per-vertex radial scales (meters) and optional colors."""

    base: IcoMesh
    scales: np.ndarray  # (V,) radial distance per vertex
    vertex_valid: np.ndarray = None  # (V,) bool
    colors: np.ndarray = None  # (V, 3) in [0, 1] or None

    def __post_init__(self):
        self.scales = np.asarray(self.scales, dtype=np.float64)
        if self.vertex_valid is None:
            self.vertex_valid = np.ones(self.base.n_vertices, dtype=bool)
        if np.any(self.scales[self.vertex_valid] <= 0):
            raise GeometryError("vertex scales must be positive at valid vertices")

    def positions(self) -> np.ndarray:
        return self.base.vertices * self.scales[:, None]

    def valid_faces(self) -> np.ndarray:
        """Faces whose three vertices are all valid."""
        ok = self.vertex_valid[self.base.faces].all(axis=1)
        return self.base.faces[ok]


def face_normals(positions: np.ndarray, faces: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unit normal per face plus a non-degeneracy flag."""
    p0 = positions[faces[:, 0]]
    p1 = positions[faces[:, 1]]
    p2 = positions[faces[:, 2]]
    n = np.cross(p1 - p0, p2 - p0)
    norm = np.linalg.norm(n, axis=1)
    ok = norm > 1e-12
    n = np.where(ok[:, None], n / np.maximum(norm, 1e-300)[:, None], 0.0)
    return n, ok


def derive_normals_from_depth(depth: FloatMap, level: int = 7) -> Vec3Map:
    """Ground-truth-style normal map from a depth map via icosphere meshing.

    Scales each mesh vertex by the bilinearly sampled depth, takes per-face
    normals of the scaled mesh, orients them camera-facing, and renders
    them back to the equirect grid by looking up, per pixel, the face its
    viewing ray passes through. Bilinear vertex depths keep the radial
    quantization well below the face size, which nearest sampling would
    not. Faces touching invalid vertices or with collinear scaled vertices
    are dropped; their pixels stay masked.
    """
    mesh = build_icosphere(level)
    scales, valid = sample_at_vertices(depth, mesh, interp="bilinear")
    valid = valid & (scales > 0)
    positions = mesh.vertices * np.where(valid, scales, 1.0)[:, None]
    normals, nondegenerate = face_normals(positions, mesh.faces)

    centroid_dirs = (
        mesh.vertices[mesh.faces[:, 0]]
        + mesh.vertices[mesh.faces[:, 1]]
        + mesh.vertices[mesh.faces[:, 2]]
    )
    flip = np.einsum("ij,ij->i", normals, centroid_dirs) > 0
    normals[flip] *= -1.0

    face_ok = valid[mesh.faces].all(axis=1) & nondegenerate

    rays = ray_map(depth.grid)
    fidx = locate_faces(mesh, rays)
    out = normals[fidx]
    mask = face_ok[fidx] & depth.mask
    out[~mask] = 0.0
    return Vec3Map(depth.grid, out, mask)


def mesh_from_depth(
    depth: FloatMap, rgb: Vec3Map | None = None, level: int = 7
) -> ScaledMesh:
    """Icosphere mesh of a scene: vertex radius = nearest-sampled depth.

    Colors, when an RGB map is given, are bilinear-sampled. Vertices landing
    on invalid pixels are marked invalid; their incident faces are dropped
    by ScaledMesh.valid_faces().
    """
    mesh = build_icosphere(level)
    scales, valid = sample_at_vertices(depth, mesh, interp="nearest")
    valid = valid & (scales > 0)
    colors = None
    if rgb is not None:
        colors, _ = sample_at_vertices(rgb, mesh, interp="bilinear")
    return ScaledMesh(mesh, np.where(valid, scales, 1.0), valid, colors)
