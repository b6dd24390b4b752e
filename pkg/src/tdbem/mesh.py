"""Triangulated surface meshes and the geometric primitives used in assembly.

Meshes are read from an OFF-style ASCII format and validated to be closed
orientable surfaces with outward normals (positive signed volume).  The
spatial trial space is continuous piecewise linear on the triangles, with one
degree of freedom per vertex; the surface curl of a vertex hat function is
constant on each triangle and is precomputed here, as are the support
distance bounds driving the sparsity of the Galerkin blocks.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = [
    "SurfaceMesh",
    "MeshError",
    "load_mesh",
    "save_mesh",
    "icosahedron",
    "refine",
    "segment_segment_distance",
    "point_triangle_distance",
]


class MeshError(ValueError):
    """Malformed mesh file or violated mesh invariant."""


@dataclass(frozen=True)
class SurfaceMesh:
    """Immutable triangle mesh with per-triangle geometry caches.

    vertices has shape (M_v, 3) and triangles (E, 3) with 0-based indices.
    Derived quantities are computed lazily and cached; the mesh is safe for
    concurrent read access.
    """

    vertices: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.vertices, dtype=float))
        t = np.ascontiguousarray(np.asarray(self.triangles, dtype=np.int64))
        if v.ndim != 2 or v.shape[1] != 3:
            raise MeshError(f"vertices must have shape (M_v, 3), got {v.shape}")
        if t.ndim != 2 or t.shape[1] != 3:
            raise MeshError(f"triangles must have shape (E, 3), got {t.shape}")
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise MeshError("triangle vertex index out of range")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        v.setflags(write=False)
        t.setflags(write=False)

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_triangles(self) -> int:
        return len(self.triangles)

    @cached_property
    def corners(self) -> np.ndarray:
        """Triangle corner coordinates, shape (E, 3, 3)."""
        return self.vertices[self.triangles]

    @cached_property
    def _cross(self) -> np.ndarray:
        c = self.corners
        return np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])

    @cached_property
    def areas(self) -> np.ndarray:
        return 0.5 * np.linalg.norm(self._cross, axis=1)

    @cached_property
    def normals(self) -> np.ndarray:
        """Unit normals following the stored triangle orientation."""
        a = np.linalg.norm(self._cross, axis=1)
        if np.any(a <= 0.0):
            raise MeshError("degenerate triangle (zero area)")
        return self._cross / a[:, None]

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.corners.mean(axis=1)

    @cached_property
    def curls(self) -> np.ndarray:
        """Surface curls of the three vertex hat functions per triangle.

        Shape (E, 3, 3); entry [e, a] is n x grad(hat_a) on triangle e, which
        for a flat triangle is (V_{a+1} - V_{a+2}) / (2 * area).
        """
        c = self.corners
        out = np.empty_like(c)
        for a in range(3):
            out[:, a] = c[:, (a + 1) % 3] - c[:, (a + 2) % 3]
        return out / (2.0 * self.areas)[:, None, None]

    @cached_property
    def diameter(self) -> float:
        """Max vertex-pair distance."""
        v = self.vertices
        d2 = np.sum((v[:, None, :] - v[None, :, :]) ** 2, axis=2)
        return float(np.sqrt(d2.max()))

    @cached_property
    def vertex_triangles(self) -> list[np.ndarray]:
        """Triangle indices adjacent to each vertex (the hat supports)."""
        out: list[list[int]] = [[] for _ in range(self.num_vertices)]
        for e, tri in enumerate(self.triangles):
            for j in tri:
                out[j].append(e)
        return [np.array(lst, dtype=np.int64) for lst in out]

    @cached_property
    def signed_volume(self) -> float:
        c = self.corners
        return float(np.einsum("ij,ij->", c[:, 0], np.cross(c[:, 1], c[:, 2]))) / 6.0

    def validate_closed(self) -> None:
        """Check the closed-orientable-surface invariant.

        Every undirected edge must appear in exactly two triangles, once in
        each direction.
        """
        tris = self.triangles
        edges = np.concatenate(
            [tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]], axis=0
        )
        if len(np.unique(edges, axis=0)) != len(edges):
            raise MeshError("duplicated directed edge (inconsistent orientation)")
        und = np.sort(edges, axis=1)
        _, counts = np.unique(und, axis=0, return_counts=True)
        if np.any(counts != 2):
            raise MeshError("open or non-manifold surface (edge not shared by exactly 2 triangles)")

    @cached_property
    def tri_distance_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """(mindist, maxdist) arrays of shape (E, E) over triangle pairs.

        mindist is the exact distance between the closed triangles, maxdist
        the maximum over corner pairs (exact for convex sets).
        """
        return _tri_pair_bounds(self.corners, self.triangles)

    @cached_property
    def dof_distance_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """(mindist, maxdist) arrays of shape (M_v, M_v) over hat supports."""
        tmin, tmax = self.tri_distance_bounds
        m = self.num_vertices
        dmin = np.full((m, m), np.inf)
        dmax = np.zeros((m, m))
        tris = self.triangles
        for a in range(3):
            for b in range(3):
                idx = (tris[:, a][:, None], tris[None, :, b])
                np.minimum.at(dmin, idx, tmin)
                np.maximum.at(dmax, idx, tmax)
        return dmin, dmax

    def support_distances(self, j: int, l: int) -> tuple[float, float]:
        """Min and max distance between the supports of hat functions j and l."""
        dmin, dmax = self.dof_distance_bounds
        return float(dmin[j, l]), float(dmax[j, l])


def _parse_off_tokens(text: str) -> list[str]:
    tokens = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            tokens.extend(line.split())
    return tokens


def load_mesh(path, validate: bool = True) -> SurfaceMesh:
    """Load an OFF-style ASCII mesh file.

    With ``validate`` (default), the surface must be closed and consistently
    oriented; a negative enclosed volume flips all triangles with a warning so
    normals point outward.  ``validate=False`` loads open fixture meshes
    unchecked (orientation is kept as stored).
    """
    with open(path) as fh:
        tok = _parse_off_tokens(fh.read())
    if not tok or tok[0] != "OFF":
        raise MeshError(f"{path}: missing OFF header")
    try:
        nv, ne, _ = (int(t) for t in tok[1:4])
        pos = 4
        verts = np.array([float(t) for t in tok[pos : pos + 3 * nv]]).reshape(nv, 3)
        pos += 3 * nv
        tris = np.empty((ne, 3), dtype=np.int64)
        for e in range(ne):
            if int(tok[pos]) != 3:
                raise MeshError(f"{path}: face {e} is not a triangle")
            tris[e] = [int(t) for t in tok[pos + 1 : pos + 4]]
            pos += 4
        if pos != len(tok):
            raise MeshError(f"{path}: trailing tokens after face list")
    except (ValueError, IndexError) as exc:
        raise MeshError(f"{path}: malformed OFF file ({exc})") from exc

    mesh = SurfaceMesh(verts, tris)
    mesh.normals  # raises on degenerate triangles
    if validate:
        mesh.validate_closed()
        if mesh.signed_volume < 0.0:
            warnings.warn(f"{path}: negative enclosed volume, flipping triangle orientation")
            mesh = SurfaceMesh(verts, tris[:, [0, 2, 1]])
    return mesh


def save_mesh(mesh: SurfaceMesh, path) -> None:
    """Write a mesh in the OFF-style ASCII format."""
    with open(path, "w") as fh:
        fh.write("OFF\n")
        fh.write(f"{mesh.num_vertices} {mesh.num_triangles} 0\n")
        for v in mesh.vertices:
            fh.write(f"{v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
        for t in mesh.triangles:
            fh.write(f"3 {t[0]} {t[1]} {t[2]}\n")


def icosahedron() -> SurfaceMesh:
    """Regular icosahedron with vertices scaled to the unit sphere."""
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            (-1, phi, 0), (1, phi, 0), (-1, -phi, 0), (1, -phi, 0),
            (0, -1, phi), (0, 1, phi), (0, -1, -phi), (0, 1, -phi),
            (phi, 0, -1), (phi, 0, 1), (-phi, 0, -1), (-phi, 0, 1),
        ],
        dtype=float,
    )
    verts /= np.linalg.norm(verts[0])
    tris = np.array(
        [
            (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
            (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
            (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
            (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
        ],
        dtype=np.int64,
    )
    return SurfaceMesh(verts, tris)


def refine(mesh: SurfaceMesh, project_unit_sphere: bool = False) -> SurfaceMesh:
    """Split every triangle into four by edge midpoints.

    With ``project_unit_sphere`` the new vertex set is normalized onto the
    unit sphere (used to build the sphere benchmark meshes).
    """
    verts = list(mesh.vertices)
    midpoint: dict[tuple[int, int], int] = {}

    def mid(a: int, b: int) -> int:
        key = (min(a, b), max(a, b))
        idx = midpoint.get(key)
        if idx is None:
            idx = len(verts)
            verts.append(0.5 * (mesh.vertices[a] + mesh.vertices[b]))
            midpoint[key] = idx
        return idx

    tris = []
    for i0, i1, i2 in mesh.triangles:
        m01, m12, m20 = mid(i0, i1), mid(i1, i2), mid(i2, i0)
        tris += [(i0, m01, m20), (i1, m12, m01), (i2, m20, m12), (m01, m12, m20)]
    v = np.array(verts)
    if project_unit_sphere:
        v /= np.linalg.norm(v, axis=1)[:, None]
    return SurfaceMesh(v, np.array(tris, dtype=np.int64))


def segment_segment_distance(p0, p1, q0, q1) -> np.ndarray:
    """Distance between segments [p0,p1] and [q0,q1], vectorized over rows.

    Standard clamped closest-point parametrization; robust for parallel and
    degenerate segments.
    """
    p0, p1, q0, q1 = (np.atleast_2d(np.asarray(x, dtype=float)) for x in (p0, p1, q0, q1))
    d1 = p1 - p0
    d2 = q1 - q0
    r = p0 - q0
    a = np.einsum("ij,ij->i", d1, d1)
    e = np.einsum("ij,ij->i", d2, d2)
    b = np.einsum("ij,ij->i", d1, d2)
    c = np.einsum("ij,ij->i", d1, r)
    f = np.einsum("ij,ij->i", d2, r)
    den = a * e - b * b
    a_s = np.where(a > 0, a, 1.0)
    e_s = np.where(e > 0, e, 1.0)
    s = np.where(den > 0.0, np.clip((b * f - c * e) / np.where(den > 0, den, 1.0), 0.0, 1.0), 0.0)
    t = (b * s + f) / e_s
    # clamping t moves the closest point on the first segment too
    s = np.where(t < 0.0, np.clip(-c / a_s, 0.0, 1.0), s)
    s = np.where(t > 1.0, np.clip((b - c) / a_s, 0.0, 1.0), s)
    t = np.clip(t, 0.0, 1.0) * (e > 0.0)
    s = s * (a > 0.0)
    diff = p0 + s[:, None] * d1 - (q0 + t[:, None] * d2)
    return np.linalg.norm(diff, axis=1)


def _point_segment_distance(p, a, b) -> np.ndarray:
    ab = b - a
    denom = np.einsum("ij,ij->i", ab, ab)
    t = np.einsum("ij,ij->i", p - a, ab) / np.where(denom > 0, denom, 1.0)
    t = np.clip(t, 0.0, 1.0) * (denom > 0.0)
    return np.linalg.norm(p - a - t[:, None] * ab, axis=1)


def point_triangle_distance(p, v0, v1, v2) -> np.ndarray:
    """Distance from points to triangles, vectorized over rows.

    Uses the plane projection when it falls inside the triangle and the
    minimum edge distance otherwise.
    """
    p, v0, v1, v2 = (np.atleast_2d(np.asarray(x, dtype=float)) for x in (p, v0, v1, v2))
    e0 = v1 - v0
    e1 = v2 - v0
    n = np.cross(e0, e1)
    nn = np.einsum("ij,ij->i", n, n)
    w = p - v0
    dist_plane = np.abs(np.einsum("ij,ij->i", w, n)) / np.sqrt(np.where(nn > 0, nn, 1.0))
    # barycentric coordinates of the in-plane projection
    d00 = np.einsum("ij,ij->i", e0, e0)
    d01 = np.einsum("ij,ij->i", e0, e1)
    d11 = np.einsum("ij,ij->i", e1, e1)
    d20 = np.einsum("ij,ij->i", w, e0)
    d21 = np.einsum("ij,ij->i", w, e1)
    den = d00 * d11 - d01 * d01
    den_s = np.where(den > 0, den, 1.0)
    u = (d11 * d20 - d01 * d21) / den_s
    v = (d00 * d21 - d01 * d20) / den_s
    inside = (u >= 0.0) & (v >= 0.0) & (u + v <= 1.0) & (den > 0.0) & (nn > 0.0)
    edge = np.minimum.reduce(
        [
            _point_segment_distance(p, v0, v1),
            _point_segment_distance(p, v1, v2),
            _point_segment_distance(p, v2, v0),
        ]
    )
    return np.where(inside, dist_plane, edge)


def _tri_pair_bounds(corners: np.ndarray, tris: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Exact min and corner-pair max distances for all triangle pairs."""
    ne = len(corners)
    ii, jj = np.meshgrid(np.arange(ne), np.arange(ne), indexing="ij")
    ii = ii.ravel()
    jj = jj.ravel()
    ca = corners[ii]  # (P, 3, 3)
    cb = corners[jj]

    # corner-pair distances give maxdist and a mindist upper bound
    diff = ca[:, :, None, :] - cb[:, None, :, :]
    vdist = np.linalg.norm(diff, axis=3)
    dmax = vdist.max(axis=(1, 2))
    dmin = vdist.min(axis=(1, 2))

    # edge-edge distances
    for a in range(3):
        p0 = ca[:, a]
        p1 = ca[:, (a + 1) % 3]
        for b in range(3):
            dmin = np.minimum(
                dmin, segment_segment_distance(p0, p1, cb[:, b], cb[:, (b + 1) % 3])
            )
    # vertex-face distances both ways
    for a in range(3):
        dmin = np.minimum(dmin, point_triangle_distance(ca[:, a], cb[:, 0], cb[:, 1], cb[:, 2]))
        dmin = np.minimum(dmin, point_triangle_distance(cb[:, a], ca[:, 0], ca[:, 1], ca[:, 2]))

    # shared vertices force exact zero
    shared = np.zeros(len(ii), dtype=bool)
    for a in range(3):
        for b in range(3):
            shared |= tris[ii, a] == tris[jj, b]
    dmin[shared] = 0.0
    return dmin.reshape(ne, ne), dmax.reshape(ne, ne)
