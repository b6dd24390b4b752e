"""Off-boundary evaluation of the retarded double layer potential.

u(x,t) = -(1/4pi) int_Gamma (n_y.(x-y)/|x-y|) (phi(y, t-r)/r^2
         + phi_t(y, t-r)/r) dGamma_y with r = |x-y|, where phi is the
discrete space-time density.  Per-triangle Gauss quadrature, upgraded near
the evaluation point where the kernel peaks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import SurfaceMesh, point_triangle_distance
from .quadrature import shape_values, triangle_rule
from .reference import IncidentWave
from .temporal_basis import TimeGrid, basis_b, support_interval, decode_flat

__all__ = ["FieldGrid", "eval_double_layer", "eval_total_field"]

_INV4PI = 1.0 / (4.0 * np.pi)


@dataclass(frozen=True)
class FieldGrid:
    """Evaluation points (off the surface) and times."""

    points: np.ndarray
    times: np.ndarray

    def validate(self, mesh: SurfaceMesh, min_dist: float = 1e-8) -> None:
        c = mesh.corners
        for pt in np.atleast_2d(self.points):
            rep = np.broadcast_to(pt, (mesh.num_triangles, 3))
            d = point_triangle_distance(rep, c[:, 0], c[:, 1], c[:, 2]).min()
            if d < min_dist:
                raise ValueError(f"field point {pt} is within {min_dist} of the surface")


def _triangle_points(mesh: SurfaceMesh, q: int):
    pts, w = triangle_rule(q)
    corners = mesh.corners
    X = (
        corners[:, None, 0, :]
        + pts[None, :, 0, None] * (corners[:, 1] - corners[:, 0])[:, None, :]
        + pts[None, :, 1, None] * (corners[:, 2] - corners[:, 1])[:, None, :]
    )
    wx = w[None, :] * 2.0 * mesh.areas[:, None]
    return X, wx, shape_values(pts)


def eval_double_layer(
    mesh: SurfaceMesh,
    grid: TimeGrid,
    coeffs: np.ndarray,
    point: np.ndarray,
    t: float,
    q_far: int = 4,
    q_near: int = 12,
) -> float:
    """Double layer potential at one off-boundary point and time."""
    m = mesh.num_vertices
    alpha = np.asarray(coeffs).reshape(grid.L, m)
    point = np.asarray(point, dtype=float)

    diam = np.linalg.norm(
        mesh.corners - mesh.corners[:, [1, 2, 0]], axis=2
    ).max(axis=1)
    c = mesh.corners
    rep = np.broadcast_to(point, (mesh.num_triangles, 3))
    near = point_triangle_distance(rep, c[:, 0], c[:, 1], c[:, 2]) < 2.0 * diam

    total = 0.0
    for q, sel in ((q_far, ~near), (q_near, near)):
        if not np.any(sel):
            continue
        X, wx, sh = _triangle_points(mesh, q)
        X = X[sel]
        wx = wx[sel]
        tri = mesh.triangles[sel]
        nrm = mesh.normals[sel]
        d = point[None, None, :] - X  # (E, nq, 3)
        r = np.linalg.norm(d, axis=2)
        ndotd = np.einsum("ed,eqd->eq", nrm, d)
        tret = t - r
        # density and its time derivative at the retarded times
        phi = np.zeros_like(r)
        phit = np.zeros_like(r)
        for i in range(1, grid.L + 1):
            idx = decode_flat(grid, i)
            lo, hi = support_interval(grid, idx.timestep)
            mask = (tret > lo) & (tret < hi)
            if not np.any(mask):
                continue
            b0 = basis_b(grid, i, tret[mask])
            b1 = basis_b(grid, i, tret[mask], deriv=1)
            vertex = alpha[i - 1][tri]  # (E, 3)
            sh_dof = np.einsum("qa,ea->eq", sh, vertex)
            phi[mask] += b0 * sh_dof[mask]
            phit[mask] += b1 * sh_dof[mask]
        kern = ndotd / r * (phi / r**2 + phit / r)
        total += -_INV4PI * float(np.sum(wx * kern))
    return total


def eval_total_field(
    wave: IncidentWave,
    mesh: SurfaceMesh,
    grid: TimeGrid,
    coeffs: np.ndarray,
    fieldgrid: FieldGrid,
    q_far: int = 4,
    q_near: int = 12,
) -> np.ndarray:
    """Incident plus scattered field, shape (n_times, n_points)."""
    pts = np.atleast_2d(fieldgrid.points)
    times = np.atleast_1d(fieldgrid.times)
    out = np.empty((len(times), len(pts)))
    for a, t in enumerate(times):
        inc = wave.field(pts, float(t))
        for b, p in enumerate(pts):
            out[a, b] = inc[b] + eval_double_layer(
                mesh, grid, coeffs, p, float(t), q_far, q_near
            )
    return out
