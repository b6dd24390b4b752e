"""Surface quadrature rules for pairs of triangles.

Reference element is the collapsed unit triangle That = {0 <= x2 <= x1 <= 1}
with the chart x = V0 + x1*(V1 - V0) + x2*(V2 - V1), whose barycentric
coordinates are (1 - x1, x1 - x2, x2).

Separated pairs use a tensor Gauss rule.  Touching pairs (coincident,
edge-adjacent, vertex-adjacent) use relative-coordinate transforms that pull
the 1/r singularity into a Jacobian factor, yielding smooth integrands on
[0,1]^4:

* coincident: substitute z = xhat - yhat; the inner domain That ^ (That - z)
  is a triangle whose corners are affine in z, and the z-hexagon splits into
  six sectors, each a triangle with a corner at the origin (Duffy scaling).
* edge-adjacent (shared edge at x2 = y2 = 0, x1 = y1): relative coordinate
  z1 = x1 - y1; the outer (z1, x2, y2) region splits into cones from the
  origin over the far faces, the remaining y1 range is an affine interval.
* vertex-adjacent (shared vertex at the chart origin): plain two-sided Duffy
  scaling toward the origin.

All rules store reference points for both triangles plus combined weights;
physical integration multiplies by 2*area of each triangle.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .quad1d import gauss_rule

__all__ = [
    "triangle_rule",
    "pair_rule_regular",
    "singular_rule",
    "shape_values",
    "Q_REG",
    "Q_SING",
]

Q_REG = 4
Q_SING = 5


@lru_cache(maxsize=None)
def _gauss01(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = gauss_rule(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def triangle_rule(q: int) -> tuple[np.ndarray, np.ndarray]:
    """Collapsed q x q Gauss rule on That; weights sum to the area 1/2."""
    x, w = _gauss01(q)
    a, b = np.meshgrid(x, x, indexing="ij")
    wa, wb = np.meshgrid(w, w, indexing="ij")
    pts = np.column_stack([a.ravel(), (a * b).ravel()])
    return pts, (wa * wb * a).ravel()


@lru_cache(maxsize=None)
def pair_rule_regular(q: int = Q_REG):
    """Tensor rule on That x That for separated pairs."""
    pts, w = triangle_rule(q)
    n = len(w)
    ix, iy = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    return pts[ix.ravel()], pts[iy.ravel()], (w[:, None] * w[None, :]).ravel()


def shape_values(pts: np.ndarray) -> np.ndarray:
    """Barycentric hat-function values at reference points, shape (n, 3)."""
    x1 = pts[:, 0]
    x2 = pts[:, 1]
    return np.column_stack([1.0 - x1, x1 - x2, x2])


def _composite01(q: int, n_panels: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = _gauss01(q)
    xs = ((x[None, :] + np.arange(n_panels)[:, None]) / n_panels).ravel()
    return xs, np.tile(w / n_panels, n_panels)


def _tensor4(q: int, n_rad: int = 1, n_ang: int = 1):
    """Tensor Gauss on [0,1]^4 with composite panels in the first two variables.

    The first (radial) variable carries the distance scaling of the
    regularized transforms and the second one most of the angular distance
    variation; the temporal weight factor varies on the timestep scale along
    both, so they get n_rad and n_ang equal panels.
    """
    x0, w0 = _composite01(q, n_rad)
    x1, w1 = _composite01(q, n_ang)
    x, w = _gauss01(q)
    g = np.meshgrid(x0, x1, x, x, indexing="ij")
    gw = np.meshgrid(w0, w1, w, w, indexing="ij")
    pts = [c.ravel() for c in g]
    weight = gw[0].ravel() * gw[1].ravel() * gw[2].ravel() * gw[3].ravel()
    return pts, weight


def _rule_coincident(q: int, n_rad: int = 1, n_ang: int = 1):
    (t, s, a, b), w4 = _tensor4(q, n_rad, n_ang)
    # sectors of the z-hexagon: triangles (0, V1, V2)
    sectors = [
        ((1.0, 0.0), (1.0, 1.0)),
        ((1.0, 1.0), (0.0, 1.0)),
        ((0.0, 1.0), (-1.0, 0.0)),
        ((-1.0, 0.0), (-1.0, -1.0)),
        ((-1.0, -1.0), (0.0, -1.0)),
        ((0.0, -1.0), (1.0, 0.0)),
    ]
    xs, ys, ws = [], [], []
    for (v1x, v1y), (v2x, v2y) in sectors:
        det = abs(v1x * v2y - v1y * v2x)
        z1 = t * (v1x + s * (v2x - v1x))
        z2 = t * (v1y + s * (v2y - v1y))
        A = 1.0 - np.maximum(0.0, z1)
        m = np.minimum(0.0, z1 - z2)
        B = np.maximum(0.0, -z2)
        h = A + m - B  # inner triangle scale, >= 0 on the sector
        y1 = A - a * b * h
        y2 = B + a * h - a * b * h
        ys.append(np.column_stack([y1, y2]))
        xs.append(np.column_stack([y1 + z1, y2 + z2]))
        ws.append(w4 * t * det * a * h * h)
    return np.vstack(xs), np.vstack(ys), np.concatenate(ws)


def _rule_edge(q: int, n_rad: int = 1, n_ang: int = 1):
    (t, a, b, tau), w4 = _tensor4(q, n_rad, n_ang)
    # cones from the origin over the far faces of the (z1, x2, y2) polytopes;
    # each region stores the face triangle, the sign of z1, and the y1 range
    regions = [
        # z1 >= 0, L = y2, U = 1 - z1 (quad face y2 + z1 = 1, two triangles)
        (((1, 0, 0), (1, 1, 0), (0, 1, 1)), +1, "y2"),
        (((1, 0, 0), (0, 1, 1), (0, 0, 1)), +1, "y2"),
        # z1 >= 0, L = x2 - z1, U = 1 - z1 (face x2 = 1)
        (((0, 1, 0), (1, 1, 0), (0, 1, 1)), +1, "xz"),
        # z1 <= 0 (coordinate s = -z1), L = y2, U = 1 (face y2 = 1)
        (((0, 0, 1), (1, 0, 1), (0, 1, 1)), -1, "y2"),
        # z1 <= 0, L = x2 - z1, U = 1 (quad face x2 + s = 1, two triangles)
        (((1, 0, 0), (0, 1, 0), (0, 1, 1)), -1, "xz"),
        (((1, 0, 0), (0, 1, 1), (1, 0, 1)), -1, "xz"),
    ]
    xs, ys, ws = [], [], []
    for (p0, p1, p2), sign, lkind in regions:
        P = np.array([p0, p1, p2], dtype=float)
        det = abs(np.linalg.det(P))
        qv = P[0] + a[:, None] * (P[1] - P[0]) + (a * b)[:, None] * (P[2] - P[1])
        u1, x2, y2 = (t * qv[:, k] for k in range(3))
        z1 = sign * u1
        U = 1.0 - z1 if sign > 0 else np.ones_like(z1)
        L = y2 if lkind == "y2" else x2 - z1
        y1 = L + (U - L) * tau
        ys.append(np.column_stack([y1, y2]))
        xs.append(np.column_stack([y1 + z1, x2]))
        ws.append(w4 * t * t * a * det * (U - L))
    return np.vstack(xs), np.vstack(ys), np.concatenate(ws)


def _rule_vertex(q: int, n_rad: int = 1, n_ang: int = 1):
    (xi, e1, e2, e3), w4 = _tensor4(q, n_rad, n_ang)
    pa = np.column_stack([xi, xi * e1])
    pb = np.column_stack([xi * e2, xi * e2 * e3])
    w = w4 * xi**3 * e2
    return np.vstack([pa, pb]), np.vstack([pb, pa]), np.concatenate([w, w])


@lru_cache(maxsize=None)
def singular_rule(case: str, q: int = Q_SING, n_rad: int = 1, n_ang: int = 1):
    """Regularized rule on That x That for touching pairs.

    case is 'coincident', 'edge' (shared edge on x2 = y2 = 0 with identical
    x1/y1 parametrization) or 'vertex' (shared vertex at the chart origin).
    Returns (xhat, yhat, weights); weights sum to 1/4.
    """
    if case == "coincident":
        return _rule_coincident(q, n_rad, n_ang)
    if case == "edge":
        return _rule_edge(q, n_rad, n_ang)
    if case == "vertex":
        return _rule_vertex(q, n_rad, n_ang)
    raise ValueError(f"unknown singular case {case!r}")
