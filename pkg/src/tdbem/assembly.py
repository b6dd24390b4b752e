"""Galerkin assembly of single space-time matrix blocks and the load vector.

A block position (kt, it) of the outer block matrix carries (p+1) x (p+1)
sparse sub-blocks over the spatial degrees of freedom.  Entries combine two
kernel terms evaluated with the temporal weight tables:

    (n_x . n_y) / (4 pi |x-y|) * phi_j(y) phi_l(x) * psi(|x-y|)
  + (curl phi_j(y) . curl phi_l(x)) / (4 pi |x-y|) * psitilde(|x-y|)

Rows index j (the y factor), columns l (the x factor).  Separated triangle
pairs use the tensor rule, touching pairs the regularized rules.  Per-entry
accumulation uses compensated summation over a canonical pair order, so
results do not depend on chunking or worker count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .kernel_weights import PrototypeTables, is_zero_pair, psi_support
from .mesh import SurfaceMesh
from .quad1d import gauss_rule
from .quadrature import Q_REG, Q_SING, pair_rule_regular, singular_rule, triangle_rule
from .temporal_basis import (
    TimeGrid,
    basis_b,
    canonical_origin,
    canonical_support,
    flat_index,
    support_interval,
    timestep_kind,
)

__all__ = [
    "QuadratureConfig",
    "PsiPack",
    "BlockPattern",
    "block_pattern",
    "assemble_subblocks",
    "assemble_block",
    "assemble_rhs",
]

_CHUNK = 512  # fixed pair-chunk size; independent of worker count


@dataclass(frozen=True)
class QuadratureConfig:
    """Spatial quadrature orders for regular and touching pairs.

    n_rad is the number of radial panels of the regularized rules; None
    picks it from the ratio of the largest touching-pair distance to the
    timestep, so the temporal weight factor is resolved along the radial
    coordinate.  The second transform variable gets two panels whenever the
    radial one is refined.
    """

    q_reg: int = Q_REG
    q_sing: int = Q_SING
    n_rad: int | None = None


@dataclass
class PsiPack:
    """Packed temporal weight tables for one block position (kt, it).

    Table index t = (m2*(p+1) + m1)*2 + v with v=0 for the psi variant and
    v=1 for psitilde.  Inactive tables are identically zero.
    """

    p: int
    delta: float
    lo: np.ndarray
    width: np.ndarray
    nsub: np.ndarray
    coeffs: np.ndarray
    sp: np.ndarray
    sn: np.ndarray
    fold: np.ndarray
    active: np.ndarray

    @classmethod
    def build(cls, tables: PrototypeTables, grid: TimeGrid, kt: int, it: int) -> "PsiPack":
        p = grid.p
        kind_i = timestep_kind(grid, it)
        kind_k = timestep_kind(grid, kt)
        delta = canonical_origin(grid, it) - canonical_origin(grid, kt)
        nt = 2 * (p + 1) * (p + 1)
        deg = tables.deg
        resolved = []
        max_nsub = 1
        for m2 in range(p + 1):
            for m1 in range(p + 1):
                for tilde in (False, True):
                    tbl, s_pos, s_neg, fold = tables.resolve(tilde, kind_i, kind_k, m1, m2)
                    resolved.append((tbl, s_pos, s_neg, fold))
                    if tbl is not None:
                        max_nsub = max(max_nsub, tbl.n_sub)
        pack = cls(
            p=p,
            delta=delta,
            lo=np.zeros(nt),
            width=np.ones(nt),
            nsub=np.ones(nt, dtype=np.int64),
            coeffs=np.zeros((nt, max_nsub, deg + 1)),
            sp=np.ones(nt),
            sn=np.ones(nt),
            fold=np.zeros(nt, dtype=np.uint8),
            active=np.zeros(nt, dtype=np.uint8),
        )
        for t, (tbl, s_pos, s_neg, fold) in enumerate(resolved):
            if tbl is None:
                continue
            pack.active[t] = 1
            pack.lo[t] = tbl.lo
            pack.width[t] = tbl.width
            pack.nsub[t] = tbl.n_sub
            pack.coeffs[t, : tbl.n_sub] = tbl.coeffs
            pack.sp[t] = s_pos
            pack.sn[t] = s_neg
            pack.fold[t] = 1 if fold else 0
        return pack


def classify_pair(mesh: SurfaceMesh, ex: int, ey: int):
    """Singular-case label and chart vertex orders for a triangle pair.

    Returns (case, lx, ly) where lx/ly are local vertex permutations bringing
    the shared simplex first (shared edge at chart positions 0,1; shared
    vertex at position 0), as the regularized rules require.
    """
    if ex == ey:
        return "coincident", (0, 1, 2), (0, 1, 2)
    tx = mesh.triangles[ex]
    ty = mesh.triangles[ey]
    shared = sorted(set(tx) & set(ty))
    if not shared:
        return "regular", (0, 1, 2), (0, 1, 2)

    def order(tri, front):
        lead = [int(np.flatnonzero(tri == g)[0]) for g in front]
        rest = [a for a in range(3) if a not in lead]
        return tuple(lead + rest)

    if len(shared) == 2:
        return "edge", order(tx, shared), order(ty, shared)
    return "vertex", order(tx, shared), order(ty, shared)


@dataclass(frozen=True)
class BlockPattern:
    """Admissible element pairs and dof pairs of one block position."""

    element_pairs: np.ndarray  # (n, 2) int, columns (ex, ey), canonical order
    dof_mask: np.ndarray  # (M, M) bool

    @property
    def dof_pairs(self) -> set[tuple[int, int]]:
        return {(int(j), int(l)) for j, l in zip(*np.nonzero(self.dof_mask))}


def block_pattern(mesh: SurfaceMesh, grid: TimeGrid, kt: int, it: int) -> BlockPattern:
    """Support-distance sparsity pattern of block (kt, it).

    An element pair or dof pair is admissible when its distance interval
    meets the common support of the weight functions psi_{k,i}.
    """
    m = mesh.num_vertices
    if is_zero_pair(grid, kt, it):
        return BlockPattern(np.empty((0, 2), dtype=np.int64), np.zeros((m, m), dtype=bool))
    slo, shi = psi_support(grid, kt, it)
    tmin, tmax = mesh.tri_distance_bounds
    admissible = (tmin <= shi) & (tmax >= slo)
    ex, ey = np.nonzero(admissible)
    dmin, dmax = mesh.dof_distance_bounds
    return BlockPattern(
        np.column_stack([ex, ey]).astype(np.int64),
        (dmin <= shi) & (dmax >= slo),
    )


def _kahan_csr(rows, cols, vals, m: int) -> sp.csr_matrix:
    """COO triplets to CSR with per-entry compensated summation.

    Triplets arrive in the canonical contribution order; a stable sort groups
    them per entry without reordering within a group, then a Kahan recurrence
    runs over the contribution rank (vectorized across entries).
    """
    if len(vals) == 0:
        return sp.csr_matrix((m, m))
    key = rows.astype(np.int64) * m + cols
    order = np.argsort(key, kind="stable")
    key = key[order]
    vals = vals[order]
    starts = np.concatenate([[0], np.flatnonzero(np.diff(key)) + 1])
    seg = np.searchsorted(starts, np.arange(len(key)), side="right") - 1
    pos = np.arange(len(key)) - starts[seg]
    total = np.zeros(len(starts))
    comp = np.zeros(len(starts))
    for step in range(int(pos.max()) + 1):
        mask = pos == step
        s = seg[mask]
        y = vals[mask] - comp[s]
        t = total[s] + y
        comp[s] = (t - total[s]) - y
        total[s] = t
    ukey = key[starts]
    out = sp.coo_matrix((total, (ukey // m, ukey % m)), shape=(m, m))
    return out.tocsr()


def _pair_group_values(mesh, pack, pairs, locals_x, locals_y, rule):
    """Kernel contributions for one group of pairs sharing a reference rule."""
    xhat, yhat, wq = rule
    ax = np.arange(len(pairs))
    cx = mesh.corners[pairs[:, 0]][ax[:, None], locals_x]
    cy = mesh.corners[pairs[:, 1]][ax[:, None], locals_y]
    a2x = 2.0 * mesh.areas[pairs[:, 0]]
    a2y = 2.0 * mesh.areas[pairs[:, 1]]
    ndot = np.einsum("pd,pd->p", mesh.normals[pairs[:, 0]], mesh.normals[pairs[:, 1]])
    curlx = mesh.curls[pairs[:, 0]][ax[:, None], locals_x]
    curly = mesh.curls[pairs[:, 1]][ax[:, None], locals_y]
    vals = []
    for c0 in range(0, len(pairs), _CHUNK):
        c1 = min(c0 + _CHUNK, len(pairs))
        vals.append(
            _kernels.pair_block_contributions(
                cx[c0:c1], cy[c0:c1], a2x[c0:c1], a2y[c0:c1], ndot[c0:c1],
                curly[c0:c1], curlx[c0:c1], xhat, yhat, wq, pack,
            )
        )
    return np.concatenate(vals) if vals else np.empty((0, pack.p + 1, pack.p + 1, 3, 3))


def assemble_subblocks(
    mesh: SurfaceMesh,
    grid: TimeGrid,
    tables: PrototypeTables,
    kt: int,
    it: int,
    config: QuadratureConfig = QuadratureConfig(),
) -> list[list[sp.csr_matrix]]:
    """All (p+1) x (p+1) sparse sub-blocks of block position (kt, it).

    Result[m2][m1] is the (M, M) CSR matrix for test order m2 and ansatz
    order m1.
    """
    m = mesh.num_vertices
    np1 = grid.p + 1
    pattern = block_pattern(mesh, grid, kt, it)
    pairs = pattern.element_pairs
    if len(pairs) == 0:
        return [[sp.csr_matrix((m, m)) for _ in range(np1)] for _ in range(np1)]
    pack = PsiPack.build(tables, grid, kt, it)

    # canonical processing order: group by singular case, pairs sorted within
    groups: dict[str, list[tuple[int, int, tuple, tuple]]] = {
        "regular": [], "coincident": [], "edge": [], "vertex": []
    }
    for ex, ey in pairs:
        case, lx, ly = classify_pair(mesh, int(ex), int(ey))
        groups[case].append((int(ex), int(ey), lx, ly))

    all_vals = []
    all_gx = []
    all_gy = []
    for case in ("regular", "coincident", "edge", "vertex"):
        entries = groups[case]
        if not entries:
            continue
        parr = np.array([(e[0], e[1]) for e in entries], dtype=np.int64)
        locx = np.array([e[2] for e in entries], dtype=np.int64)
        locy = np.array([e[3] for e in entries], dtype=np.int64)
        if case == "regular":
            rule = pair_rule_regular(config.q_reg)
        else:
            n_rad = config.n_rad
            if n_rad is None:
                tmax = mesh.tri_distance_bounds[1]
                rmax = float(tmax[parr[:, 0], parr[:, 1]].max())
                n_rad = min(8, max(1, math.ceil(3.0 * rmax / grid.dt)))
            rule = singular_rule(case, config.q_sing, n_rad, 2 if n_rad > 1 else 1)
        all_vals.append(_pair_group_values(mesh, pack, parr, locx, locy, rule))
        ax = np.arange(len(parr))
        all_gx.append(mesh.triangles[parr[:, 0]][ax[:, None], locx])
        all_gy.append(mesh.triangles[parr[:, 1]][ax[:, None], locy])
    vals = np.concatenate(all_vals)
    gx = np.concatenate(all_gx)
    gy = np.concatenate(all_gy)

    rows = np.broadcast_to(gy[:, :, None], (len(gy), 3, 3)).reshape(-1)
    cols = np.broadcast_to(gx[:, None, :], (len(gx), 3, 3)).reshape(-1)
    keep = pattern.dof_mask[rows, cols]
    out = []
    for m2 in range(np1):
        row_blocks = []
        for m1 in range(np1):
            v = vals[:, m2, m1].reshape(-1)
            row_blocks.append(_kahan_csr(rows[keep], cols[keep], v[keep], m))
        out.append(row_blocks)
    return out


def assemble_block(mesh, grid, tables, kt, it, m2, m1, config=QuadratureConfig()):
    """Single sub-block A^{m2,m1}_{kt,it} as a CSR matrix."""
    return assemble_subblocks(mesh, grid, tables, kt, it, config)[m2][m1]


def assemble_rhs(mesh: SurfaceMesh, grid: TimeGrid, g, config: QuadratureConfig = QuadratureConfig()) -> np.ndarray:
    """Load vector with components integral of g(x,t) phi_l(x) bdot_k(t).

    g maps (points (n,3), time scalar) to values (n,).  The component for
    flat temporal index k and spatial dof l sits at (k-1)*M + l.  Time uses
    Gauss panels of 2(p+4) points per quarter step over the basis support,
    space the regular triangle rule on every element.
    """
    m = mesh.num_vertices
    pts, w = triangle_rule(config.q_reg)
    corners = mesh.corners
    X = (
        corners[:, None, 0, :]
        + pts[None, :, 0, None] * (corners[:, 1] - corners[:, 0])[:, None, :]
        + pts[None, :, 1, None] * (corners[:, 2] - corners[:, 1])[:, None, :]
    ).reshape(-1, 3)
    wx = (w[None, :] * 2.0 * mesh.areas[:, None]).reshape(-1)
    sh = np.column_stack([1.0 - pts[:, 0], pts[:, 0] - pts[:, 1], pts[:, 1]])
    dofs = np.repeat(mesh.triangles, len(pts), axis=0)  # (E*nq, 3)
    shw = np.tile(sh, (mesh.num_triangles, 1)) * wx[:, None]

    xg, wg = gauss_rule(2 * (grid.p + 4))
    out = np.zeros(grid.L * m)
    dt = grid.dt
    for k in range(1, grid.L + 1):
        idx = flat_index(grid, (k - 1) // (grid.p + 1) + 1, (k - 1) % (grid.p + 1))
        lo, hi = support_interval(grid, idx.timestep)
        nhalf = max(1, round((hi - lo) / (0.25 * dt)))
        comp = np.zeros(m)
        for panel in range(nhalf):
            a = lo + (hi - lo) * panel / nhalf
            b = lo + (hi - lo) * (panel + 1) / nhalf
            tq = 0.5 * (a + b) + 0.5 * (b - a) * xg
            tw = 0.5 * (b - a) * wg * basis_b(grid, idx, tq, deriv=1)
            for ts, ws in zip(tq, tw):
                if ws == 0.0:
                    continue
                gv = np.asarray(g(X, ts), dtype=float)
                contrib = shw * gv[:, None] * ws
                comp += np.bincount(dofs.reshape(-1), weights=contrib.reshape(-1), minlength=m)
        out[(k - 1) * m : k * m] = comp
    return out
