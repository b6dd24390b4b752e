"""Univariate kernel weights and their piecewise Chebyshev tables.

The Galerkin matrix entries reduce the temporal structure of the bilinear
form to two univariate functions of the distance r: a weight pairing the
second time derivative of one basis function against the first derivative of
another, and its milder companion pairing values against first derivatives.
For equidistant steps both reduce to shift-invariant prototype functions of a
single offset variable, which are approximated once by piecewise Chebyshev
polynomials and evaluated with the Clenshaw recurrence.

Prototype variants are labelled by the timestep kind of each factor:
'first' (support one step, extra quadratic factor), 'inner' (two steps) and
'last' (one step).  Inner-inner prototypes are stored on the non-negative
half of their support for lower-triangular order pairs only; the even/odd and
order-swap symmetries recover everything else.  Boundary variants lack those
symmetries and are stored in full.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .quad1d import adaptive_gauss, gauss_rule
from .temporal_basis import (
    TimeGrid,
    canonical_basis,
    canonical_basis_all,
    canonical_origin,
    canonical_support,
    decode_flat,
    timestep_kind,
)

__all__ = [
    "PrototypeTables",
    "PiecewiseCheb",
    "build_tables",
    "prototype_direct",
    "eval_psi",
    "psi_direct",
    "clenshaw",
]

KINDS = ("first", "inner", "last")


def clenshaw(coeffs, x):
    """Evaluate sum_k c_k T_k(x) by the backward (Clenshaw) recurrence.

    x may be a scalar or array in [-1, 1]; values are clamped at a 1e-12
    slack to absorb interval-endpoint roundoff.
    """
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1.0 + 1e-12):
        raise ValueError("Clenshaw argument outside [-1, 1]")
    x = np.clip(x, -1.0, 1.0)
    b1 = np.zeros_like(x)
    b2 = np.zeros_like(x)
    for c in reversed(coeffs[1:]):
        b1, b2 = 2.0 * x * b1 - b2 + c, b1
    return x * b1 - b2 + coeffs[0]


@lru_cache(maxsize=None)
def _lobatto_matrix(deg: int) -> tuple[np.ndarray, np.ndarray]:
    """Chebyshev-Lobatto nodes on [-1,1] and the node-values -> coeffs map."""
    j = np.arange(deg + 1)
    nodes = np.cos(np.pi * j / deg)
    D = np.cos(np.pi * np.outer(j, j) / deg) * (2.0 / deg)
    D[:, 0] *= 0.5
    D[:, -1] *= 0.5
    D[0] *= 0.5
    D[-1] *= 0.5
    return nodes, D


@dataclass(frozen=True)
class PiecewiseCheb:
    """Chebyshev interpolant on equal subintervals of [lo, hi]."""

    lo: float
    hi: float
    coeffs: np.ndarray  # (n_sub, deg + 1)

    @property
    def n_sub(self) -> int:
        return self.coeffs.shape[0]

    @property
    def width(self) -> float:
        return (self.hi - self.lo) / self.n_sub

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        out = np.zeros_like(x)
        inside = (x >= self.lo) & (x <= self.hi)
        if np.any(inside):
            xi = x[inside]
            idx = np.minimum(((xi - self.lo) / self.width).astype(int), self.n_sub - 1)
            loc = 2.0 * (xi - self.lo - idx * self.width) / self.width - 1.0
            vals = np.empty_like(xi)
            for k in np.unique(idx):
                sel = idx == k
                vals[sel] = clenshaw(self.coeffs[k], loc[sel])
            out[inside] = vals
        return float(out[0]) if scalar else out

    @classmethod
    def build(cls, f, lo: float, hi: float, n_sub: int, deg: int) -> "PiecewiseCheb":
        nodes, D = _lobatto_matrix(deg)
        width = (hi - lo) / n_sub
        coeffs = np.empty((n_sub, deg + 1))
        for k in range(n_sub):
            a = lo + k * width
            xs = a + 0.5 * width * (nodes + 1.0)
            coeffs[k] = D @ np.array([f(x) for x in xs])
        return cls(lo, hi, coeffs)


def prototype_direct(
    grid: TimeGrid,
    kind_i: str,
    kind_k: str,
    m1: int,
    m2: int,
    tilde: bool,
    alpha: float,
    tol: float = 1e-13,
) -> float:
    """Defining integral of a prototype function by adaptive quadrature.

    Integrates the canonical ansatz factor (value for the tilde variant,
    second derivative otherwise) shifted by ``alpha`` against the first
    derivative of the canonical test factor.  The integration range is the
    support overlap; panels split at the step-size multiples and their shifts,
    where the first-interval prototypes lose smoothness.
    """
    len_i = canonical_support(grid, kind_i)
    len_k = canonical_support(grid, kind_k)
    lo = max(0.0, alpha)
    hi = min(len_k, alpha + len_i)
    if hi <= lo:
        return 0.0
    d1 = 0 if tilde else 2

    def integrand(u):
        return canonical_basis(grid, kind_i, m1, u - alpha, d1) * canonical_basis(
            grid, kind_k, m2, u, 1
        )

    dt = grid.dt
    breaks = [j * dt for j in range(int(len_k / dt) + 1)]
    breaks += [alpha + j * dt for j in range(int(len_i / dt) + 1)]
    return adaptive_gauss(integrand, lo, hi, tol=tol, breakpoints=breaks)


def table_domain(grid: TimeGrid, kind_i: str, kind_k: str) -> tuple[float, float] | None:
    """Stored offset range of the prototype table for a variant pair.

    The natural support is [-len_i, len_k].  Inner-inner tables keep only the
    non-negative half (symmetry).  Variants whose ansatz factor is the
    last-timestep function are restricted to the offsets reachable with
    non-negative distances, which also keeps the integrand clear of the
    end-of-interval cut of that function; the last/first combination is
    unreachable entirely.
    """
    dt = grid.dt
    len_i = canonical_support(grid, kind_i)
    len_k = canonical_support(grid, kind_k)
    lo, hi = -len_i, len_k
    if kind_i == "inner" and kind_k == "inner":
        return 0.0, hi
    if kind_i == "last":
        if kind_k == "first":
            return None
        lo = dt if kind_k == "inner" else 0.0
    elif kind_k == "first":
        lo = 0.0  # ansatz offsets are non-negative when the test factor is first
    return lo, hi


class PrototypeTables:
    """Piecewise Chebyshev tables for all prototype variants of one grid.

    Boundary variants (involving the 'first' or 'last' family) get a finer
    subdivision: the cutoff tails make those prototypes nearly flat yet
    oscillatory near the domain edges, where plain Chebyshev degree converges
    slowly.
    """

    def __init__(
        self,
        grid: TimeGrid,
        deg: int = 16,
        n_per_step: int = 8,
        n_per_step_boundary: int = 32,
        nq: int = 32,
    ):
        self.grid = grid
        self.deg = deg
        self.n_per_step = n_per_step
        self.n_per_step_boundary = n_per_step_boundary
        self.nq = nq
        self.tables: dict[tuple[bool, str, str, int, int], PiecewiseCheb | None] = {}

    def key_iter(self):
        p = self.grid.p
        for tilde in (True, False):
            for kind_i in KINDS:
                for kind_k in KINDS:
                    for m1 in range(p + 1):
                        for m2 in range(p + 1):
                            if kind_i == "inner" and kind_k == "inner" and m1 > m2:
                                continue
                            yield tilde, kind_i, kind_k, m1, m2

    def _panel_plan(self, kind_i: str, kind_k: str, a_mid: float):
        """Panel endpoints of the defining integral, affine in the offset.

        Each endpoint is a pair (c, s) encoding c + s*alpha.  The ordering is
        constant across one table subinterval because endpoint crossings only
        happen at step-size multiples, which are subinterval edges.
        """
        grid = self.grid
        dt = grid.dt
        len_i = canonical_support(grid, kind_i)
        len_k = canonical_support(grid, kind_k)
        lo = (0.0, 1.0) if a_mid > 0.0 else (0.0, 0.0)
        hi = (len_i, 1.0) if a_mid + len_i < len_k else (len_k, 0.0)
        val = lambda cs: cs[0] + cs[1] * a_mid
        cands = [(j * dt, 0.0) for j in range(int(round(len_k / dt)) + 1)]
        cands += [(j * dt, 1.0) for j in range(int(round(len_i / dt)) + 1)]
        inner = [cs for cs in cands if val(lo) < val(cs) < val(hi)]
        pts = [lo] + sorted(inner, key=val) + [hi]
        return list(zip(pts[:-1], pts[1:]))

    def build(self) -> "PrototypeTables":
        grid = self.grid
        p = grid.p
        dt = grid.dt
        nodes, D = _lobatto_matrix(self.deg)
        xq, wq = gauss_rule(self.nq)
        for kind_i in KINDS:
            for kind_k in KINDS:
                dom = table_domain(grid, kind_i, kind_k)
                if dom is None or dom[1] <= dom[0]:
                    for tilde in (True, False):
                        for m1 in range(p + 1):
                            for m2 in range(p + 1):
                                self.tables[(tilde, kind_i, kind_k, m1, m2)] = None
                    continue
                lo, hi = dom
                boundary = kind_i != "inner" or kind_k != "inner"
                n_per = self.n_per_step_boundary if boundary else self.n_per_step
                n_sub = max(1, round((hi - lo) / dt * n_per))
                width = (hi - lo) / n_sub
                # node values of both weight variants, all order pairs
                vals = np.zeros((2, p + 1, p + 1, n_sub, self.deg + 1))
                for ks in range(n_sub):
                    a0 = lo + ks * width
                    alphas = a0 + 0.5 * width * (nodes + 1.0)
                    for (c1, s1), (c2, s2) in self._panel_plan(kind_i, kind_k, a0 + 0.5 * width):
                        pa = c1 + s1 * alphas
                        pb = c2 + s2 * alphas
                        nominal = (c2 + s2 * (a0 + 0.5 * width)) - (c1 + s1 * (a0 + 0.5 * width))
                        splits = max(1, math.ceil(4.0 * nominal / dt))
                        for j in range(splits):
                            qa = pa + (pb - pa) * (j / splits)
                            qb = pa + (pb - pa) * ((j + 1) / splits)
                            half = 0.5 * (qb - qa)
                            U = 0.5 * (qa + qb)[:, None] + half[:, None] * xq[None, :]
                            W = np.maximum(half, 0.0)[:, None] * wq[None, :]
                            shifted = U - alphas[:, None]
                            A2 = canonical_basis_all(grid, kind_i, p, shifted, 2)
                            A0 = canonical_basis_all(grid, kind_i, p, shifted, 0)
                            WT = W[None] * canonical_basis_all(grid, kind_k, p, U, 1)
                            vals[0, :, :, ks, :] += np.einsum("iaq,kaq->ika", A2, WT)
                            vals[1, :, :, ks, :] += np.einsum("iaq,kaq->ika", A0, WT)
                coeffs = np.einsum("ij,tmnkj->tmnki", D, vals)
                for tilde in (True, False):
                    v = coeffs[1 if tilde else 0]
                    for m1 in range(p + 1):
                        for m2 in range(p + 1):
                            if kind_i == "inner" and kind_k == "inner" and m1 > m2:
                                continue
                            self.tables[(tilde, kind_i, kind_k, m1, m2)] = PiecewiseCheb(
                                lo, hi, v[m1, m2]
                            )
        return self

    def resolve(self, tilde: bool, kind_i: str, kind_k: str, m1: int, m2: int):
        """Table plus sign factors for one weight-function evaluation.

        Returns ``(table, sign_pos, sign_neg, fold)``: the weight value at
        offset a is ``sign_pos * table(a)`` for a >= 0 and
        ``sign_neg * table(-a)`` for a < 0 when ``fold`` is set, or plainly
        ``table(a)`` otherwise.  ``table`` may be None (identically zero).
        """
        if kind_i == "inner" and kind_k == "inner":
            parity = (-1) ** (m1 + m2)
            if m1 <= m2:
                tbl = self.tables[(tilde, kind_i, kind_k, m1, m2)]
                return tbl, 1.0, float(-parity), True
            tbl = self.tables[(tilde, kind_i, kind_k, m2, m1)]
            return tbl, float(parity), -1.0, True
        return self.tables[(tilde, kind_i, kind_k, m1, m2)], 1.0, 1.0, False

    def eval_offset(self, tilde, kind_i, kind_k, m1, m2, a):
        """Evaluate one weight prototype at offset(s) a with symmetry applied."""
        tbl, sp, sn, fold = self.resolve(tilde, kind_i, kind_k, m1, m2)
        if tbl is None:
            return np.zeros_like(np.asarray(a, dtype=float)) if np.ndim(a) else 0.0
        a = np.asarray(a, dtype=float)
        if not fold:
            return tbl(a)
        return np.where(a >= 0.0, sp * tbl(a), sn * tbl(-a))


def build_tables(grid: TimeGrid, **kwargs) -> PrototypeTables:
    """Build all prototype tables for a grid (count independent of N)."""
    return PrototypeTables(grid, **kwargs).build()


_TABLE_CACHE: dict[tuple, PrototypeTables] = {}


def tables_for(grid: TimeGrid) -> PrototypeTables:
    """Default-parameter tables, cached by (dt, p); they do not depend on N."""
    key = (round(grid.dt, 15), grid.p)
    tabs = _TABLE_CACHE.get(key)
    if tabs is None:
        tabs = _TABLE_CACHE[key] = build_tables(grid)
    return tabs


def _offsets(grid: TimeGrid, k_flat: int, i_flat: int):
    k = decode_flat(grid, k_flat)
    i = decode_flat(grid, i_flat)
    kind_i = timestep_kind(grid, i.timestep)
    kind_k = timestep_kind(grid, k.timestep)
    delta = canonical_origin(grid, i.timestep) - canonical_origin(grid, k.timestep)
    return k, i, kind_i, kind_k, delta


def is_zero_pair(grid: TimeGrid, k_tilde: int, i_tilde: int) -> bool:
    """Causality cut: the weights vanish identically when the test support
    ends no later than the ansatz support starts."""
    return grid.t_formal(k_tilde) <= grid.t_formal(i_tilde - 2)


def eval_psi(
    tables: PrototypeTables, grid: TimeGrid, k: int, i: int, r, tilde: bool
):
    """Kernel weight for flat basis indices (k, i) at distance(s) r >= 0."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0.0):
        raise ValueError("distance must be non-negative")
    ki, ii, kind_i, kind_k, delta = _offsets(grid, k, i)
    if is_zero_pair(grid, ki.timestep, ii.timestep):
        return np.zeros_like(r) if r.ndim else 0.0
    out = tables.eval_offset(tilde, kind_i, kind_k, ii.order, ki.order, r + delta)
    return out if r.ndim else float(out)


def psi_direct(grid: TimeGrid, k: int, i: int, r: float, tilde: bool) -> float:
    """Slow reference evaluation of the kernel weight by direct quadrature."""
    if r < 0.0:
        raise ValueError("distance must be non-negative")
    ki, ii, kind_i, kind_k, delta = _offsets(grid, k, i)
    if is_zero_pair(grid, ki.timestep, ii.timestep):
        return 0.0
    return prototype_direct(grid, kind_i, kind_k, ii.order, ki.order, tilde, r + delta)


def psi_support(grid: TimeGrid, k_tilde: int, i_tilde: int) -> tuple[float, float]:
    """Distance support [max(0, t_{k-2} - t_i), t_k - t_{i-2}] of the weights."""
    lo = max(0.0, grid.t_formal(k_tilde - 2) - grid.t_formal(i_tilde))
    hi = grid.t_formal(k_tilde) - grid.t_formal(i_tilde - 2)
    return lo, hi
