"""Smooth, compactly supported temporal basis functions on an equidistant grid.

The basis combines a C-infinity partition of unity (built from an
erf/artanh cutoff) with scaled Legendre polynomials.  Three families exist:
the first-interval functions carry an extra ``t**2`` factor enforcing zero
value and velocity at t=0, the inner functions are shifted copies of a single
prototype, and the last-interval functions ramp up on the final timestep.
All values and the first two time derivatives are available analytically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

__all__ = [
    "TimeGrid",
    "TemporalBasisIndex",
    "cutoff_f",
    "partition_mu",
    "basis_b",
    "legendre_P",
    "legendre_table",
]

_TWO_OVER_SQRTPI = 2.0 / math.sqrt(math.pi)
# artanh overflows at |t|=1; f saturates to 0/1 exactly in double precision
# well before the clamp is reached, so clamping is lossless.
_CLAMP = 1.0 - 1e-14


@dataclass(frozen=True)
class TimeGrid:
    """Equidistant temporal grid on [0, T] with local polynomial order p.

    The grid has ``N`` points ``t_i = i*dt`` for ``i = 0..N-1`` with
    ``dt = T/(N-1)``.  Each timestep carries ``p+1`` basis functions, for a
    total of ``L = N*(p+1)``.
    """

    T: float
    N: int
    p: int

    def __post_init__(self) -> None:
        if self.T <= 0:
            raise ValueError(f"final time T must be positive, got {self.T}")
        if self.N < 3:
            raise ValueError(f"need at least 3 timesteps, got N={self.N}")
        if self.p < 0:
            raise ValueError(f"polynomial order must be >= 0, got p={self.p}")

    @property
    def dt(self) -> float:
        return self.T / (self.N - 1)

    @property
    def L(self) -> int:
        return self.N * (self.p + 1)

    def t(self, i: int) -> float:
        """Grid point t_i for 0 <= i <= N-1."""
        return i * self.dt

    def t_formal(self, i: int) -> float:
        """Grid point extended by the conventions t_{-1} = 0 and t_N = T."""
        return min(max(i, 0), self.N - 1) * self.dt


class TemporalBasisIndex(NamedTuple):
    """One-based flat index i together with its (timestep, order) split."""

    flat: int
    timestep: int
    order: int


def flat_index(grid: TimeGrid, timestep: int, order: int) -> TemporalBasisIndex:
    """Build the index for basis function b_{timestep, order}."""
    if not 1 <= timestep <= grid.N:
        raise ValueError(f"timestep {timestep} outside 1..{grid.N}")
    if not 0 <= order <= grid.p:
        raise ValueError(f"order {order} outside 0..{grid.p}")
    flat = (timestep - 1) * (grid.p + 1) + order + 1
    return TemporalBasisIndex(flat, timestep, order)


def decode_flat(grid: TimeGrid, flat: int) -> TemporalBasisIndex:
    """Recover (timestep, order) from a one-based flat index."""
    if not 1 <= flat <= grid.L:
        raise ValueError(f"flat index {flat} outside 1..{grid.L}")
    timestep = -(-flat // (grid.p + 1))
    order = (flat - 1) % (grid.p + 1)
    return TemporalBasisIndex(flat, timestep, order)


from scipy.special import erf as _erf


def cutoff_f(t, deriv: int = 0):
    """C-infinity step 0 -> 1 on [-1, 1], or its first/second derivative.

    ``f(t) = erf(2*artanh(t))/2 + 1/2`` for |t| < 1, extended by the constants
    0 and 1.  Derivatives underflow to exactly 0 at the junctions.
    """
    t = np.asarray(t, dtype=float)
    scalar = t.ndim == 0
    t = np.atleast_1d(t)
    tc = np.clip(t, -_CLAMP, _CLAMP)
    a = np.arctanh(tc)
    with np.errstate(under="ignore"):
        e = np.exp(-4.0 * a * a)
    inside = np.abs(t) < 1.0

    if deriv == 0:
        out = np.where(t <= -1.0, 0.0, np.where(t >= 1.0, 1.0, 0.5 * _erf(2.0 * a) + 0.5))
    else:
        omt2 = 1.0 - tc * tc
        if deriv == 1:
            val = _TWO_OVER_SQRTPI * e / omt2
        elif deriv == 2:
            val = _TWO_OVER_SQRTPI * e * (2.0 * tc - 8.0 * a) / (omt2 * omt2)
        else:
            raise ValueError(f"deriv must be 0, 1 or 2, got {deriv}")
        out = np.where(inside & (e > 0.0), val, 0.0)
    return float(out[0]) if scalar else out


def legendre_table(pmax: int, x: np.ndarray):
    """Values and first two derivatives of P_0..P_pmax at the points x.

    Returns three arrays of shape (pmax+1,) + x.shape.
    """
    x = np.asarray(x, dtype=float)
    shape = (pmax + 1,) + x.shape
    P = np.empty(shape)
    P1 = np.empty(shape)
    P2 = np.empty(shape)
    P[0], P1[0], P2[0] = 1.0, 0.0, 0.0
    if pmax >= 1:
        P[1], P1[1], P2[1] = x, 1.0, 0.0
    for m in range(2, pmax + 1):
        a, b = (2 * m - 1) / m, (m - 1) / m
        P[m] = a * x * P[m - 1] - b * P[m - 2]
        P1[m] = a * (P[m - 1] + x * P1[m - 1]) - b * P1[m - 2]
        P2[m] = a * (2.0 * P1[m - 1] + x * P2[m - 1]) - b * P2[m - 2]
    return P, P1, P2


def legendre_P(m: int, x, deriv: int = 0):
    """Legendre polynomial P_m (or derivative) via the three-term recurrence."""
    if m < 0:
        raise ValueError("degree must be non-negative")
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    tabs = legendre_table(m, np.atleast_1d(x))
    out = tabs[deriv][m]
    return float(out[0]) if scalar else out


def _ramp(grid: TimeGrid, u, deriv: int):
    """f(2u/dt - 1) and derivatives with respect to u (ramp on [0, dt])."""
    c = 2.0 / grid.dt
    return cutoff_f(c * np.asarray(u, dtype=float) - 1.0, deriv) * c**deriv


def partition_mu(grid: TimeGrid, i: int, t) -> np.ndarray | float:
    """Partition-of-unity function mu_i on [0, T] (value only, 1 <= i <= N)."""
    if not 1 <= i <= grid.N:
        raise ValueError(f"partition index {i} outside 1..{grid.N}")
    t = np.asarray(t, dtype=float)
    scalar = t.ndim == 0
    t = np.atleast_1d(t)
    dt = grid.dt
    if i == 1:
        out = np.where(t <= 0.0, 1.0, 1.0 - _ramp(grid, t, 0))
    elif i == grid.N:
        out = np.where(t >= grid.T, 1.0, _ramp(grid, t - grid.t(grid.N - 2), 0))
    else:
        u = t - grid.t(i - 2)
        rising = _ramp(grid, u, 0)
        falling = 1.0 - _ramp(grid, u - dt, 0)
        out = np.where(u <= dt, rising, falling)
        out[(u <= 0.0) | (u >= 2.0 * dt)] = 0.0
    return float(out[0]) if scalar else out


def _bump(grid: TimeGrid, u, deriv: int) -> np.ndarray:
    """Inner bump rho on [0, 2*dt] with midpoint dt, derivative wrt u."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    dt = grid.dt
    rising = _ramp(grid, u, deriv)
    falling = (1.0 - _ramp(grid, u - dt, 0)) if deriv == 0 else -_ramp(grid, u - dt, deriv)
    out = np.where(u <= dt, rising, falling)
    out[(u <= 0.0) | (u >= 2.0 * dt)] = 0.0
    return out


def canonical_support(grid: TimeGrid, kind: str) -> float:
    """Length of the canonical support: dt for 'first'/'last', 2*dt for 'inner'."""
    return 2.0 * grid.dt if kind == "inner" else grid.dt


def timestep_kind(grid: TimeGrid, timestep: int) -> str:
    if timestep == 1:
        return "first"
    if timestep == grid.N:
        return "last"
    return "inner"


def canonical_origin(grid: TimeGrid, timestep: int) -> float:
    """Shift mapping b_{timestep,m} onto its canonical prototype at the origin."""
    kind = timestep_kind(grid, timestep)
    if kind == "first":
        return 0.0
    if kind == "last":
        return grid.t(grid.N - 2)
    return grid.t(timestep - 2)


def canonical_basis_all(grid: TimeGrid, kind: str, pmax: int, u, deriv: int = 0) -> np.ndarray:
    """Canonical prototypes of all orders 0..pmax at once, shape (pmax+1,) + u.shape.

    kind 'first' lives on [0, dt] with the 8*(u/dt)^2 factor, 'inner' on
    [0, 2*dt], 'last' on [0, dt].  Exactly zero outside the support.
    """
    if deriv not in (0, 1, 2):
        raise ValueError(f"deriv must be 0, 1 or 2, got {deriv}")
    u = np.atleast_1d(np.asarray(u, dtype=float))
    dt = grid.dt
    c = 2.0 / dt
    if kind == "inner":
        x = u / dt - 1.0
        P, P1, P2 = legendre_table(pmax, x)
        rho = _bump(grid, u, 0)
        if deriv == 0:
            out = rho * P
        elif deriv == 1:
            out = _bump(grid, u, 1) * P + rho * P1 / dt
        else:
            out = _bump(grid, u, 2) * P + 2.0 * _bump(grid, u, 1) * P1 / dt + rho * P2 / dt**2
        out[:, (u <= 0.0) | (u >= 2.0 * dt)] = 0.0
        return out

    x = c * u - 1.0
    P, P1, P2 = legendre_table(pmax, x)
    if kind == "last":
        F = [cutoff_f(x, d) for d in range(3)]
        if deriv == 0:
            out = F[0] * P
        elif deriv == 1:
            out = c * (F[1] * P + F[0] * P1)
        else:
            out = c * c * (F[2] * P + 2.0 * F[1] * P1 + F[0] * P2)
        out[:, (u <= 0.0) | (u > dt)] = 0.0
        return out

    if kind != "first":
        raise ValueError(f"unknown basis kind {kind!r}")
    g = 1.0 - cutoff_f(x, 0)
    g1 = -c * cutoff_f(x, 1)
    g2 = -c * c * cutoff_f(x, 2)
    q = (u / dt) ** 2
    q1 = 2.0 * u / dt**2
    q2 = 2.0 / dt**2
    if deriv == 0:
        out = 8.0 * g * q * P
    elif deriv == 1:
        out = 8.0 * (g1 * q * P + g * q1 * P + g * q * P1 * c)
    else:
        out = 8.0 * (
            g2 * q * P
            + g * q2 * P
            + g * q * P2 * c * c
            + 2.0 * g1 * q1 * P
            + 2.0 * g1 * q * P1 * c
            + 2.0 * g * q1 * P1 * c
        )
    out[:, (u <= 0.0) | (u >= dt)] = 0.0
    return out


def canonical_basis(grid: TimeGrid, kind: str, m: int, u, deriv: int = 0) -> np.ndarray:
    """Canonical basis prototype of order m (see canonical_basis_all)."""
    return canonical_basis_all(grid, kind, m, u, deriv)[m]


def basis_b(grid: TimeGrid, idx: TemporalBasisIndex | int, t, deriv: int = 0):
    """Temporal basis function b_i(t) or its first/second time derivative.

    Accepts either a flat index or a TemporalBasisIndex; values are exactly
    zero outside the support interval of the function.
    """
    if isinstance(idx, (int, np.integer)):
        idx = decode_flat(grid, int(idx))
    t = np.asarray(t, dtype=float)
    scalar = t.ndim == 0
    u = np.atleast_1d(t) - canonical_origin(grid, idx.timestep)
    out = canonical_basis(grid, timestep_kind(grid, idx.timestep), idx.order, u, deriv)
    return float(out[0]) if scalar else out


def support_interval(grid: TimeGrid, timestep: int) -> tuple[float, float]:
    """Closed support [t_{i-2}, t_i] of b_{timestep,m} (formal conventions)."""
    o = canonical_origin(grid, timestep)
    return o, o + canonical_support(grid, timestep_kind(grid, timestep))
