"""One-dimensional Gauss-Legendre quadrature with adaptive bisection."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

__all__ = ["gauss_rule", "fixed_gauss", "adaptive_gauss"]


@lru_cache(maxsize=None)
def gauss_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1]."""
    return np.polynomial.legendre.leggauss(n)


def fixed_gauss(f, a: float, b: float, n: int = 32) -> float:
    """n-point Gauss-Legendre approximation of the integral of f over [a, b]."""
    x, w = gauss_rule(n)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return half * float(np.dot(w, f(mid + half * x)))


def adaptive_gauss(
    f,
    a: float,
    b: float,
    tol: float = 1e-13,
    n: int = 32,
    breakpoints=None,
    max_depth: int = 30,
) -> float:
    """Adaptive panel integration of a vectorized integrand.

    Panels are bisected until the change between a parent panel and the sum of
    its halves drops below the (panel-length-weighted) tolerance.  Known
    non-smooth points can be passed via ``breakpoints`` so the initial panels
    align with them.
    """
    if b <= a:
        return 0.0
    edges = [a, b]
    if breakpoints is not None:
        edges.extend(p for p in breakpoints if a < p < b)
    edges = sorted(set(edges))

    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        total += _adaptive_panel(f, lo, hi, tol * (hi - lo) / (b - a), n, max_depth)
    return total


def _adaptive_panel(f, a, b, tol, n, depth) -> float:
    coarse = fixed_gauss(f, a, b, n)
    mid = 0.5 * (a + b)
    fine = fixed_gauss(f, a, mid, n) + fixed_gauss(f, mid, b, n)
    if abs(fine - coarse) <= max(tol, 1e-16 * abs(fine)) or depth <= 0:
        return fine
    return _adaptive_panel(f, a, mid, 0.5 * tol, n, depth - 1) + _adaptive_panel(
        f, mid, b, 0.5 * tol, n, depth - 1
    )
