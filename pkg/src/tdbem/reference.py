"""Analytic unit-sphere references, incident wave data, and error norms.

For right-hand sides g(t) Y_n^m(x) on the unit sphere the hypersingular
equation has closed-form solutions for n = 0 (all t, an alternating double
sum of retarded convolution integrals) and n = 1 (t < 2, a single
convolution).  Real L2-normalized spherical harmonics are used throughout;
the convergence studies are invariant under this normalization choice as
long as the data and the reference share it.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb, factorial

import numpy as np
from scipy.integrate import quad

from .mesh import SurfaceMesh
from .quadrature import shape_values, triangle_rule
from .quad1d import gauss_rule
from .temporal_basis import TimeGrid, basis_b

__all__ = [
    "sph_harm_real",
    "IncidentWave",
    "incident_neumann",
    "reference_n0",
    "reference_n1",
    "l2_spacetime_error",
    "c_coeff",
]


def sph_harm_real(n: int, m: int, x: np.ndarray) -> np.ndarray:
    """Real L2-normalized spherical harmonic of degree n <= 1 at unit points."""
    x = np.atleast_2d(x)
    if n == 0:
        return np.full(len(x), 0.5 / np.sqrt(np.pi))
    if n == 1:
        c = np.sqrt(3.0 / (4.0 * np.pi))
        comp = {-1: 1, 0: 2, 1: 0}[m]
        return c * x[:, comp]
    raise ValueError(f"degree {n} not supported (only n in {{0, 1}})")


@dataclass(frozen=True)
class IncidentWave:
    """Windowed planar incident wave u^inc = A cos(k.x + phi0 - omega t)."""

    amplitude: float = 0.02
    wave_vector: tuple = (-np.pi / np.sqrt(2.0), 0.0, -np.pi / np.sqrt(2.0))
    omega: float = np.pi
    phi0: float = 0.0
    m_f: float = 6.0 * np.pi
    m_t: float = 8.0 * np.pi

    def __post_init__(self):
        if not self.m_f < self.m_t:
            raise ValueError("window bounds must satisfy m_f < m_t")

    def field(self, x: np.ndarray, t: float) -> np.ndarray:
        """Incident field value with the travelling window applied."""
        x = np.atleast_2d(x)
        k = np.asarray(self.wave_vector)
        kx = x @ k
        phase = kx + self.phi0 - self.omega * t
        active = (self.omega * t - self.m_f >= kx) & (kx >= self.omega * t - self.m_t)
        return np.where(active, self.amplitude * np.cos(phase), 0.0)


def incident_neumann(wave: IncidentWave, x: np.ndarray, n: np.ndarray, t: float):
    """Neumann datum -d(u^inc)/dn = A sin(k.x + phi0 - omega t) k.n, windowed."""
    x = np.atleast_2d(x)
    n = np.atleast_2d(n)
    k = np.asarray(wave.wave_vector)
    kx = x @ k
    kn = n @ k
    val = wave.amplitude * np.sin(kx + wave.phi0 - wave.omega * t) * kn
    active = (wave.omega * t - wave.m_f >= kx) & (kx >= wave.omega * t - wave.m_t)
    return np.where(active, val, 0.0)


def c_coeff(k: int, l: int) -> float:
    """Series coefficient binom(k-1, l-1) 2^(k-l) / (k-l+1)!."""
    return comb(k - 1, l - 1) * 2.0 ** (k - l) / factorial(k - l + 1)


def _num_derivative(g, t: float, h: float = 1e-5) -> float:
    """Fourth-order central difference, clipped to t >= 0 causality."""
    def gv(s):
        return g(s) if s >= 0.0 else 0.0
    return (gv(t - 2 * h) - 8 * gv(t - h) + 8 * gv(t + h) - gv(t + 2 * h)) / (12 * h)


def reference_n0(g, t: float, quad_tol: float = 1e-10, gdot=None) -> float:
    """Exact density phi(t) for right-hand side g(t) Y_0^0 on the unit sphere.

    phi(t) = 2 int_0^t g(t-tau) cosh(tau) dtau
             - 2 sum_{k=1}^{floor(t/2)} sum_{l=1}^{k} (-1)^{k+1}
               int_{2k}^t c_{k,l} (tau-2k)^{k-l+1} e^{tau-2k} gdot(t-tau) dtau.

    The overall sign follows the double layer ansatz u = D phi with
    D = -(1/4pi) int n_y.(x-y)/r (phi/r^2 + phi_t/r); in the Laplace domain
    the n=0 eigenvalue of the induced hypersingular operator satisfies
    1/lambda_0(s) ~ +2s/(s^2-1) for large s, fixing the kernel +2cosh(tau)
    on [0,2).
    """
    if t <= 0.0:
        return 0.0
    if gdot is None:
        gdot = lambda s: _num_derivative(g, s)
    total, _ = quad(lambda tau: g(t - tau) * np.cosh(tau), 0.0, t,
                    epsabs=quad_tol, epsrel=quad_tol, limit=400)
    total *= 2.0
    for k in range(1, int(np.floor(t / 2.0)) + 1):
        for l in range(1, k + 1):
            c = c_coeff(k, l)
            val, _ = quad(
                lambda tau: c * (tau - 2 * k) ** (k - l + 1) * np.exp(tau - 2 * k)
                * gdot(t - tau),
                2.0 * k, t, epsabs=quad_tol, epsrel=quad_tol, limit=400,
            )
            total -= 2.0 * (-1) ** (k + 1) * val
    return total


def reference_n1(g, t: float, quad_tol: float = 1e-10) -> float:
    """Time factor of the exact density for g(t) Y_1^m, valid for t in [0, 2).

    Sign convention as in reference_n0: the Laplace-domain n=1 eigenvalue
    gives the kernel +2 cosh(tau) cos(tau) on [0, 2).
    """
    if not 0.0 <= t < 2.0:
        raise ValueError(f"time {t} outside the validity interval [0, 2)")
    if t == 0.0:
        return 0.0
    val, _ = quad(lambda tau: g(t - tau) * np.cosh(tau) * np.cos(tau), 0.0, t,
                  epsabs=quad_tol, epsrel=quad_tol, limit=400)
    return 2.0 * val


def l2_spacetime_error(
    mesh: SurfaceMesh,
    grid: TimeGrid,
    coeffs: np.ndarray,
    reference,
    q_space: int = 4,
    q_time: int = 8,
) -> float:
    """L2(Gamma x [0,T]) distance between the discrete ansatz and a reference.

    reference maps (points (n,3), time scalar) to values (n,); the discrete
    field is sum_{i,j} coeffs[(i-1)M+j] phi_j(x) b_i(t).  Time uses q_time
    Gauss points per timestep panel, space the regular triangle rule.
    """
    m = mesh.num_vertices
    if len(coeffs) != grid.L * m:
        raise ValueError("coefficient vector length mismatch")
    alpha = np.asarray(coeffs).reshape(grid.L, m)
    pts, w = triangle_rule(q_space)
    sh = shape_values(pts)
    corners = mesh.corners
    X = (
        corners[:, None, 0, :]
        + pts[None, :, 0, None] * (corners[:, 1] - corners[:, 0])[:, None, :]
        + pts[None, :, 1, None] * (corners[:, 2] - corners[:, 1])[:, None, :]
    )
    wx = w[None, :] * 2.0 * mesh.areas[:, None]  # (E, nq)
    Xflat = X.reshape(-1, 3)
    tri = mesh.triangles

    xg, wg = gauss_rule(q_time)
    total = 0.0
    for step in range(grid.N - 1):
        a = step * grid.dt
        bnd = a + grid.dt
        tq = 0.5 * (a + bnd) + 0.5 * (bnd - a) * xg
        tw = 0.5 * (bnd - a) * wg
        for ts, wt in zip(tq, tw):
            bvals = np.array([basis_b(grid, i, float(ts)) for i in range(1, grid.L + 1)])
            vertex = bvals @ alpha  # (M,)
            field = np.einsum("ea,qa->eq", vertex[tri], sh)
            ref = np.asarray(reference(Xflat, float(ts))).reshape(field.shape)
            total += wt * float(np.sum(wx * (field - ref) ** 2))
    return float(np.sqrt(total))
