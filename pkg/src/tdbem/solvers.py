"""Krylov solvers for the block Hessenberg space-time system.

Restarted GMRES(m) with modified Gram-Schmidt Arnoldi and Givens least
squares, deflated DGMRES(m,l) that augments an approximate invariant
subspace from Schur vectors of the cycle Hessenberg matrix, flexible FGMRES
with per-iteration preconditioning, and the recursive block triangular
preconditioner built on the half-split of the block time index.

All preconditioning is from the right, so residual histories always refer
to the original system.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

__all__ = [
    "SolverConfig",
    "DeflationState",
    "BreakdownError",
    "gmres",
    "dgmres",
    "fgmres",
    "recursive_preconditioner",
    "dense_schur",
    "schur_eigenvalues",
]


class BreakdownError(RuntimeError):
    """Arnoldi norm underflow without a converged residual."""


@dataclass
class SolverConfig:
    method: str = "gmres"
    restart: int = 50
    tol: float = 1e-5
    max_iter: int = 10000
    deflate_per_restart: int = 0  # l
    max_deflation: int = 20  # r
    recursion_depth: int = 0  # m_r
    inner_iterations: tuple = ()  # (i_1, ..., i_{m_r})

    def __post_init__(self):
        if self.restart < 1 or self.tol <= 0.0 or self.recursion_depth < 0:
            raise ValueError("invalid solver configuration")
        if not 0 <= self.deflate_per_restart <= self.max_deflation:
            raise ValueError("deflation counts must satisfy 0 <= l <= r")


@dataclass
class DeflationState:
    """Approximate invariant subspace data for the deflation preconditioner."""

    U: np.ndarray  # (n, r) orthonormal columns
    AU: np.ndarray  # A @ U
    lambda_max: float = 0.0

    @property
    def rank(self) -> int:
        return self.U.shape[1]

    def t_small(self) -> np.ndarray:
        return self.U.T @ self.AU

    def apply_minv(self, v: np.ndarray) -> np.ndarray:
        """M^{-1} v with M^{-1} = I + U(|lambda| T^{-1} - I) U^T."""
        if self.rank == 0:
            return v
        w = self.U.T @ v
        y = sla.lu_solve(sla.lu_factor(self.t_small()), w)
        return v + self.U @ (self.lambda_max * y - w)


def dense_schur(H: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Real Schur form H = Q T Q^T (T quasi-triangular)."""
    T, Q = sla.schur(np.asarray(H, dtype=float), output="real")
    return Q, T


def schur_eigenvalues(T: np.ndarray) -> np.ndarray:
    """Eigenvalues read off the 1x1 / 2x2 diagonal blocks of a real Schur form."""
    n = T.shape[0]
    vals = np.empty(n, dtype=complex)
    i = 0
    while i < n:
        if i + 1 < n and abs(T[i + 1, i]) > 0.0:
            a, b, c, d = T[i, i], T[i, i + 1], T[i + 1, i], T[i + 1, i + 1]
            tr, det = a + d, a * d - b * c
            disc = tr * tr / 4.0 - det
            root = np.sqrt(complex(disc))
            vals[i] = tr / 2.0 + root
            vals[i + 1] = tr / 2.0 - root
            i += 2
        else:
            vals[i] = T[i, i]
            i += 1
    return vals


def _smallest_invariant_basis(H: np.ndarray, l: int) -> tuple[np.ndarray, float]:
    """Orthonormal basis of the invariant subspace for the l smallest-modulus
    eigenvalues of H (possibly l+1 when a conjugate pair straddles the cut),
    plus the largest eigenvalue modulus."""
    Q, T = dense_schur(H)
    vals = schur_eigenvalues(T)
    lam_max = float(np.max(np.abs(vals)))
    if l <= 0:
        return np.zeros((H.shape[0], 0)), lam_max
    n = len(vals)
    if l >= n:
        return Q, lam_max
    # modulus threshold between the l-th and (l+1)-th smallest; re-sorting the
    # decomposition keeps conjugate 2x2 blocks together, so the selected
    # dimension may exceed l when a pair straddles the cut
    mods = np.sort(np.abs(vals))
    thr = 0.5 * (mods[l - 1] + mods[l]) if mods[l] > mods[l - 1] else mods[l - 1] * (1 + 1e-12)
    TT, QQ, sdim = sla.schur(
        np.asarray(H, dtype=float), output="real",
        sort=lambda re, im: np.hypot(re, im) <= thr,
    )
    return QQ[:, :sdim], lam_max


def _orthonormal_extend(U: np.ndarray, W: np.ndarray, drop_tol: float = 1e-12) -> np.ndarray:
    """Append columns of W to U, MGS with one reorthogonalization pass."""
    cols = [U[:, j] for j in range(U.shape[1])]
    for j in range(W.shape[1]):
        w = W[:, j].copy()
        for _ in range(2):
            for u in cols:
                w -= (u @ w) * u
        nw = np.linalg.norm(w)
        if nw > drop_tol:
            cols.append(w / nw)
    if not cols:
        return np.zeros((U.shape[0], 0))
    return np.column_stack(cols)


def _run_restarted(apply_A, b, cfg, precond_factory, per_cycle=None):
    """Restart loop shared by all solver variants.

    precond_factory() -> callback or None, queried each cycle (deflation
    updates between cycles); per_cycle(V, H, k) gets the raw Arnoldi data.
    """
    nb = np.linalg.norm(b)
    if nb == 0.0:
        return np.zeros_like(b), [0.0]
    tol_abs = cfg.tol * nb
    x = np.zeros_like(b)
    history = []
    while len(history) < cfg.max_iter:
        m = min(cfg.restart, cfg.max_iter - len(history))
        precond = precond_factory()
        x, converged, breakdown, raw = _gmres_cycle_raw(
            apply_A, b, x, m, tol_abs, precond, history
        )
        if per_cycle is not None and raw["k"] > 0:
            per_cycle(raw)
        if converged:
            break
        if breakdown:
            raise BreakdownError("Arnoldi breakdown before convergence")
    return x, [h / nb for h in history]


def _gmres_cycle_raw(apply_A, b, x0, m, tol_abs, precond, history):
    """Arnoldi cycle that also returns the unrotated Hessenberg matrix."""
    n = len(b)
    r0 = b - apply_A(x0)
    beta = np.linalg.norm(r0)
    if beta <= tol_abs:
        history.append(beta)
        return x0, True, False, dict(k=0)
    V = np.zeros((n, m + 1))
    Z = np.zeros((n, m))
    H = np.zeros((m + 1, m))
    Hraw = np.zeros((m + 1, m))
    cs = np.zeros(m)
    sn = np.zeros(m)
    g = np.zeros(m + 1)
    g[0] = beta
    V[:, 0] = r0 / beta
    k_done = 0
    breakdown = False
    for k in range(m):
        z = V[:, k] if precond is None else precond(V[:, k])
        Z[:, k] = z
        w = apply_A(z)
        for j in range(k + 1):
            H[j, k] = V[:, j] @ w
            w -= H[j, k] * V[:, j]
        H[k + 1, k] = np.linalg.norm(w)
        Hraw[: k + 2, k] = H[: k + 2, k]
        hk = H[k + 1, k]
        for j in range(k):
            t = cs[j] * H[j, k] + sn[j] * H[j + 1, k]
            H[j + 1, k] = -sn[j] * H[j, k] + cs[j] * H[j + 1, k]
            H[j, k] = t
        denom = np.hypot(H[k, k], H[k + 1, k])
        cs[k] = H[k, k] / denom if denom > 0 else 1.0
        sn[k] = H[k + 1, k] / denom if denom > 0 else 0.0
        H[k, k] = denom
        g[k + 1] = -sn[k] * g[k]
        g[k] = cs[k] * g[k]
        H[k + 1, k] = 0.0
        k_done = k + 1
        history.append(abs(g[k + 1]))
        if abs(g[k + 1]) <= tol_abs:
            break
        if hk <= 1e-14 * beta:
            breakdown = True
            break
        V[:, k + 1] = w / hk
    y = sla.solve_triangular(H[:k_done, :k_done], g[:k_done], lower=False)
    x = x0 + Z[:, :k_done] @ y
    converged = history[-1] <= tol_abs
    return x, converged, breakdown, dict(V=V, Hraw=Hraw, k=k_done)


def gmres(apply_A, b, cfg: SolverConfig):
    """Restarted GMRES(m); returns (x, relative residual history)."""
    return _run_restarted(apply_A, b, cfg, lambda: None)


def fgmres(apply_A, b, cfg: SolverConfig, precond=None):
    """Flexible GMRES; precond is a right-preconditioner callback v -> z
    that may change between applications."""
    factory = (lambda: None) if precond is None else (lambda: precond)
    return _run_restarted(apply_A, b, cfg, factory)


def dgmres(apply_A, b, cfg: SolverConfig):
    """Deflated restarted GMRES(m, l); returns (x, history, DeflationState)."""
    n = len(b)
    state = DeflationState(U=np.zeros((n, 0)), AU=np.zeros((n, 0)))

    def factory():
        if state.rank == 0:
            return None
        return state.apply_minv

    def per_cycle(raw):
        if cfg.deflate_per_restart <= 0 or state.rank >= cfg.max_deflation:
            # still track the spectrum estimate
            k = raw["k"]
            if k > 0:
                vals = np.abs(schur_eigenvalues(dense_schur(raw["Hraw"][:k, :k])[1]))
                state.lambda_max = max(state.lambda_max, float(vals.max()))
            return
        k = raw["k"]
        Hk = raw["Hraw"][:k, :k]
        S, lam = _smallest_invariant_basis(Hk, cfg.deflate_per_restart)
        state.lambda_max = max(state.lambda_max, lam)
        if S.shape[1] == 0:
            return
        W = raw["V"][:, :k] @ S
        U_new = _orthonormal_extend(state.U, W)
        if U_new.shape[1] > cfg.max_deflation:
            U_new = U_new[:, : cfg.max_deflation]
        added = U_new[:, state.rank :]
        if added.shape[1]:
            AU_add = np.column_stack([apply_A(added[:, j]) for j in range(added.shape[1])])
            state.U = U_new
            state.AU = np.hstack([state.AU, AU_add])

    x, history = _run_restarted(apply_A, b, cfg, factory, per_cycle)
    return x, history, state


def recursive_preconditioner(A, cfg: SolverConfig, level: int = 1, rows=None):
    """Right-preconditioner callback from the block triangular half-split.

    A is a BlockHessenbergMatrix; rows is the inclusive block index range
    (defaults to all of 1..N).  The preconditioner is A restricted to the
    range with the superdiagonal coupling block at the split zeroed; each
    half is solved with i_level FGMRES iterations, preconditioned one level
    deeper while level < m_r and unpreconditioned at the lowest level.
    """
    lo, hi = rows if rows is not None else (1, A.grid.N)
    count = hi - lo + 1
    if count < 2:
        def solo(r):
            x, _ = fgmres(lambda v: A.matvec(v, rows=(lo, hi), cols=(lo, hi)), r,
                          _inner_cfg(cfg, level))
            return x
        return solo
    split = lo + (count + 1) // 2 - 1  # ceil(count/2) blocks in the first half
    n1 = (split - lo + 1) * (A.grid.p + 1) * A.M

    inner_prec_1 = None
    inner_prec_2 = None
    if level < cfg.recursion_depth:
        inner_prec_1 = recursive_preconditioner(A, cfg, level + 1, rows=(lo, split))
        inner_prec_2 = recursive_preconditioner(A, cfg, level + 1, rows=(split + 1, hi))

    def half_solve(r, blo, bhi, prec):
        x, _ = fgmres(lambda v: A.matvec(v, rows=(blo, bhi), cols=(blo, bhi)), r,
                      _inner_cfg(cfg, level), precond=prec)
        return x

    def prec(r):
        r1 = r[:n1]
        r2 = r[n1:]
        x1 = half_solve(r1, lo, split, inner_prec_1)
        r2c = r2 - A.matvec(x1, rows=(split + 1, hi), cols=(lo, split))
        x2 = half_solve(r2c, split + 1, hi, inner_prec_2)
        return np.concatenate([x1, x2])

    return prec


def _inner_cfg(cfg: SolverConfig, level: int) -> SolverConfig:
    iters = cfg.inner_iterations[level - 1] if level <= len(cfg.inner_iterations) else 10
    return SolverConfig(method="fgmres", restart=iters, tol=1e-14, max_iter=iters)
