"""GMRES variants, deflation, Schur utilities, recursive preconditioner."""

import numpy as np
import pytest
import scipy.linalg as sla

from tdbem.block_system import assemble_system
from tdbem.mesh import SurfaceMesh
from tdbem.solvers import (
    BreakdownError,
    SolverConfig,
    dense_schur,
    dgmres,
    fgmres,
    gmres,
    recursive_preconditioner,
    schur_eigenvalues,
)
from tdbem.temporal_basis import TimeGrid


def well_conditioned(n=200, seed=0):
    rng = np.random.default_rng(seed)
    A = np.eye(n) + (0.5 / np.sqrt(n)) * rng.standard_normal((n, n))
    b = rng.standard_normal(n)
    return A, b


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            SolverConfig(restart=0)
        with pytest.raises(ValueError):
            SolverConfig(tol=0.0)
        with pytest.raises(ValueError):
            SolverConfig(deflate_per_restart=5, max_deflation=3)
        with pytest.raises(ValueError):
            SolverConfig(recursion_depth=-1)


class TestSchur:
    def test_factorization_residual(self):
        rng = np.random.default_rng(5)
        H = rng.standard_normal((20, 20))
        Q, T = dense_schur(H)
        assert np.linalg.norm(Q @ T @ Q.T - H) < 1e-12 * np.linalg.norm(H)
        assert np.linalg.norm(Q @ Q.T - np.eye(20)) < 1e-13

    def test_eigenvalues_match_numpy(self):
        rng = np.random.default_rng(6)
        H = rng.standard_normal((15, 15))
        _, T = dense_schur(H)
        got = np.sort_complex(schur_eigenvalues(T))
        want = np.sort_complex(np.linalg.eigvals(H))
        assert np.max(np.abs(got - want)) < 1e-10

    def test_tridiagonal_known_spectrum(self):
        # 1D Laplacian has eigenvalues 2 - 2 cos(j pi / (n+1))
        n = 12
        H = 2 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)
        _, T = dense_schur(H)
        got = np.sort(schur_eigenvalues(T).real)
        want = np.sort(2.0 - 2.0 * np.cos(np.arange(1, n + 1) * np.pi / (n + 1)))
        assert np.max(np.abs(got - want)) < 1e-12


class TestGMRES:
    def test_random_system(self):
        A, b = well_conditioned()
        x, hist = gmres(lambda v: A @ v, b, SolverConfig(restart=50, tol=1e-12))
        assert np.linalg.norm(A @ x - b) <= 1e-10 * np.linalg.norm(b)
        # reported history is the true relative residual
        assert hist[-1] == pytest.approx(
            np.linalg.norm(A @ x - b) / np.linalg.norm(b), abs=1e-12
        )

    def test_identity_converges_immediately(self):
        b = np.arange(1.0, 9.0)
        x, hist = gmres(lambda v: v, b, SolverConfig(tol=1e-12))
        assert np.allclose(x, b)
        assert len(hist) == 1

    def test_zero_rhs(self):
        x, hist = gmres(lambda v: v, np.zeros(5), SolverConfig())
        assert np.all(x == 0.0)

    def test_singular_breakdown(self):
        # rank-1 matrix with incompatible rhs must raise, not loop
        A = np.outer(np.ones(6), np.ones(6))
        b = np.arange(1.0, 7.0)
        with pytest.raises(BreakdownError):
            gmres(lambda v: A @ v, b, SolverConfig(restart=6, tol=1e-12, max_iter=12))


class TestDGMRES:
    def test_random_system(self):
        A, b = well_conditioned(seed=1)
        cfg = SolverConfig(restart=20, tol=1e-12, deflate_per_restart=2, max_deflation=8)
        x, hist, state = dgmres(lambda v: A @ v, b, cfg)
        assert np.linalg.norm(A @ x - b) <= 1e-10 * np.linalg.norm(b)
        assert 0 <= state.rank <= 8

    def test_exact_deflation_spectrum(self):
        # diagonal system with an isolated small eigenvalue: after one
        # restart the deflation space contains its eigenvector and the
        # remaining system (all eigenvalues 10) converges in one step
        d = np.full(40, 10.0)
        d[0] = 2.0
        A = np.diag(d)
        rng = np.random.default_rng(2)
        b = rng.standard_normal(40)
        cfg = SolverConfig(restart=10, tol=1e-13, deflate_per_restart=1, max_deflation=4)
        x, hist, state = dgmres(lambda v: A @ v, b, cfg)
        assert np.linalg.norm(A @ x - b) <= 1e-12 * np.linalg.norm(b)
        assert state.rank >= 1
        # deflated direction aligns with the isolated eigenvector e_0
        overlap = np.abs(state.U[0, :]).max()
        assert overlap > 0.99
        assert state.lambda_max == pytest.approx(10.0, rel=1e-6)

    def test_l_zero_identical_to_gmres(self):
        A, b = well_conditioned(seed=3)
        cfg = SolverConfig(restart=25, tol=1e-12)
        xg, hg = gmres(lambda v: A @ v, b, cfg)
        cfgd = SolverConfig(restart=25, tol=1e-12, deflate_per_restart=0)
        xd, hd, state = dgmres(lambda v: A @ v, b, cfgd)
        assert np.array_equal(xg, xd)
        assert hg == hd
        assert state.rank == 0


class TestFGMRES:
    def test_identity_precond_identical_to_gmres(self):
        A, b = well_conditioned(seed=4)
        cfg = SolverConfig(restart=30, tol=1e-12)
        xg, hg = gmres(lambda v: A @ v, b, cfg)
        xf, hf = fgmres(lambda v: A @ v, b, cfg, precond=lambda v: v.copy())
        assert np.max(np.abs(xg - xf)) < 1e-13
        assert np.max(np.abs(np.array(hg) - np.array(hf))) < 1e-13

    def test_exact_inverse_precond(self):
        A, b = well_conditioned(seed=5)
        Ainv = np.linalg.inv(A)
        x, hist = fgmres(
            lambda v: A @ v, b, SolverConfig(restart=10, tol=1e-12),
            precond=lambda v: Ainv @ v,
        )
        assert len(hist) <= 3
        assert np.linalg.norm(A @ x - b) <= 1e-10 * np.linalg.norm(b)


class TestRecursivePreconditioner:
    @pytest.fixture(scope="class")
    @staticmethod
    def system():
        verts = np.array([
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [1.0, 1.0, 0.5],
        ])
        mesh = SurfaceMesh(verts, np.array([[0, 1, 2], [1, 3, 2]]))
        grid = TimeGrid(T=3.0, N=6, p=1)
        return assemble_system(mesh, grid, workers=1)

    def test_accelerates_fgmres(self, system):
        rng = np.random.default_rng(9)
        b = rng.standard_normal(system.shape[0])
        plain_cfg = SolverConfig(restart=40, tol=1e-8, max_iter=2000)
        _, plain_hist = gmres(lambda v: system @ v, b, plain_cfg)
        cfg = SolverConfig(
            restart=40, tol=1e-8, max_iter=2000,
            recursion_depth=2, inner_iterations=(2, 6),
        )
        prec = recursive_preconditioner(system, cfg)
        x, hist = fgmres(lambda v: system @ v, b, cfg, precond=prec)
        assert hist[-1] <= 1e-8
        assert len(hist) < len(plain_hist)
        r = np.linalg.norm(system @ x - b) / np.linalg.norm(b)
        assert r <= 1e-7

    def test_depth_zero_plain_split(self, system):
        rng = np.random.default_rng(10)
        b = rng.standard_normal(system.shape[0])
        cfg = SolverConfig(restart=40, tol=1e-8, max_iter=2000,
                           recursion_depth=1, inner_iterations=(8,))
        prec = recursive_preconditioner(system, cfg)
        x, hist = fgmres(lambda v: system @ v, b, cfg, precond=prec)
        assert hist[-1] <= 1e-8
