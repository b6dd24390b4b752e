"""Temporal basis: cutoff, partition of unity, prototypes, indexing."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tdbem.temporal_basis import (
    TimeGrid,
    basis_b,
    canonical_basis,
    canonical_origin,
    canonical_support,
    cutoff_f,
    decode_flat,
    flat_index,
    legendre_P,
    partition_mu,
    support_interval,
    timestep_kind,
)

GRID = TimeGrid(T=2.0, N=5, p=2)


def fd4(f, t, h=1e-5):
    return (f(t - 2 * h) - 8 * f(t - h) + 8 * f(t + h) - f(t + 2 * h)) / (12 * h)


class TestTimeGrid:
    def test_basic_quantities(self):
        g = TimeGrid(T=3.0, N=4, p=1)
        assert g.dt == pytest.approx(1.0)
        assert g.L == 8
        assert g.t(0) == 0.0
        assert g.t(3) == pytest.approx(3.0)

    def test_formal_times_clamp(self):
        # conventions t_{-1} = 0 and t_N = T used by the causality cuts
        g = TimeGrid(T=3.0, N=4, p=1)
        assert g.t_formal(-1) == 0.0
        assert g.t_formal(4) == pytest.approx(g.T)
        assert g.t_formal(2) == pytest.approx(2.0)

    def test_validation(self):
        with pytest.raises(ValueError):
            TimeGrid(T=1.0, N=2, p=1)
        with pytest.raises(ValueError):
            TimeGrid(T=-1.0, N=5, p=1)
        with pytest.raises(ValueError):
            TimeGrid(T=1.0, N=5, p=-1)

    def test_flat_index_roundtrip(self):
        g = GRID
        flats = set()
        for kt in range(1, g.N + 1):
            for m in range(g.p + 1):
                idx = flat_index(g, kt, m)
                assert idx.flat == (kt - 1) * (g.p + 1) + m + 1
                back = decode_flat(g, idx.flat)
                assert (back.timestep, back.order) == (kt, m)
                flats.add(idx.flat)
        assert flats == set(range(1, g.L + 1))


class TestCutoff:
    def test_boundary_values(self):
        assert cutoff_f(-1.0) == 0.0
        assert cutoff_f(1.0) == 1.0
        assert cutoff_f(0.0) == pytest.approx(0.5)

    def test_monotone(self):
        x = np.linspace(-1, 1, 201)
        v = cutoff_f(x)
        assert np.all(np.diff(v) >= 0.0)

    def test_point_symmetry(self):
        x = np.linspace(-0.999, 0.999, 101)
        assert np.max(np.abs(cutoff_f(x) + cutoff_f(-x) - 1.0)) < 1e-14

    def test_derivatives_match_fd(self):
        x = np.linspace(-0.9, 0.9, 41)
        for d in (1, 2):
            exact = cutoff_f(x, deriv=d)
            approx = np.array([fd4(lambda s: cutoff_f(s, deriv=d - 1), xx) for xx in x])
            assert np.max(np.abs(exact - approx)) < 1e-6 * max(1.0, np.max(np.abs(exact)))

    def test_flat_at_ends(self):
        # all derivatives vanish at the support boundary
        for d in (1, 2):
            assert cutoff_f(-0.999999, deriv=d) == pytest.approx(0.0, abs=1e-10)
            assert cutoff_f(0.999999, deriv=d) == pytest.approx(0.0, abs=1e-10)


class TestPartition:
    @given(st.floats(min_value=0.0, max_value=2.0))
    @settings(max_examples=200, deadline=None)
    def test_partition_of_unity(self, t):
        total = sum(partition_mu(GRID, i, t) for i in range(1, GRID.N + 1))
        assert abs(total - 1.0) <= 1e-12

    def test_support(self):
        g = GRID
        t = np.linspace(0, g.T, 401)
        for i in range(2, g.N):
            v = partition_mu(g, i, t)
            lo, hi = g.t(i - 2), g.t(i)
            assert np.all(v[(t < lo - 1e-12) | (t > hi + 1e-12)] == 0.0)
            assert np.all(v >= 0.0)


class TestPrototypes:
    def test_kinds(self):
        g = GRID
        assert timestep_kind(g, 1) == "first"
        assert timestep_kind(g, g.N) == "last"
        assert all(timestep_kind(g, k) == "inner" for k in range(2, g.N))
        assert canonical_support(g, "inner") == pytest.approx(2 * g.dt)
        assert canonical_support(g, "first") == pytest.approx(g.dt)
        assert canonical_origin(g, 1) == 0.0
        assert canonical_origin(g, 3) == pytest.approx(g.t(1))
        assert canonical_origin(g, g.N) == pytest.approx(g.t(g.N - 2))

    def test_zero_outside_support(self):
        g = GRID
        for kind in ("first", "inner", "last"):
            s = canonical_support(g, kind)
            u = np.array([-1e-9, s + 1e-9, -5.0, 10.0])
            for m in range(g.p + 1):
                for d in (0, 1, 2):
                    assert np.all(canonical_basis(g, kind, m, u, deriv=d) == 0.0)

    def test_first_kind_quadratic_factor(self):
        # b of the first timestep behaves like 8 (u/dt)^2 mu near u = 0
        g = GRID
        u = np.array([1e-4, 2e-4])
        v = canonical_basis(g, "first", 0, u)
        ratio = v / (8.0 * (u / g.dt) ** 2 * partition_mu(g, 1, u))
        assert np.max(np.abs(ratio - legendre_P(0, 2 * u / g.dt - 1))) < 1e-6

    def test_derivatives_match_fd(self):
        g = GRID
        for kind in ("first", "inner", "last"):
            s = canonical_support(g, kind)
            u = np.linspace(0.05 * s, 0.95 * s, 17)
            for m in range(g.p + 1):
                for d in (1, 2):
                    exact = canonical_basis(g, kind, m, u, deriv=d)
                    approx = np.array([
                        fd4(lambda x: canonical_basis(g, kind, m, np.array([x]), deriv=d - 1)[0], uu)
                        for uu in u
                    ])
                    scale = max(1.0, np.max(np.abs(exact)))
                    assert np.max(np.abs(exact - approx)) < 1e-6 * scale


class TestBasisB:
    def test_matches_shifted_prototype(self):
        g = GRID
        t = np.linspace(-0.5, g.T + 0.5, 301)
        for kt in range(1, g.N + 1):
            kind = timestep_kind(g, kt)
            org = canonical_origin(g, kt)
            for m in range(g.p + 1):
                i = flat_index(g, kt, m).flat
                v = basis_b(g, i, t)
                ref = canonical_basis(g, kind, m, t - org)
                assert np.max(np.abs(v - ref)) == 0.0

    def test_support_interval(self):
        g = GRID
        assert support_interval(g, 1) == (0.0, g.dt)
        lo, hi = support_interval(g, 3)
        assert (lo, hi) == (pytest.approx(g.t(1)), pytest.approx(g.t(3)))
        lo, hi = support_interval(g, g.N)
        assert (lo, hi) == (pytest.approx(g.t(g.N - 2)), pytest.approx(g.t(g.N - 1)))

    def test_accepts_index_tuple(self):
        g = GRID
        idx = flat_index(g, 2, 1)
        assert basis_b(g, idx, 0.3) == basis_b(g, idx.flat, 0.3)
