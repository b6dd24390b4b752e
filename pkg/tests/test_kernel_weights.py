"""Kernel weight tables: Chebyshev machinery, symmetries, direct oracles."""

import numpy as np
import pytest

from tdbem.kernel_weights import (
    PiecewiseCheb,
    clenshaw,
    eval_psi,
    is_zero_pair,
    prototype_direct,
    psi_direct,
    psi_support,
    table_domain,
    tables_for,
)
from tdbem.temporal_basis import TimeGrid, flat_index

GRID = TimeGrid(T=2.0, N=4, p=1)


@pytest.fixture(scope="module")
def tables():
    return tables_for(GRID)


class TestChebyshev:
    def test_clenshaw_matches_numpy(self):
        rng = np.random.default_rng(3)
        c = rng.standard_normal(9)
        x = np.linspace(-1, 1, 31)
        ref = np.polynomial.chebyshev.chebval(x, c)
        assert np.max(np.abs(clenshaw(c, x) - ref)) < 1e-13

    def test_piecewise_build_accuracy(self):
        f = lambda x: np.sin(3.0 * x) * np.exp(-x)
        tab = PiecewiseCheb.build(f, -1.0, 2.0, n_sub=4, deg=16)
        x = np.linspace(-1.0, 2.0, 501)
        assert np.max(np.abs(tab(x) - f(x))) < 1e-13

    def test_piecewise_kinked_function(self):
        # a C0 kink resolved by placing it on a panel boundary
        f = lambda x: np.abs(x)
        tab = PiecewiseCheb.build(f, -1.0, 1.0, n_sub=2, deg=16)
        x = np.linspace(-1.0, 1.0, 501)
        assert np.max(np.abs(tab(x) - f(x))) < 1e-13


class TestTableDomains:
    def test_inner_inner_folded(self):
        lo, hi = table_domain(GRID, "inner", "inner")
        assert lo == 0.0
        assert hi == pytest.approx(2 * GRID.dt)

    def test_last_first_unreachable(self):
        assert table_domain(GRID, "last", "first") is None

    def test_reachable_domains_cover_support(self):
        for ki in ("first", "inner", "last"):
            for kk in ("first", "inner", "last"):
                dom = table_domain(GRID, ki, kk)
                if dom is not None:
                    assert dom[0] < dom[1]


class TestSymmetries:
    def test_inner_tilde_antisymmetry(self):
        # psi~ prototypes: value at -a equals -(swapped orders) at a
        for m1 in range(GRID.p + 1):
            for m2 in range(GRID.p + 1):
                for a in (0.15, 0.4, 0.8):
                    left = prototype_direct(GRID, "inner", "inner", m1, m2, True, -a)
                    right = -prototype_direct(GRID, "inner", "inner", m2, m1, True, a)
                    assert left == pytest.approx(right, abs=1e-12)

    def test_inner_tilde_parity(self):
        # psi~_{m1,m2}(a) = (-1)^(m1+m2+1) psi~_{m1,m2}(-a)
        for m1 in range(GRID.p + 1):
            for m2 in range(GRID.p + 1):
                sign = (-1.0) ** (m1 + m2 + 1)
                for a in (0.1, 0.33, 0.77):
                    left = prototype_direct(GRID, "inner", "inner", m1, m2, True, a)
                    right = sign * prototype_direct(GRID, "inner", "inner", m1, m2, True, -a)
                    assert left == pytest.approx(right, abs=1e-12)

    def test_inner_psi_symmetries(self):
        # the psi variant obeys the same swap and parity relations
        for m1 in range(GRID.p + 1):
            for m2 in range(GRID.p + 1):
                sign = (-1.0) ** (m1 + m2 + 1)
                for a in (0.2, 0.55):
                    neg = prototype_direct(GRID, "inner", "inner", m1, m2, False, -a)
                    assert neg == pytest.approx(
                        -prototype_direct(GRID, "inner", "inner", m2, m1, False, a),
                        abs=1e-10,
                    )
                    assert neg == pytest.approx(
                        sign * prototype_direct(GRID, "inner", "inner", m1, m2, False, a),
                        abs=1e-10,
                    )


class TestTables:
    def test_tables_cached(self, tables):
        assert tables_for(GRID) is tables

    def test_table_matches_direct(self, tables):
        # every stored variant agrees with adaptive quadrature of the
        # defining integral
        rng = np.random.default_rng(11)
        checked = 0
        for tilde, kind_i, kind_k, m1, m2 in tables.key_iter():
            dom = table_domain(GRID, kind_i, kind_k)
            if dom is None:
                continue
            for a in rng.uniform(dom[0], dom[1], 3):
                got = tables.eval_offset(tilde, kind_i, kind_k, m1, m2, a)
                want = prototype_direct(GRID, kind_i, kind_k, m1, m2, tilde, float(a))
                assert got == pytest.approx(want, abs=5e-12)
                checked += 1
        assert checked > 50

    def test_eval_psi_matches_direct(self, tables):
        rng = np.random.default_rng(4)
        for k in range(1, GRID.L + 1):
            for i in range(1, GRID.L + 1):
                lo, hi = psi_support(GRID, (k - 1) // 2 + 1, (i - 1) // 2 + 1)
                if hi <= lo:
                    continue
                for r in rng.uniform(max(lo, 0.0), hi, 2):
                    for tilde in (False, True):
                        got = eval_psi(tables, GRID, k, i, float(r), tilde)
                        want = psi_direct(GRID, k, i, float(r), tilde)
                        assert got == pytest.approx(want, abs=5e-12)

    def test_negative_distance_rejected(self, tables):
        with pytest.raises(ValueError):
            eval_psi(tables, GRID, 1, 1, -0.1, False)


class TestCausality:
    def test_zero_rule(self):
        # weights vanish when the test support ends before the ansatz starts
        assert is_zero_pair(GRID, 1, 3)
        assert is_zero_pair(GRID, 2, 4)
        assert not is_zero_pair(GRID, 3, 3)
        assert not is_zero_pair(GRID, 2, 3)

    def test_zero_pair_evaluates_to_zero(self, tables):
        k = flat_index(GRID, 1, 0).flat
        i = flat_index(GRID, 3, 1).flat
        assert eval_psi(tables, GRID, k, i, 0.5, False) == 0.0
        assert psi_direct(GRID, k, i, 0.5, True) == 0.0

    def test_vanishes_outside_distance_support(self, tables):
        for kt, it in ((3, 2), (4, 2), (2, 2)):
            lo, hi = psi_support(GRID, kt, it)
            k = flat_index(GRID, kt, 0).flat
            i = flat_index(GRID, it, 1).flat
            for r in (hi + 1e-9, hi + 1.0, max(0.0, lo - 1e-9) if lo > 0 else hi + 2.0):
                assert abs(eval_psi(tables, GRID, k, i, float(r), False)) < 1e-13
                assert abs(eval_psi(tables, GRID, k, i, float(r), True)) < 1e-13

    def test_support_formula(self):
        lo, hi = psi_support(GRID, 3, 2)
        dt = GRID.dt
        assert lo == pytest.approx(0.0)
        assert hi == pytest.approx(GRID.t_formal(3) - GRID.t_formal(0))
        lo, hi = psi_support(GRID, 4, 2)
        assert lo == pytest.approx(GRID.t_formal(2) - GRID.t_formal(2) + dt * 0.0)
        assert hi == pytest.approx(GRID.t_formal(4) - GRID.t_formal(0))
