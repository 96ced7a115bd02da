import math

import mpmath as mp
import pytest
from hypothesis import given, settings, strategies as st

from sobstab.constants import (
    WIRINGS,
    be_from_pos,
    beta_values,
    build_ledger,
    c_M,
    c_upper_bound_constants,
    lowdim_grid_scan,
    lowdim_lower_bound,
)


def test_ledger_arithmetic_at_d6():
    L = build_ledger(6, 1.0 / 6.0)
    assert L.q == pytest.approx(3.0)
    assert L.gamma == pytest.approx(0.125)
    assert L.eps2 == pytest.approx(0.125)
    assert L.eps1 == pytest.approx(0.0625)
    assert L.sigma0 == pytest.approx(2 * 0.125 / 3)
    k0 = 1 + (2 * math.sqrt(3) + 1) / 6
    assert L.delta1 == pytest.approx(4 * 0.0625 * 0.125 * 0.125 ** 2 / (3 * k0 ** 2), rel=1e-14)
    with mp.workdps(30):
        oracle = mp.mpf(0.125) ** 2 / 4 * mp.power(3, -2 * L.K)
        assert abs(L.delta2 / oracle - 1) < mp.mpf("1e-25")
    assert L.positive()
    assert L.estI1_identity_residual < 1e-14


@settings(max_examples=15)
@given(st.floats(0.01, 0.32), st.integers(6, 40), st.sampled_from(WIRINGS))
def test_ledger_invariants(eps0, d, wiring):
    L = build_ledger(d, eps0, wiring)
    assert L.positive()
    assert 0 < L.dtilde < 1
    assert L.beta <= 2 * mp.log(2)
    assert L.K >= 2
    assert L.dtilde == min(mp.mpf(L.delta1), L.delta2)


@pytest.mark.parametrize("bad", [dict(d=5), dict(d=6, eps0=0.4), dict(d=6, wiring="x"), dict(d=6, M=0.1)])
def test_ledger_rejects_bad_input(bad):
    with pytest.raises(ValueError):
        build_ledger(**bad)


def test_upper_bound_constants_monotone_in_safety():
    a = c_upper_bound_constants(1.0, 2.0, safety=1.0)
    b = c_upper_bound_constants(1.0, 2.0, safety=1.5)
    assert b.C_M > a.C_M > 0 and b.C_MMbar > a.C_MMbar > 0
    assert c_M(1.0) > 0


def test_cutting_constants_dominate_sampled_residual():
    # the ledger constants must make the pointwise estimates hold on a grid
    import numpy as np

    from sobstab.pieces import CutParams, cutting_residual
    L = build_ledger(8)
    cut = CutParams(L.gamma, L.M, L.Mbar, L.eps, L.q)
    r = np.concatenate([np.linspace(-1, 5, 20001), np.logspace(0, 3, 2000)])
    assert float(np.min(cutting_residual(r, cut, L.C_eps))) >= -1e-12


@pytest.mark.parametrize("d", [3, 4, 5, 6])
def test_lowdim_bound_matches_grid_scan(d):
    v, x = lowdim_lower_bound(d)
    vg, xg = lowdim_grid_scan(d, 10 ** 6)
    assert abs(v - vg) < 1e-8
    assert v >= vg
    assert 0 < v < 4 / (d + 4)
    assert 0 < x < 1


def test_lowdim_rejects_high_dimension():
    with pytest.raises(ValueError):
        lowdim_lower_bound(7)


def test_be_from_pos_and_beta_values():
    assert be_from_pos(0.1, 3) == pytest.approx(0.05)
    assert be_from_pos(10.0, 3) == pytest.approx(1 - 2 ** (-2 / 3))
    with pytest.raises(ValueError):
        be_from_pos(0.0, 3)
    b, bs, bl = beta_values(build_ledger(6))
    assert bl == b / 2 and bs == b


def test_ledger_serializes():
    L = build_ledger(10, 0.3)
    d = L.to_dict()
    assert isinstance(d["beta"], str) and "e-" in d["beta"]
    assert "dtilde" in L.table()
    assert '"wiring": "final"' in L.to_json()
