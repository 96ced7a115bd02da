import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from sobstab.constants import build_ledger
from sobstab.pieces import (
    CutParams,
    elementary_residual,
    elementary_residual_refined,
    expand_check,
    i_terms,
    i_terms_admissible,
    local_deficit_check,
    m_nu,
    orthogonalize,
    ptw_bound_residual,
    split_pieces,
)
from sobstab.quad import zonal_from_callable, zonal_grid

finite = dict(allow_nan=False, allow_infinity=False)


@given(st.floats(-1, 1e4, **finite), st.floats(0.01, 1.0), st.floats(1.0, 4.0))
def test_split_sums_to_input(r, gamma, M):
    assume(gamma < M)
    r1, r2, r3 = split_pieces(r, gamma, M)
    assert r1 + r2 + r3 == pytest.approx(r, abs=1e-12 * (1 + abs(r)))
    assert r1 <= gamma and 0 <= r2 <= M - gamma and r3 >= 0


def test_split_rejects_below_minus_one():
    with pytest.raises(ValueError):
        split_pieces(np.array([-1.5]), 0.1, 1.0)


@given(st.floats(0, 1e3, **finite), st.floats(2.0, 6.0))
def test_ineq2_nonnegative(t, q):
    assert elementary_residual_refined("ineq2", np.array([t]), q)[0] >= -1e-30


@given(st.floats(-1, 1e3, **finite), st.floats(2.0, 3.0))
def test_ineq1_low_and_firstlemma_nonnegative(t, q):
    x = np.array([t])
    assert elementary_residual_refined("ineq1_low", x, q)[0] >= -1e-30
    assert elementary_residual_refined("firstlemma", x, q)[0] >= -1e-30


@given(st.floats(-1, 1e3, **finite), st.floats(3.0, 4.0))
def test_ineq1_mid_nonnegative(t, q):
    assert elementary_residual_refined("ineq1_mid", np.array([t]), q)[0] >= -1e-30


@given(st.floats(1.0, 1e3), st.floats(2.0, 3.0), st.sampled_from([math.sqrt(math.e), 2.0, 5.0]))
def test_second_lemma_nonnegative(s, q, Mbar):
    v = np.array([Mbar * s])
    for kind in ("secondlemma_a", "secondlemma_b"):
        assert elementary_residual_refined(kind, v, q, Mbar)[0] >= -1e-30


def test_elementary_equality_points():
    # each inequality is tight at the origin
    for kind in ("ineq2", "ineq1_low", "firstlemma"):
        assert elementary_residual(kind, 0.0, 2.5) == 0.0
    with pytest.raises(ValueError):
        elementary_residual("ineq1_low", 0.1, 3.5)
    with pytest.raises(ValueError):
        elementary_residual("nope", 0.1, 2.5)


def test_cut_params_validate():
    with pytest.raises(ValueError):
        CutParams(0.1, 1.0, 1.0, 0.1, 3.0)
    CutParams(0.1, 1.0, math.sqrt(math.e), 0.1, 3.0)


@settings(max_examples=25)
@given(st.integers(6, 30), st.floats(-1, 50, **finite))
def test_pointwise_bound_with_ledger_constants(d, r):
    L = build_ledger(d)
    cut = CutParams(L.gamma, L.M, L.Mbar, L.eps, L.q)
    assert ptw_bound_residual(r, cut, L.C_M, L.C_MMbar) >= -1e-12


@settings(max_examples=30)
@given(st.integers(0, 10 ** 6), st.sampled_from([2.0, 2.5, 3.0, 3.5, 4.0, 6.0]))
def test_expansion_upper_bound(seed, q):
    rng = np.random.default_rng(seed)
    k = 6
    w = rng.uniform(0.1, 1.0, k)
    u = rng.uniform(0.2, 2.0, k)
    r = orthogonalize(u, rng.normal(0, 0.5, k), w, q)
    assert abs(np.sum(w * u ** (q - 1) * r)) < 1e-12
    neg = r < 0
    if np.any(neg):
        r = r * min(1.0, 0.999 * float(np.min(u[neg] / -r[neg])))
    assert expand_check(u, r, w, q) >= -1e-12


def test_expansion_needs_orthogonality():
    with pytest.raises(ValueError):
        expand_check(np.ones(3), np.array([0.1, 0.1, 0.1]), np.ones(3), 3.0)


@pytest.mark.parametrize("d", [4, 6, 9])
def test_m_nu_at_zero(d):
    assert m_nu(0.0, d) == pytest.approx(4 / (d + 4))
    assert m_nu(0.0, 3) == pytest.approx(4 / 7)


@given(st.floats(0, 1), st.floats(0, 1), st.sampled_from([3, 4, 5, 6, 10]))
def test_m_nu_decreasing(a, b, d):
    lo, hi = sorted((a, b))
    assert m_nu(hi, d) <= m_nu(lo, d) + 1e-15


def _random_zonal(d, seed, amp=0.2):
    rng = np.random.default_rng(seed)
    g = zonal_grid(d)
    c = rng.normal(0, 1, 8) / (1 + np.arange(8)) ** 2
    c[:2] = 0
    vals = c @ g.basis[:8]
    vals *= amp / max(np.max(np.abs(vals)), 1e-300)
    return zonal_from_callable(lambda s: 0 * s, d, signed=True).with_values(vals, signed=True)


@pytest.mark.parametrize("d", [6, 10])
@pytest.mark.parametrize("seed", range(3))
def test_i_terms_summary_bound(d, seed):
    L = build_ledger(d)
    rep = i_terms(_random_zonal(d, seed), 1 / 6, L)
    assert rep.hypotheses["orthogonal"] and rep.hypotheses["r_ge_minus1"]
    assert rep.master_residual >= -1e-10


@pytest.mark.parametrize("d", [6, 12])
def test_admissible_terms_nonnegative(d):
    L = build_ledger(d)
    rep = i_terms_admissible(_random_zonal(d, 1), 1 / 6, L)
    assert rep.I1 >= 0 and rep.master_residual >= -1e-8 * abs(rep.lhs)


@pytest.mark.parametrize("d", [3, 4, 5, 6, 8])
def test_local_check_margin_positive(d):
    L = build_ledger(d) if d >= 6 else None
    chk = local_deficit_check(_random_zonal(d, 7), ledger=L)
    assert chk.margin >= 0
    assert chk.quadratic_margin > 0
    assert chk.route == ("cutting" if d >= 6 else "firstbound")
