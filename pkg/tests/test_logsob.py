import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sobstab.logsob import (
    EuclidFunction,
    GaussFunction,
    ansatz_deficit,
    bump_preset,
    euclidean_logsob_check,
    exp_family,
    gaussian_euclid,
    h_entropy,
    h_sobolev,
    limit_check_dz,
    limit_check_zeta,
    log_z_d,
    logsob_deficit,
    logsob_rhs_inf,
    logsob_stability_check,
    mixture,
    random_corpus,
    split_sign_logsob,
    split_sign_sobolev,
    z_d_pow,
    zd_sweep,
)
from sobstab.quad import zonal_from_callable

vec = st.lists(st.floats(-1.5, 1.5), min_size=1, max_size=3)


@given(vec, st.floats(0.1, 5.0))
@settings(max_examples=25)
def test_equality_family_has_zero_deficit_and_rhs(b, c):
    u = exp_family(len(b), b, c)
    assert abs(logsob_deficit(u)) < 1e-8 * max(1.0, u.l2_sq())
    res = logsob_rhs_inf(u)
    assert res.value < 1e-10 * res.l2_sq
    assert np.allclose(res.exponent, b, atol=1e-5)


def test_deficit_of_constant_is_zero_and_zero_function_rejected():
    assert logsob_deficit(exp_family(2, [0.0, 0.0], 3.0)) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        logsob_deficit(GaussFunction(1, lambda X: 0 * X[:, 0]))


@given(st.integers(0, 10 ** 6), st.floats(0.1, 10.0))
@settings(max_examples=15)
def test_deficit_is_two_homogeneous_and_nonnegative(seed, c):
    u = random_corpus(1, seed)[0]
    D = logsob_deficit(u)
    assert D >= -1e-10
    assert logsob_deficit(u.scaled(c)) == pytest.approx(c * c * D, rel=1e-9, abs=1e-12)


def test_linear_function_against_closed_form():
    # u = 1 + a x: int u'^2 = a^2 and the entropy by one-dimensional quadrature
    from scipy import integrate
    a = 0.8
    u = GaussFunction(
        1, lambda X: 1 + a * X[:, 0], lambda X: np.full((X.shape[0], 1), a), signed=True)
    dens = lambda x: math.exp(-math.pi * x * x)
    M = 1 + a * a / (2 * math.pi)
    ent = integrate.quad(lambda x: (1 + a * x) ** 2 * math.log((1 + a * x) ** 2 / M) * dens(x),
                         -np.inf, -1 / a, epsabs=1e-14)[0] + integrate.quad(
        lambda x: (1 + a * x) ** 2 * math.log((1 + a * x) ** 2 / M) * dens(x), -1 / a, np.inf, epsabs=1e-14)[0]
    assert logsob_deficit(u) == pytest.approx(a * a - math.pi * ent, abs=1e-9)


@pytest.mark.parametrize("seed", range(4))
def test_rhs_closed_form_matches_direct_search(seed):
    for u in random_corpus(3, seed):
        res = logsob_rhs_inf(u)
        assert res.agreement <= 1e-8
        assert 0 <= res.value <= res.l2_sq


def test_stability_margin_on_small_corpus():
    for u in random_corpus(6, 11) + random_corpus(6, 12, signed=True):
        chk = logsob_stability_check(u, 0.1)
        assert chk.ok and chk.deficit >= chk.margin


@given(st.floats(0.0, 0.5), st.integers(3, 40))
def test_h_lower_bounds(p, d):
    hd = 2 ** (2 / d) - 1
    assert h_sobolev(p, d) >= 2 * hd * p - 1e-14
    assert h_entropy(p) >= 2 * math.log(2) * p - 1e-14


@pytest.mark.parametrize("seed", range(3))
def test_logsob_split_identity(seed):
    for u in random_corpus(3, seed, signed=True):
        rep = split_sign_logsob(u)
        assert rep.residual < 1e-6
        assert rep.D >= rep.D_plus + rep.D_minus - 1e-9 or rep.coupling >= 0
        assert 0 <= rep.m <= 0.5 and rep.h_sweep_ok


@pytest.mark.parametrize("d", [3, 5, 8])
def test_sobolev_split_identity(d):
    F = zonal_from_callable(lambda s: np.exp(2 * s) - 2.2, d, signed=True)
    rep = split_sign_sobolev(F)
    assert rep.residual < 1e-6 and rep.h_sweep_ok
    assert rep.D > 0


@pytest.mark.parametrize("d", [3, 10, 100, 500])
def test_z_forms_agree(d):
    a, b = log_z_d(d)
    assert abs(a - b) <= 1e-10 * max(1.0, abs(a))


def test_z_power_tends_to_e_over_4():
    sw = zd_sweep([10, 50, 100, 500])
    assert sw.decreasing and sw.gap[-1] < 0.01
    assert z_d_pow(500) == pytest.approx(math.e / 4, abs=1e-3)
    assert sw.to_csv().startswith("d,value,target,gap")


@pytest.mark.parametrize("d,N", [(4, 1), (7, 2), (12, 3)])
def test_fiber_identities(d, N):
    lhs, rhs = limit_check_dz(d, N, [0.3] * N)
    assert lhs == pytest.approx(rhs, rel=1e-6)
    lhs, rhs = limit_check_zeta(d, N, 1.3, 0.7)
    assert lhs == pytest.approx(rhs, rel=1e-6)


def test_ansatz_gradient_identity_and_validation():
    u = bump_preset()
    p = ansatz_deficit(u, 20)
    assert p.identity_gap < 1e-8
    with pytest.raises(ValueError):
        ansatz_deficit(u, 4)
    with pytest.raises(ValueError):
        ansatz_deficit(exp_family(1, [0.1]), 10)


def test_euclidean_gaussian_and_dilation_invariance():
    for N in (1, 2):
        chk = euclidean_logsob_check(gaussian_euclid(N), 0.1)
        assert chk.ok and abs(chk.lhs) < 1e-10 and chk.dilation_gap < 1e-9
    w = EuclidFunction(1, lambda X: np.exp(-X[:, 0] ** 2) * (1 + 0.5 * X[:, 0] ** 2), scale=1.0)
    chk = euclidean_logsob_check(w, 0.1)
    assert chk.ok and chk.lhs > 0 and chk.dilation_gap < 1e-6
