import functools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sobstab.manifold import (
    ATParams,
    OnManifold,
    aubin_talenti_eval,
    bubble,
    direct_distance,
    gstar,
    manifold_distance,
    params_from_u,
    pde_residual,
    preset_aubin_talenti,
    preset_gstar,
    preset_two_bumps,
    sobolev_constant,
    sobolev_deficit,
    stability_ratio,
    stereographic_lift,
    stereographic_pullback,
    u_from_params,
)
from sobstab.quad import radial_from_callable, sphere_area, zonal_from_callable


def test_sharp_constant_in_three_dimensions():
    # classical value 3 (pi/2)^{4/3}
    assert sobolev_constant(3) == pytest.approx(3 * (math.pi / 2) ** (4 / 3), rel=1e-14)
    assert sobolev_constant(4) == pytest.approx(2 * (math.pi ** 2 * 8 / 3) ** 0.5, rel=1e-14)
    with pytest.raises(ValueError):
        sobolev_constant(2)


@pytest.mark.parametrize("d", [3, 4, 6, 9])
def test_optimizer_is_normalized_and_solves_the_equation(d):
    p = gstar(d)
    assert p.norm_q(d) == pytest.approx(1.0, abs=1e-14)
    assert pde_residual(p, d) < 1e-4


def test_at_params_validation():
    with pytest.raises(ValueError):
        ATParams(0.0)
    with pytest.raises(ValueError):
        aubin_talenti_eval(ATParams(1.0), np.ones(3))
    assert aubin_talenti_eval(ATParams(1.0), 0.0, d=3) == pytest.approx(2 ** 0.5)


@pytest.mark.parametrize("d", [3, 5, 8])
def test_deficit_vanishes_on_constant(d):
    rep = sobolev_deficit(preset_gstar(d))
    assert abs(rep.deficit) < 1e-12 * rep.energy
    assert rep.energy == pytest.approx(sobolev_constant(d), rel=1e-12)


def test_deficit_vanishes_on_shifted_bubble():
    F = preset_aubin_talenti(4, a=0.7, b=0.4)
    rep = sobolev_deficit(F)
    assert abs(rep.relative) < 1e-6


@given(st.floats(-1.5, 1.5), st.floats(-1.5, 1.5))
def test_u_parametrization_round_trip(up, uv):
    p = params_from_u((up, uv), 5)
    u = u_from_params(p)
    assert np.allclose(u, [up, uv], atol=1e-8)


@settings(max_examples=20)
@given(st.lists(st.floats(-2.0, 2.0), min_size=2, max_size=5), st.sampled_from([3, 4, 6]))
def test_sobolev_inequality_on_positive_zonal_functions(c, d):
    c = np.asarray(c)
    F = zonal_from_callable(lambda s: np.exp(sum(ci * s ** (i + 1) for i, ci in enumerate(c))), d)
    rep = sobolev_deficit(F)
    assert rep.deficit >= -1e-10 * rep.energy


def test_distance_of_optimizer_is_zero_and_ratio_refuses():
    F = preset_gstar(4)
    D = manifold_distance(F)
    assert abs(D.dist2) < 1e-10 * D.energy
    with pytest.raises(OnManifold):
        stability_ratio(F)


def test_closed_form_distance_agrees_with_direct_minimization():
    F = preset_two_bumps(3)
    closed = manifold_distance(F)
    direct = direct_distance(F, closed)
    assert abs(closed.dist2 - direct.dist2) <= 1e-6 * closed.energy
    assert closed.dist2 > 0


@functools.lru_cache(maxsize=None)
def _two_bumps_distance(d):
    F = preset_two_bumps(d)
    return F, manifold_distance(F).dist2


@given(st.floats(0.2, 5.0))
@settings(max_examples=5)
def test_distance_is_two_homogeneous(c):
    F, base = _two_bumps_distance(4)
    G = F.with_values(c * F.values)
    assert manifold_distance(G).dist2 == pytest.approx(c * c * base, rel=1e-7)


def test_bubble_has_unit_mass_in_critical_norm():
    d = 5
    q = 2 * d / (d - 2)
    G = zonal_from_callable(lambda s: bubble((0.0, 0.8), 0.0, s, d), d)
    mass = float(np.sum(G.grid.weights * G.values ** q))
    assert mass == pytest.approx(1.0, rel=1e-10)


def test_lift_and_pullback_round_trip():
    d = 3
    f = radial_from_callable(lambda r: np.exp(-r * r), d, 2048)
    F = stereographic_lift(f)
    g = stereographic_pullback(F)
    mask = g.nodes < 3
    ref = np.exp(-g.nodes[mask] ** 2)
    assert np.max(np.abs(g.values[mask] - ref)) < 1e-4
    assert F.axis == "v"
    assert sphere_area(d) > 0
