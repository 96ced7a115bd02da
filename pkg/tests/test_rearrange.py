import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sobstab.manifold import preset_two_bumps, sobolev_deficit
from sobstab.quad import cyl_from_callable, lp_norm, radial_from_callable, zonal_from_callable
from sobstab.rearrange import (
    IntervalUnion,
    Layered2D,
    LayeredFunction,
    chained_flow,
    continuous_1d_flow,
    decreasing_rearrangement,
    grid_energy_2d,
    phi_n,
    slide_intervals,
    slide_with_events,
    steiner_symmetrize,
    touch_time,
)


@st.composite
def unions(draw, max_k=6):
    k = draw(st.integers(1, max_k))
    halves = [Fraction(draw(st.integers(1, 40)), 16) for _ in range(k)]
    gaps = [draw(st.floats(0.05, 4.0)) for _ in range(k)]
    start = draw(st.floats(-10, 10))
    centers, x = [], start
    for a, g in zip(halves, gaps):
        x += float(a)
        centers.append(x)
        x += float(a) + g
    return IntervalUnion(tuple(centers), tuple(halves))


def test_interval_union_validation():
    with pytest.raises(ValueError):
        IntervalUnion((0.0, 0.5), (Fraction(1, 2), Fraction(1, 2)))
    with pytest.raises(ValueError):
        IntervalUnion((0.0,), (Fraction(0),))
    u = IntervalUnion.from_intervals([(0, 1), (0.5, 2), (3, 4)])
    assert len(u) == 2 and u.measure == Fraction(3)


@given(unions(), st.floats(0, 20))
def test_slide_preserves_measure_exactly(u, t):
    v, events = slide_with_events(u, t)
    assert v.measure == u.measure
    for e in events:
        assert e.measure_before == e.measure_after
        assert e.count_after < e.count_before


@given(unions())
def test_slide_to_infinity_is_the_centered_interval(u):
    v = slide_intervals(u, math.inf)
    assert len(v) == 1
    assert v.centers[0] == 0.0 and v.halves[0] == u.measure / 2


@given(unions(), st.floats(0, 3), st.floats(0, 3))
def test_slide_is_a_semigroup(u, s, t):
    a = slide_intervals(slide_intervals(u, s), t)
    b = slide_intervals(u, s + t)
    assert len(a) == len(b) and a.halves == b.halves
    assert np.allclose(a.centers, b.centers, rtol=1e-9, atol=1e-9)


def test_touch_time_two_intervals():
    u = IntervalUnion((-2.0, 2.0), (Fraction(1), Fraction(1)))
    t, k = touch_time(u)
    assert t == pytest.approx(math.log(2.0)) and k == 0


def test_phi_n():
    assert phi_n(0.0, 0) == 0.0
    assert phi_n(1.5, 1) == pytest.approx(math.e - 1)
    assert phi_n(0.9999999, 0) == math.inf
    with pytest.raises(ValueError):
        phi_n(1.0, 0)


def _profile(seed, n=24):
    rng = np.random.default_rng(seed)
    edges = np.linspace(-6, 6, n + 1)
    vals = np.maximum(rng.normal(1.0, 0.8, n), 0.0)
    vals[rng.random(n) < 0.25] = 0.0
    return LayeredFunction.from_samples(edges, np.round(vals, 3))


@settings(max_examples=15)
@given(st.integers(0, 10 ** 6))
def test_1d_flow_equimeasurable_and_energy_monotone(seed):
    f = _profile(seed)
    if not f.layers:
        return
    star = f.rearranged()
    prev_E, prev_D = math.inf, math.inf
    for tau in (0.0, 0.25, 0.5, 0.9, 1.0, 2.0, math.inf):
        g = continuous_1d_flow(f, tau)
        assert g.measures() == f.measures()
        assert not g.nesting_violations()
        E = g.smoothed_energy(0.3)
        D = g.lp_distance(star, 2.0)
        assert E <= prev_E * (1 + 1e-12) + 1e-12
        assert D <= prev_D * (1 + 1e-9) + 1e-12
        prev_E, prev_D = E, D
    assert continuous_1d_flow(f, math.inf).lp_distance(star, 2.0) < 1e-12


def test_layered_json_round_trip():
    f = _profile(3)
    g = LayeredFunction.from_json(f.to_json())
    assert g.measures() == f.measures() and g.thresholds == f.thresholds


def test_2d_chained_flow_preserves_layer_measures():
    x = np.linspace(-3, 3, 13)
    X, Y = np.meshgrid(0.5 * (x[1:] + x[:-1]), 0.5 * (x[1:] + x[:-1]), indexing="ij")
    vals = np.round(np.exp(-(X - 1) ** 2 - (Y + 0.5) ** 2) + 0.5 * np.exp(-(X + 1.5) ** 2 - Y ** 2), 2)
    f = Layered2D.from_grid(x, x, vals, max_layers=8)
    m0 = [E.measure for E in f.layers]
    E0 = f.smoothed_energy(0.4)
    for tau in (0.5, 1.5, 3.0):
        g = chained_flow(f, tau)
        assert np.allclose([E.measure for E in g.layers], m0, rtol=1e-12)
        assert g.lp_norm(3.0) == pytest.approx(f.lp_norm(3.0), rel=1e-12)
        assert g.smoothed_energy(0.4) <= E0 * (1 + 1e-10)


@settings(max_examples=30)
@given(st.integers(0, 10 ** 6))
def test_steiner_rearranges_and_lowers_energy(seed):
    rng = np.random.default_rng(seed)
    v = np.maximum(rng.normal(0.5, 1.0, (9, 11)), 0)
    s = steiner_symmetrize(v, axis=1)
    assert np.allclose(np.sort(s, axis=1), np.sort(v, axis=1))
    assert grid_energy_2d(s, 1.0, 1.0) <= grid_energy_2d(v, 1.0, 1.0) + 1e-12
    assert np.allclose(steiner_symmetrize(s, axis=1), s)


def test_slice_rearrangement_is_centered():
    prof = decreasing_rearrangement(np.array([0.0, 2.0, 1.0, 3.0]), widths=np.ones(4))
    assert prof(0.0) == 3.0 and prof(0.75) == 2.0 and prof(10.0) == 0.0


def test_radial_rearrangement_fixes_decreasing_profiles():
    f = radial_from_callable(lambda r: 1 / (1 + r * r) ** 0.5, 3, 1024)
    g = decreasing_rearrangement(f)
    mask = f.nodes < 20
    assert np.max(np.abs(g.values[mask] - f.values[mask])) < 1e-6


def test_cylinder_rearrangement_keeps_norms():
    f = cyl_from_callable(lambda S, T: np.exp(-S ** 2 - (T - 1) ** 2), 3, 96, 192)
    g = decreasing_rearrangement(f)
    for p in (2.0, 6.0):
        assert lp_norm(g, p) == pytest.approx(lp_norm(f, p), rel=2e-3)


@pytest.mark.parametrize("d", [3])
def test_zonal_rearrangement_equimeasurable_and_energy_decreasing(d):
    F = preset_two_bumps(d)
    G = decreasing_rearrangement(F)
    q = 2 * d / (d - 2)
    a, b = sobolev_deficit(F), sobolev_deficit(G)
    assert b.norm_q == pytest.approx(a.norm_q, rel=1e-6)
    assert b.energy <= a.energy
    assert G.axis == "v"
    with pytest.raises(ValueError):
        decreasing_rearrangement(zonal_from_callable(lambda s: s, d, signed=True))
    assert q > 2
