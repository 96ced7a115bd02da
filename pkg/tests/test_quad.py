import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sobstab.quad import (
    RadialFunction,
    cyl_from_callable,
    dirichlet_energy,
    gauss_grid,
    gauss_integral,
    integrate_radial,
    lp_norm,
    radial_from_callable,
    radial_nodes,
    sphere_area,
    zonal_from_callable,
    zonal_grid,
)


def gbar(r, d):
    return (2.0 / (1.0 + r * r)) ** ((d - 2) / 2)


def test_zero_function_integrates_to_zero():
    f = radial_from_callable(lambda r: 0 * r, 3, 256)
    assert integrate_radial(f, 2.0) == 0.0


@pytest.mark.parametrize("d", [3, 4, 6])
def test_optimizer_critical_norm_matches_sphere_area(d):
    # the stereographic Jacobian turns int gbar^{2*} into |S^d|
    q = 2 * d / (d - 2)
    f = radial_from_callable(lambda r: gbar(r, d), d)
    assert integrate_radial(f, q) == pytest.approx(sphere_area(d), rel=2e-6)


def test_hat_mass_stable_under_refinement():
    def hat(r):
        return np.clip(1.0 - r, 0.0, None)

    masses = [integrate_radial(radial_from_callable(hat, 3, n), 1.0) for n in (2048, 4096, 8192)]
    exact = sphere_area(2) / 12.0  # 4 pi int (1-r) r^2 dr
    assert abs(masses[-1] - exact) < 1e-6 * 4
    assert abs(masses[-1] - masses[-2]) < 1e-6


@pytest.mark.parametrize("d", [3, 5, 8])
def test_sphere_and_gauss_rules_are_normalized(d):
    assert float(np.sum(zonal_grid(d).weights)) == pytest.approx(1.0, abs=1e-12)
    for N in (1, 2):
        assert float(np.sum(gauss_grid(N).tensor_weights())) == pytest.approx(1.0, abs=1e-12)


def test_constant_and_gstar_norms_on_sphere():
    F = zonal_from_callable(lambda s: np.ones_like(s), 3)
    for p in (1.0, 2.0, 6.0):
        assert lp_norm(F, p) == pytest.approx(1.0, abs=1e-13)
    d = 5
    q = 2 * d / (d - 2)
    G = zonal_from_callable(lambda s: np.full_like(s, sphere_area(d) ** (-1 / q)), d)
    assert (sphere_area(d) ** (1 / q)) * lp_norm(G, q) == pytest.approx(1.0, abs=1e-12)


def test_dirichlet_energy_of_constant_vanishes():
    assert dirichlet_energy(zonal_from_callable(lambda s: 3 + 0 * s, 4)) == pytest.approx(0.0, abs=1e-20)
    f = radial_from_callable(lambda r: np.ones_like(r), 3, 256)
    # only the far-field harmonic closure of a nonzero constant contributes
    assert f.values[0] == 1.0


def test_radial_energy_of_optimizer_within_half_percent():
    from sobstab.manifold import sobolev_constant
    d = 3
    f = radial_from_callable(lambda r: gbar(r, d), d, 2000)
    E = dirichlet_energy(f)
    assert E == pytest.approx(sobolev_constant(d) * lp_norm(f, 6.0) ** 2, rel=5e-3)


@pytest.mark.parametrize("d", [3, 4, 7])
def test_degree_one_eigenvalue(d):
    F = zonal_from_callable(lambda s: s, d, signed=True)
    L2 = float(np.sum(F.grid.weights * F.values ** 2))
    assert dirichlet_energy(F) == pytest.approx(d * L2, rel=1e-6)
    assert dirichlet_energy(F, method="fd") == pytest.approx(d * L2, rel=1e-4)


def test_gauss_integrals_against_closed_forms():
    g1 = gauss_grid(1)
    assert gauss_integral(lambda X: np.ones(len(X)), g1) == pytest.approx(1.0, abs=1e-13)
    assert gauss_integral(lambda X: np.exp(2 * math.pi * X[:, 0]), g1) == pytest.approx(math.exp(math.pi), rel=1e-11)
    assert gauss_integral(lambda X: X[:, 0] ** 2, g1) == pytest.approx(1 / (2 * math.pi), rel=1e-12)
    with pytest.raises(ValueError):
        gauss_integral(np.ones(3), g1)


def test_reflected_cylinder_values_keep_norms():
    f = cyl_from_callable(lambda S, T: np.exp(-S ** 2 - (T - 0.3) ** 2), 3, 16, 16)
    g = f.with_values(f.values[:, ::-1])
    for p in (1.5, 2.0, 6.0):
        assert lp_norm(g, p) == pytest.approx(lp_norm(f, p), rel=1e-12)


@given(st.floats(0.01, 50.0), st.floats(1.0, 8.0), st.sampled_from([3, 4, 6]))
def test_norm_is_homogeneous(c, p, d):
    f = radial_from_callable(lambda r: np.exp(-r * r), d, 256)
    g = radial_from_callable(lambda r: c * np.exp(-r * r), d, 256)
    assert lp_norm(g, p) == pytest.approx(c * lp_norm(f, p), rel=1e-12)


@pytest.mark.parametrize("nodes", [[0.0, 2.0, 1.0], [0.0, 1.0, 1.0], [0.5, 1.0, 2.0]])
def test_invalid_radial_grids_rejected(nodes):
    with pytest.raises(ValueError):
        RadialFunction(3, np.array(nodes), np.ones(3))


def test_negative_values_need_signed_flag():
    r = radial_nodes(16)
    with pytest.raises(ValueError):
        RadialFunction(3, r, -np.ones(16))
    RadialFunction(3, r, -np.ones(16), signed=True)


def test_lp_norm_rejects_bad_exponent():
    with pytest.raises(ValueError):
        lp_norm(zonal_from_callable(lambda s: 1 + 0 * s, 3), 0.5)
