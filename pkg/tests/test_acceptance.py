"""Acceptance criteria 1-12, one test each.

Every test records a PASS/FAIL line in ``RESULTS``; conftest prints them in
the terminal summary. Runtime budgets are part of each criterion.
"""
import functools
import math
import time
from fractions import Fraction

import mpmath as mp
import numpy as np
import pytest

from sobstab import constants as C
from sobstab import logsob as L
from sobstab.corpora import zonal_corpus
from sobstab.flows import competing_symmetries_run
from sobstab.manifold import (
    direct_distance,
    manifold_distance,
    preset_perturbed_optimizer,
    sobolev_deficit,
    stability_ratio,
)
from sobstab.pieces import i_terms_admissible
from sobstab.rearrange import IntervalUnion, LayeredFunction, continuous_1d_flow, slide_with_events
from sobstab.spectral import spectral_gap_residual
from sobstab.sweeps import cutting_sweeps, elementary_sweeps

RESULTS = {}


def record(k, ok, detail):
    line = f"CRITERION {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[k] = line
    print(line)
    return ok


class Clock:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


def test_c01_spectral_gap():
    with Clock() as clk:
        worst, zero_gap = Fraction(10 ** 9), Fraction(0)
        for d in range(3, 101):
            zero_gap = max(zero_gap, abs(spectral_gap_residual(2, d, exact=True)))
            for ell in range(2, 201):
                worst = min(worst, spectral_gap_residual(ell, d, exact=True))
    ok = worst >= 0 and float(zero_gap) < 1e-12 and clk.elapsed < 1.0
    assert record(1, ok, f"min residual {float(worst):.3g}, max |residual(l=2)| {float(zero_gap):.1g}, "
                  f"{clk.elapsed:.2f}s")


def test_c02_taylor_sharpness():
    eps = (1e-1, 1e-2, 1e-3)
    worst, monotone, slow = 0.0, True, 0.0
    for d in (3, 4, 6):
        with Clock() as clk:
            target = 4.0 / (d + 4)
            gaps = [abs(stability_ratio(preset_perturbed_optimizer(d, e)) / target - 1) for e in eps]
        monotone = monotone and all(b < a for a, b in zip(gaps, gaps[1:]))
        worst = max(worst, gaps[-1])
        slow = max(slow, clk.elapsed)
    ok = worst < 0.02 and monotone and slow < 60
    assert record(2, ok, f"relative gap at eps=1e-3 {worst:.2e}, monotone {monotone}, slowest d {slow:.1f}s")


def test_c03_elementary_sweeps():
    with Clock() as clk:
        res = elementary_sweeps()
    lo = min(v["min_residual"] for v in res.values())
    few = min(v["points"] for v in res.values())
    ok = lo >= -1e-12 and few >= 10 ** 5 and clk.elapsed < 60
    assert record(3, ok, f"{len(res)} inequalities, min residual {lo:.3g}, min points {few}, "
                  f"{clk.elapsed:.1f}s")


def test_c04_cutting_estimates():
    with Clock() as clk:
        res = cutting_sweeps()
    ok = min(res["ptw"], res["cutting"]) >= -1e-12 and clk.elapsed < 60
    assert record(4, ok, f"ptw {res['ptw']:.3g}, cutting {res['cutting']:.3g}, {res['points']} points, "
                  f"{clk.elapsed:.1f}s")


def test_c05_constant_ledger():
    with Clock() as clk:
        bad = []
        worst_I = math.inf
        for eps0 in (0.05, 1.0 / 6.0, 0.3):
            for d in (6, 10, 30):
                led = C.build_ledger(d, eps0)
                if not (led.positive() and 0 < led.dtilde < 1 and led.beta <= 2 * mp.log(2)
                        and led.estI1_identity_residual < 1e-14):
                    bad.append((eps0, d))
                for r in zonal_corpus(4, d, seed=d, signed=True):
                    rep = i_terms_admissible(r, eps0, led)
                    unit = rep.components["unit_I1"] / rep.components["grad"]
                    worst_I = min(worst_I, unit, float(rep.I1), float(rep.I2), float(rep.I3))
    ok = not bad and worst_I >= -1e-8 and clk.elapsed < 300
    assert record(5, ok, f"9 ledgers, failures {bad}, min I-term {worst_I:.3g}, {clk.elapsed:.1f}s")


def test_c06_lowdim_bounds():
    with Clock() as clk:
        rows = []
        for d in (3, 4, 5, 6):
            v, _ = C.lowdim_lower_bound(d)
            vg, _ = C.lowdim_grid_scan(d, 10 ** 6)
            rows.append((d, v, abs(v - vg), 0 < v < 4 / (d + 4)))
    ok = all(r[3] and r[2] < 1e-8 for r in rows) and clk.elapsed < 10
    assert record(6, ok, ", ".join(f"d={d}: {v:.6f}" for d, v, _, _ in rows)
                  + f"; max scan gap {max(r[2] for r in rows):.1g}, {clk.elapsed:.1f}s")


def test_c07_competing_symmetries():
    with Clock() as clk:
        fails, iters = [], []
        for i, F in enumerate(zonal_corpus(10, 3, seed=7, axis="p")):
            tr = competing_symmetries_run(F, n_max=40, tol=0.01)
            nq, g, sup = map(np.asarray, (tr.norm_q, tr.grad_norm, tr.sup))
            good = (np.all(np.abs(nq - nq[0]) <= 1e-3 * nq[0])
                    and np.all(np.diff(g) <= 1e-6 * g[:-1])
                    and np.all(np.diff(np.abs(sup)) >= -1e-6 * np.abs(sup[:-1]))
                    and tr.converged and tr.hf_gap[-1] < 0.01)
            iters.append(len(tr) - 1)
            if not good:
                fails.append(i)
    ok = not fails and clk.elapsed < 600
    assert record(7, ok, f"10 functions, failures {fails}, iterations {min(iters)}-{max(iters)}, "
                  f"{clk.elapsed:.0f}s")


def _random_union(rng):
    k = int(rng.integers(2, 7))
    halves = [Fraction(int(rng.integers(1, 64)), 32) for _ in range(k)]
    x, centers = float(rng.uniform(-8, 8)), []
    for a in halves:
        x += float(a)
        centers.append(x)
        x += float(a) + float(rng.uniform(0.05, 3.0))
    return IntervalUnion(tuple(centers), tuple(halves))


def _event_times_oracle(u):
    """Merge times of the sliding flow, simulated independently in 50-digit arithmetic."""
    with mp.workdps(50):
        c = [mp.mpf(b) for b in u.centers]
        h = [mp.mpf(a.numerator) / a.denominator for a in u.halves]
        t, times = mp.mpf(0), []
        while len(c) > 1:
            dt = min(mp.log((c[k + 1] - c[k]) / (h[k] + h[k + 1])) for k in range(len(c) - 1))
            t += dt
            c = [b * mp.exp(-dt) for b in c]
            nc, nh = [c[0]], [h[0]]
            for b, a in zip(c[1:], h[1:]):
                if b - nc[-1] <= (nh[-1] + a) * (1 + mp.mpf(10) ** -30):
                    lo, hi = nc[-1] - nh[-1], b + a
                    nc[-1], nh[-1] = (lo + hi) / 2, (hi - lo) / 2
                else:
                    nc.append(b)
                    nh.append(a)
            c, h = nc, nh
            times.append(t)
        return [float(x) for x in times]


def test_c08_continuous_1d_flow():
    rng = np.random.default_rng(8)
    with Clock() as clk:
        measure_ok = end_ok = norm_ok = energy_ok = True
        touch_err = 0.0
        for _ in range(200):
            u = _random_union(rng)
            v, events = slide_with_events(u, math.inf)
            measure_ok &= all(e.measure_before == e.measure_after == u.measure for e in events)
            end_ok &= v.centers == (0.0,) and v.halves == (u.measure / 2,)
            oracle = _event_times_oracle(u)
            if len(oracle) != len(events):
                touch_err = math.inf
            else:
                touch_err = max([touch_err] + [abs(a - e.time) for a, e in zip(oracle, events)])
        x = np.linspace(-5, 5, 401)
        for seed in range(10):
            r = np.random.default_rng(seed)
            vals = sum(r.uniform(0.3, 1.0) * np.exp(-((x - c) / 0.5) ** 2) for c in r.uniform(-3.5, 3.5, 3))
            f = LayeredFunction.from_samples(x, np.round(vals[:-1], 2), max_layers=24)
            base = [f.lp_integral(p) for p in (1.0, 2.0, 6.0)]
            prev = math.inf
            for tau in list(np.linspace(0, 4, 41)) + [math.inf]:
                g = continuous_1d_flow(f, float(tau))
                norm_ok &= [g.lp_integral(p) for p in (1.0, 2.0, 6.0)] == base
                E = g.smoothed_energy(0.25)
                energy_ok &= E <= prev + 1e-8
                prev = E
            end = continuous_1d_flow(f, math.inf)
            end_ok &= end.lp_distance(f.rearranged(), 1.0) == 0.0
    ok = measure_ok and end_ok and norm_ok and energy_ok and touch_err < 1e-12 and clk.elapsed < 60
    assert record(8, ok, f"measure {measure_ok}, end state {end_ok}, touch err {touch_err:.1g}, "
                  f"norms exact {norm_ok}, energy monotone {energy_ok}, {clk.elapsed:.1f}s")


@functools.lru_cache(maxsize=1)
def _global_corpus():
    """50 zonal functions over d in {3, 4, 6}, half of them signed."""
    out = []
    for d, n in ((3, 17), (4, 17), (6, 16)):
        half = n // 2
        out += [(d, F) for F in zonal_corpus(n - half, d, seed=100 + d)]
        out += [(d, F) for F in zonal_corpus(half, d, seed=200 + d, signed=True)]
    rows = []
    for d, F in out:
        rep = sobolev_deficit(F)
        dist = manifold_distance(F)
        rows.append((d, F, rep, dist))
    return rows


def test_c09_global_inequality():
    with Clock() as clk:
        rows = _global_corpus()
        beta = C.build_ledger(6).beta
        bad, ratios = [], []
        for i, (d, F, rep, dist) in enumerate(rows):
            margin = mp.mpf(rep.deficit) - beta / d * mp.mpf(dist.dist2)
            ratios.append(rep.deficit / dist.dist2)
            if not (margin >= 0 and dist.dist2 > 0):
                bad.append(i)
    ok = not bad and len(rows) == 50 and clk.elapsed < 1800
    assert record(9, ok, f"{len(rows)} functions, counterexamples {len(bad)}, "
                  f"min deficit/dist^2 {min(ratios):.3f}, beta {mp.nstr(beta, 3)}, {clk.elapsed:.0f}s")


def test_c10_distance_oracles():
    rows = _global_corpus()
    with Clock() as clk:
        gaps = [abs(dist.dist2 - direct_distance(F, dist).dist2) / dist.dist2 for _, F, _, dist in rows]
    ok = max(gaps) <= 1e-6 and clk.elapsed < 300
    assert record(10, ok, f"{len(gaps)} functions, max relative gap {max(gaps):.2e}, {clk.elapsed:.0f}s")


def test_c11_log_sobolev():
    rng = np.random.default_rng(11)
    with Clock() as clk:
        exp_worst = 0.0
        for N in (1, 2, 3):
            for _ in range(5):
                u = L.exp_family(N, rng.normal(0, 1, N), float(rng.uniform(0.2, 3)))
                exp_worst = max(exp_worst, abs(L.logsob_deficit(u)))
        beta_ls = C.beta_values(C.build_ledger(6))[2]
        coef = float(beta_ls) * math.pi / 2
        corpus = L.random_corpus(150, seed=11) + L.random_corpus(50, seed=12, signed=True)
        margin, agree = math.inf, 0.0
        for u in corpus:
            res = L.logsob_rhs_inf(u, cross_check=True)
            margin = min(margin, L.logsob_deficit(u) - coef * res.value)
            agree = max(agree, res.agreement)
        split = max(L.split_sign_logsob(u).residual for u in corpus[150:])
    ok = exp_worst < 1e-8 and margin >= -1e-8 and split < 1e-6 and agree <= 1e-8 and clk.elapsed < 300
    assert record(11, ok, f"exp family {exp_worst:.1g}, min margin {margin:.3g} over {len(corpus)}, "
                  f"split {split:.1g}, rhs agreement {agree:.1g}, {clk.elapsed:.0f}s")


def test_c12_large_d_bridge():
    with Clock() as clk:
        zd = max(abs(math.expm1(a - b)) for a, b in (L.log_z_d(d) for d in range(3, 501)))
        gap500 = abs(L.z_d_pow(500) - math.e / 4) / (math.e / 4)
        ident = 0.0
        for d in range(3, 13):
            for N in range(1, min(d, 4)):
                lhs, rhs = L.limit_check_dz(d, N, [0.4] * N)
                ident = max(ident, abs(lhs - rhs) / rhs)
                lhs, rhs = L.limit_check_zeta(d, N, 1.2, 0.8)
                ident = max(ident, abs(lhs - rhs) / rhs)
        sweep = L.ansatz_deficit_sweep(L.bump_preset(), [10, 20, 40, 60])
        a60 = sweep.gap[sweep.d.index(60)]
    ok = zd < 1e-10 and gap500 < 0.01 and ident < 1e-6 and a60 < 0.05 and clk.elapsed < 600
    assert record(12, ok, f"Z_d forms {zd:.1g}, Z_500 gap {gap500:.2e}, fiber identities {ident:.1g}, "
                  f"ansatz gap at d=60 {a60:.3f}, {clk.elapsed:.0f}s")
