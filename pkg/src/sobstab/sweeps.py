"""Dense sweeps of the pointwise inequalities, shared by the CLI and the test suite."""
from __future__ import annotations

import numpy as np

from . import constants as C
from .pieces import CutParams, cutting_residual, elementary_residual_refined, expand_check, orthogonalize, ptw_bound_residual

SWEEP_Q = tuple(np.round(np.linspace(2.05, 3.0, 20), 4))


def _signed_axis(n: int, top: float = 1e3) -> np.ndarray:
    """Points in [-1, top], dense near -1, 0 and in the far field."""
    k = n // 3
    neg = -np.logspace(-14, 0, k)
    pos = np.logspace(-14, np.log10(top), k)
    lin = np.linspace(-1.0, 4.0, n - 2 * k)
    return np.unique(np.concatenate([neg, [-1.0, 0.0], pos, lin]))


def elementary_sweeps(n: int = 100_000, seed: int = 0) -> dict:
    """Minimum residual and point count per elementary inequality.

    Each (point, exponent) pair counts as one point; exponent ranges follow
    each inequality's hypotheses.
    """
    rng = np.random.default_rng(seed)
    out = {}
    per_q = 10
    m = n // per_q + 1
    t_pos = np.concatenate([[0.0], np.logspace(-14, 3, m - 1)])
    t_all = _signed_axis(m)
    plans = {
        "ineq2": (t_pos, np.linspace(2.0, 6.0, per_q)),
        "ineq1_low": (t_all, np.linspace(2.0, 3.0, per_q)),
        "ineq1_mid": (t_all, np.linspace(3.0, 4.0, per_q)),
        "firstlemma": (t_all, np.linspace(2.0, 3.0, per_q)),
    }
    for kind, (t, qs) in plans.items():
        res = [float(np.min(elementary_residual_refined(kind, t, float(q)))) for q in qs]
        out[kind] = {"min_residual": min(res), "points": int(t.size * qs.size)}
    for kind in ("secondlemma_a", "secondlemma_b"):
        best, count = np.inf, 0
        for Mbar in (float(np.sqrt(np.e)), 2.0, 5.0):
            v = Mbar * np.logspace(0, 3, m // 3 + 1)
            for q in np.linspace(2.0, 3.0, per_q):
                best = min(best, float(np.min(elementary_residual_refined(kind, v, float(q), Mbar))))
                count += v.size
        out[kind] = {"min_residual": best, "points": count}
    for branch, qs in (("2<=q<=3", (2.0, 2.5, 3.0)), ("3<q<=4", (3.2, 3.6, 4.0)), ("q=6", (6.0,))):
        best, count = np.inf, 0
        trials = max(1, -(-n // (8 * len(qs))))
        for q in qs:
            for _ in range(trials):
                k = 8
                w = rng.uniform(0.1, 1.0, k)
                u = rng.uniform(0.2, 2.0, k)
                r = orthogonalize(u, rng.normal(0, 0.5, k), w, q)
                # scaling keeps orthogonality; shrink until u + r >= 0
                neg = r < 0
                if np.any(neg):
                    r = r * min(1.0, 0.999 * float(np.min(u[neg] / -r[neg])))
                best = min(best, expand_check(u, r, w, q))
                count += k
        out[f"expand[{branch}]"] = {"min_residual": best, "points": count}
    return out


def cutting_sweeps(ledger=None, n: int = 5000) -> dict:
    """Pointwise cutting bounds with ledger constants over r in [-1, 1e3] and q in [2.05, 3]."""
    if ledger is None:
        ledger = C.build_ledger(6)
    r = _signed_axis(n)
    out = {"ptw": np.inf, "cutting": np.inf, "points": 0}
    for q in SWEEP_Q:
        cut = CutParams(ledger.gamma, ledger.M, ledger.Mbar, ledger.eps, float(q))
        out["ptw"] = min(out["ptw"], float(np.min(ptw_bound_residual(r, cut, ledger.C_M, ledger.C_MMbar))))
        out["cutting"] = min(out["cutting"], float(np.min(cutting_residual(r, cut, ledger.C_eps))))
        out["points"] += r.size
    return out
