"""Explicit constants of the local stability argument.

The pointwise cutting constants are not given in closed form in the source
argument, so they are computed here as numerical suprema over their stated
domains and then inflated by a safety factor. Quantities such as 3^{-2K}
are far below double precision; they are carried as ``mpmath.mpf``.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any

import mpmath as mp
import numpy as np
from scipy.optimize import brentq, minimize_scalar

__all__ = [
    "SAFETY", "UpperBoundConstants", "c_upper_bound_constants", "c_M", "c_gamma_eps_M",
    "ConstantLedger", "build_ledger", "lowdim_lower_bound", "lowdim_grid_scan",
    "be_from_pos", "beta_values", "WIRINGS",
]

SAFETY = 1.05
SQRT_E = math.sqrt(math.e)
WIRINGS = ("final", "intermediate")


@dataclass(frozen=True)
class UpperBoundConstants:
    M: float
    Mbar: float
    C1_MMbar: float
    C1_Mbar: float
    C2_MMbar: float
    C_M: float
    C_MMbar: float


def _theta_grid(n: int = 400) -> np.ndarray:
    # log-spaced towards theta -> 0 plus uniform up to 1
    return np.unique(np.concatenate([np.logspace(-8, 0, n), np.linspace(1e-3, 1.0, n)]))


def _sup_c1_MMbar(M: float, Mbar: float) -> float:
    th = _theta_grid()[:, None]
    x = np.linspace(1.0 + M, 1.0 + M + Mbar, 2001)[None, :]
    vals = x ** 2 * np.expm1(th * np.log(x)) / th
    return float(vals.max())


def _sup_c1_Mbar(Mbar: float) -> float:
    th = _theta_grid()[:, None]
    r = np.linspace(0.0, min(Mbar, 1.0), 4001)[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = np.where(r > 0, -(r ** 2) * np.expm1(th * np.log(np.where(r > 0, r, 1.0))) / th, 0.0)
    # the supremum is approached as theta -> 0, where it equals max_r (-r^2 ln r) = 1/(2e)
    return max(float(vals.max()), 0.5 / math.e)


def _c_M_bracket(M: float, mb: np.ndarray | float):
    L = np.log(mb)
    return ((1 + 2 * L) * (1 + M) + (2 + L) * (1 + M) ** 2 / mb) / L


def c_M(M: float, safety: float = SAFETY) -> float:
    """Smallest C with the far-field domination for every Mbar >= sqrt(e), times ``safety``."""
    if M <= 0:
        raise ValueError("M must be positive")
    grid = SQRT_E * np.logspace(0, 12, 20001)
    vals = _c_M_bracket(M, grid)
    i = int(np.argmax(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    best = float(vals[i])
    if hi > lo:
        res = minimize_scalar(lambda m: -_c_M_bracket(M, m), bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-12})
        best = max(best, -float(res.fun))
    if not math.isfinite(best):
        raise ArithmeticError("supremum defining C_M is not finite")
    return safety * best


def c_upper_bound_constants(M: float, Mbar: float, safety: float = SAFETY) -> UpperBoundConstants:
    """Constants of the pointwise bound for q in [2, 3], each a grid supremum times ``safety``.

    ``C_MMbar`` also covers the band r <= M, which needs C >= 17 M / 2.
    """
    if M <= 0:
        raise ValueError("M must be positive")
    if Mbar < SQRT_E * (1 - 1e-12):
        raise ValueError("Mbar must be >= sqrt(e)")
    c1 = safety * _sup_c1_MMbar(M, Mbar)
    c1b = safety * _sup_c1_Mbar(Mbar)
    c2 = safety * (1.0 + M) ** 3
    cm = c_M(M, safety)
    cmm = max((c1 + c1b) / M ** 2, c2 / M ** 2, 8.5 * M)
    for v in (c1, c1b, c2, cm, cmm):
        if not math.isfinite(v):
            raise ArithmeticError("non-finite supremum")
    return UpperBoundConstants(M, Mbar, c1, c1b, c2, cm, cmm)


def _choose_Mbar(CM: float, eps: float) -> float:
    f = lambda m: CM * math.log(m) / m - eps
    if f(SQRT_E) <= 0:
        return SQRT_E
    if CM / math.e <= eps:  # the maximum of ln(m)/m is 1/e, at m = e
        return SQRT_E
    hi = math.e
    while f(hi) > 0:
        hi *= 2.0
    return brentq(f, max(math.e, hi / 2.0), hi, xtol=1e-12, rtol=1e-15)


def c_gamma_eps_M(gamma: float, eps: float, M: float, safety: float = SAFETY) -> tuple[float, float, UpperBoundConstants]:
    """(C_{gamma,eps,M}, Mbar, constants) with C = 8/gamma + 5 C_{M,Mbar}."""
    if not (0 < gamma < M / 2.0):
        raise ValueError("need 0 < gamma < M/2")
    if eps <= 0:
        raise ValueError("eps must be positive")
    CM = c_M(M, safety)
    Mbar = _choose_Mbar(CM, eps)
    ub = c_upper_bound_constants(M, Mbar, safety)
    return 8.0 / gamma + 5.0 * ub.C_MMbar, Mbar, ub


# ---------------------------------------------------------------------------
# the ledger
# ---------------------------------------------------------------------------

def _mpf_str(x) -> str:
    return mp.nstr(x, 17, min_fixed=-5, max_fixed=5)


@dataclass
class ConstantLedger:
    d: int
    eps0: float
    wiring: str
    q: float
    theta: float
    eps1: float
    eps2: float
    gamma: float
    eps: float
    M: float
    Mbar: float
    sigma0: float
    C_M: float
    C_MMbar: float
    C_eps: float
    delta1: float
    K: int
    delta2: Any
    dtilde: Any
    beta: Any
    sigma0_bar: Any
    estI1_identity_residual: float
    K_check: Any
    ptw_r1_margin: float
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        out = {}
        for k, v in asdict(self).items():
            out[k] = _mpf_str(v) if isinstance(v, mp.mpf) else v
        return out

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    def table(self) -> str:
        rows = [(k, str(v)) for k, v in self.to_dict().items() if k != "notes"]
        w = max(len(k) for k, _ in rows)
        return "\n".join(f"{k.ljust(w)}  {v}" for k, v in rows)

    def positive(self) -> bool:
        vals = [self.eps1, self.eps2, self.gamma, self.eps, self.M, self.Mbar, self.sigma0,
                self.C_M, self.C_MMbar, self.C_eps, self.delta1, self.K]
        return all(v > 0 and math.isfinite(v) for v in vals) and all(
            v > 0 for v in (self.delta2, self.dtilde, self.beta))


def _wiring_params(eps0: float, wiring: str) -> tuple[float, float, float]:
    base = 1.0 - 3.0 * eps0
    if wiring == "final":
        gamma = eps2 = 0.25 * base
        eps1 = 0.5 * gamma
    elif wiring == "intermediate":
        eps1 = 0.5 * base
        eps2 = 0.25 * base
        gamma = 0.5 * eps1
    else:
        raise ValueError(f"unknown wiring {wiring!r}; choose from {WIRINGS}")
    return eps1, eps2, gamma


def build_ledger(d: int, eps0: float = 1.0 / 6.0, wiring: str = "final", M: float = 1.0,
                 safety: float = SAFETY) -> ConstantLedger:
    if int(d) != d or d < 6:
        raise ValueError("the cutting route needs an integer d >= 6")
    if not (0 < eps0 < 1.0 / 3.0):
        raise ValueError("eps0 must lie in (0, 1/3)")
    q = 2.0 * d / (d - 2.0)
    theta = q - 2.0
    eps1, eps2, gamma = _wiring_params(eps0, wiring)
    eps = gamma
    if M < 2 * gamma:
        raise ValueError("need M >= 2 gamma")
    sigma0 = 2.0 * eps2 / q
    C_eps, Mbar, ub = c_gamma_eps_M(gamma, eps, M, safety)
    k0 = 1.0 + (2.0 * math.sqrt(3.0) + 1.0) * eps0
    delta1 = 4.0 * eps1 * eps2 * gamma ** 2 / (q * k0 ** 2)
    K = 1 + int(math.floor(2.0 * (1.0 + eps0 + sigma0 + C_eps) / (1.0 - eps0)))
    with mp.workdps(30):
        delta2 = mp.mpf(gamma) ** 2 / 4 * mp.power(3, -2 * K)
        dtilde = min(mp.mpf(delta1), delta2)
        beta = min(2 * mp.mpf(eps0) * dtilde / (1 + dtilde), 2 * mp.log(2))
        sigma0_bar = k0 ** 2 * dtilde / (2 * eps1 * gamma ** 2)
        K_check = mp.power(3, K) * mp.mpf(gamma) ** (-q / 2) * dtilde ** (q / 4)
    ident = abs(delta1 * q * sigma0 / (2.0 * eps2) - delta1) / delta1
    notes = []
    margin = eps1 - 4.0 * gamma / q
    if margin < 0:
        notes.append("r1 coefficient of the cutting bound exceeds eps1*theta under this wiring")
    return ConstantLedger(
        d=int(d), eps0=float(eps0), wiring=wiring, q=q, theta=theta, eps1=eps1, eps2=eps2,
        gamma=gamma, eps=eps, M=float(M), Mbar=Mbar, sigma0=sigma0, C_M=ub.C_M,
        C_MMbar=ub.C_MMbar, C_eps=C_eps, delta1=delta1, K=K, delta2=delta2, dtilde=dtilde,
        beta=beta, sigma0_bar=sigma0_bar, estI1_identity_residual=ident, K_check=K_check,
        ptw_r1_margin=margin, notes=notes)


# ---------------------------------------------------------------------------
# low dimensions, sign splitting, final values
# ---------------------------------------------------------------------------

def _lowdim_objective(d: int):
    from .pieces import m_nu

    def f(delta):
        delta = np.asarray(delta, dtype=float)
        return delta * m_nu(np.sqrt(delta / (1.0 - delta)), d)
    return f


def lowdim_grid_scan(d: int, n: int = 10 ** 6) -> tuple[float, float]:
    f = _lowdim_objective(d)
    x = (np.arange(n) + 0.5) / n
    v = f(x)
    i = int(np.argmax(v))
    return float(v[i]), float(x[i])


def _golden_max(f, a: float, b: float, tol: float = 1e-15) -> float:
    g = (math.sqrt(5.0) - 1.0) / 2.0
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol * max(1.0, abs(a)):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def lowdim_lower_bound(d: int, starts: int = 8) -> tuple[float, float]:
    """max over 0 < delta < 1 of delta * m(sqrt(delta/(1-delta))) by multi-start golden section."""
    if d not in (3, 4, 5, 6):
        raise ValueError("defined for d in {3, 4, 5, 6}")
    f = _lowdim_objective(d)
    coarse = (np.arange(4096) + 0.5) / 4096
    vals = f(coarse)
    order = np.argsort(vals)[::-1][:starts]
    best = (-math.inf, math.nan)
    h = 1.0 / 4096
    for i in order:
        c = coarse[i]
        x = _golden_max(lambda t: float(f(t)), max(c - h, 1e-15), min(c + h, 1 - 1e-15))
        v = float(f(x))
        if v > best[0]:
            best = (v, x)
    if not best[0] > 0:
        raise ArithmeticError("no positive lower bound found")
    return best


def be_from_pos(c_pos: float, d: int) -> float:
    if c_pos <= 0:
        raise ValueError("c_pos must be positive")
    return min(0.5 * c_pos, 1.0 - 2.0 ** (-2.0 / d))


def beta_values(ledger: ConstantLedger):
    """(beta, beta_star, beta_logsob); beta_star is the d-independent ledger value used as a proxy."""
    beta = ledger.beta
    beta_star = beta
    beta_ls = min(beta_star, 4 * mp.log(2)) / 2
    return beta, beta_star, beta_ls
