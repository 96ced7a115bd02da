"""Pointwise inequalities, the three-band cutting of a perturbation, and the local deficit terms.

A perturbation r >= -1 of the constant function on S^d is cut into
r1 = min(r, gamma), r2 = min((r - gamma)_+, M - gamma) and r3 = (r - M)_+.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any

import mpmath as mp
import numpy as np

from .quad import ZonalFunction, conformal_A, dirichlet_energy
from .spectral import remove_low_modes

__all__ = [
    "CutParams", "split_pieces", "elementary_residual", "ELEMENTARY_KINDS", "ptw_bound_residual",
    "cutting_residual", "elementary_residual_refined", "expand_check", "orthogonalize", "m_nu", "ITermsReport", "i_terms",
    "i_terms_admissible", "LocalCheck", "local_deficit_check", "sanitize_perturbation",
]

SQRT_E = math.sqrt(math.e)


@dataclass(frozen=True)
class CutParams:
    gamma: float
    M: float
    Mbar: float
    eps: float
    q: float

    def __post_init__(self):
        if not (0 < self.gamma <= self.M):
            raise ValueError("need 0 < gamma <= M")
        if self.Mbar < SQRT_E * (1 - 1e-12):
            raise ValueError("Mbar must be >= sqrt(e)")
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.q < 2:
            raise ValueError("q must be >= 2")

    @property
    def theta(self) -> float:
        return self.q - 2.0


def split_pieces(r, gamma: float, M: float):
    """(r1, r2, r3) with r1 + r2 + r3 = r."""
    if not (0 < gamma < M):
        raise ValueError("need 0 < gamma < M")
    r = np.asarray(r, dtype=float)
    if np.any(r < -1):
        raise ValueError("r must be >= -1")
    r1 = np.minimum(r, gamma)
    r2 = np.clip(r - gamma, 0.0, M - gamma)
    r3 = np.maximum(r - M, 0.0)
    if r1.ndim == 0:
        return float(r1), float(r2), float(r3)
    return r1, r2, r3


def _pow_minus_linear(r, q):
    """(1+r)^q - 1 - q r with little cancellation near r = 0."""
    r = np.asarray(r, dtype=np.longdouble)
    with np.errstate(divide="ignore"):
        return np.expm1(q * np.log1p(r)) - q * r


# ---------------------------------------------------------------------------
# elementary inequalities: each returns RHS - LHS
# ---------------------------------------------------------------------------

def _res_ineq2(t, q):
    t = np.asarray(t, dtype=np.longdouble)
    if np.any(t < 0) or q < 2:
        raise ValueError("need t >= 0 and q >= 2")
    return (2.0 / q) * t - np.expm1((2.0 / q) * np.log1p(t))


def _res_ineq1_low(t, q):
    t = np.asarray(t, dtype=np.longdouble)
    if np.any(t < -1) or not (2 <= q <= 3):
        raise ValueError("need t >= -1 and 2 <= q <= 3")
    tp = np.maximum(t, 0)
    return 0.5 * q * (q - 1) * t ** 2 + tp ** q - _pow_minus_linear(t, q)


def _res_ineq1_mid(t, q):
    t = np.asarray(t, dtype=np.longdouble)
    if np.any(t < -1) or not (3 <= q <= 4):
        raise ValueError("need t >= -1 and 3 <= q <= 4")
    return (0.5 * q * (q - 1) * t ** 2 + q * (q - 1) * (q - 2) / 6.0 * t ** 3 + np.abs(t) ** q
            - _pow_minus_linear(t, q))


def _res_firstlemma(r, q):
    r = np.asarray(r, dtype=np.longdouble)
    if np.any(r < -1) or not (2 <= q <= 3):
        raise ValueError("need r >= -1 and 2 <= q <= 3")
    return 0.5 * q * (q - 1) * r ** 2 + (q - 2) * np.maximum(r, 0) ** 3 - _pow_minus_linear(r, q)


def _check_second(v, q, Mbar):
    v = np.asarray(v, dtype=np.longdouble)
    if Mbar < SQRT_E * (1 - 1e-12) or np.any(v < Mbar * (1 - 1e-15)) or q < 2:
        raise ValueError("need v >= Mbar >= sqrt(e) and q >= 2")
    return v


def _res_second_a(v, q, Mbar):
    v = _check_second(v, q, Mbar)
    L = math.log(Mbar)
    return (1 + 2 * L) / Mbar * (q - 2) * v ** q - (q * v ** (q - 1) - 2 * v)


def _res_second_b(v, q, Mbar):
    v = _check_second(v, q, Mbar)
    L = math.log(Mbar)
    return (0.5 * (1 + q) + L) / Mbar ** 2 * (q - 2) * v ** q - (0.5 * q * (q - 1) * v ** (q - 2) - 1)


ELEMENTARY_KINDS = {
    "ineq2": _res_ineq2,
    "ineq1_low": _res_ineq1_low,
    "ineq1_mid": _res_ineq1_mid,
    "firstlemma": _res_firstlemma,
    "secondlemma_a": _res_second_a,
    "secondlemma_b": _res_second_b,
}


def _mp_residual(kind: str, x, q, Mbar=None):
    """Scalar residual in 50-digit arithmetic, for points where float cancellation is too strong."""
    with mp.workdps(50):
        x, q = mp.mpf(x), mp.mpf(q)
        pml = (1 + x) ** q - 1 - q * x
        if kind == "ineq2":
            return 2 / q * x - ((1 + x) ** (2 / q) - 1)
        if kind == "ineq1_low":
            return q * (q - 1) / 2 * x ** 2 + max(x, 0) ** q - pml
        if kind == "ineq1_mid":
            return q * (q - 1) / 2 * x ** 2 + q * (q - 1) * (q - 2) / 6 * x ** 3 + abs(x) ** q - pml
        if kind == "firstlemma":
            return q * (q - 1) / 2 * x ** 2 + (q - 2) * max(x, 0) ** 3 - pml
        L = mp.log(Mbar)
        if kind == "secondlemma_a":
            return (1 + 2 * L) / Mbar * (q - 2) * x ** q - (q * x ** (q - 1) - 2 * x)
        if kind == "secondlemma_b":
            return (0.5 * (1 + q) + L) / Mbar ** 2 * (q - 2) * x ** q - (q * (q - 1) / 2 * x ** (q - 2) - 1)
    raise ValueError(f"unknown kind {kind!r}")


def elementary_residual_refined(kind: str, x, q: float, Mbar: float | None = None) -> np.ndarray:
    """Residuals with points inside the float roundoff band recomputed in 50-digit arithmetic."""
    x = np.asarray(x, dtype=float)
    args = (x, q) if Mbar is None else (x, q, Mbar)
    res = np.atleast_1d(elementary_residual(kind, *args)).astype(float)
    xl = np.abs(np.atleast_1d(x).astype(np.longdouble))
    scale = (1 + xl) ** max(q, 2.0) + xl ** 3 + 1
    band = np.abs(res) <= 1e-15 * np.asarray(scale, dtype=float)
    for i in np.flatnonzero(band):
        res[i] = float(_mp_residual(kind, float(np.atleast_1d(x)[i]), q, Mbar))
    return res


def elementary_residual(kind: str, *args):
    """RHS - LHS of one of the elementary inequalities; see ``ELEMENTARY_KINDS``.

    Arguments are (t, q) for the first four kinds and (v, q, Mbar) for the two
    far-field kinds. Evaluated in extended precision.
    """
    try:
        fn = ELEMENTARY_KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown kind {kind!r}") from None
    out = fn(*args)
    return float(out) if np.ndim(out) == 0 else np.asarray(out, dtype=float)


# ---------------------------------------------------------------------------
# pointwise cutting bounds
# ---------------------------------------------------------------------------

def ptw_bound_residual(r, cut: CutParams, C_M: float, C_MMbar: float):
    """RHS - LHS of the three-band pointwise bound for (1+r)^q - 1 - q r, q in [2, 3]."""
    if not (2 <= cut.q <= 3):
        raise ValueError("q must lie in [2, 3]")
    r = np.asarray(r, dtype=float)
    if np.any(r < -1):
        raise ValueError("r must be >= -1")
    q, th, g, M = cut.q, cut.theta, cut.gamma, cut.M
    r1 = np.minimum(r, g)
    r2 = np.clip(r - g, 0.0, max(M - g, 0.0))
    r3 = np.maximum(r - M, 0.0)
    r1, r2, r3 = (np.asarray(a, dtype=np.longdouble) for a in (r1, r2, r3))
    low = r <= M
    rhs = (0.5 * q * (q - 1) * (r1 + r2) ** 2 + 2 * (r1 + r2) * r3
           + (1 + C_M * th * math.log(cut.Mbar) / cut.Mbar) * r3 ** q
           + np.where(low, 1.5 * g * th * r1 ** 2 + C_MMbar * th * r2 ** 2, C_MMbar * th * M ** 2))
    out = rhs - _pow_minus_linear(r, q)
    return float(out) if out.ndim == 0 else np.asarray(out, dtype=float)


def cutting_residual(r, cut: CutParams, C: float):
    """RHS - LHS of the cutting estimate with constant C = C_{gamma, eps, M}."""
    if not (2 <= cut.q <= 3):
        raise ValueError("q must lie in [2, 3]")
    r = np.asarray(r, dtype=float)
    if np.any(r < -1):
        raise ValueError("r must be >= -1")
    q, th, g, M = cut.q, cut.theta, cut.gamma, cut.M
    r1 = np.minimum(r, g)
    r2 = np.clip(r - g, 0.0, max(M - g, 0.0))
    r3 = np.maximum(r - M, 0.0)
    r1, r2, r3 = (np.asarray(a, dtype=np.longdouble) for a in (r1, r2, r3))
    h = 0.5 * q * (q - 1)
    rhs = ((h + 2 * g * th) * r1 ** 2 + (h + C * th) * r2 ** 2 + 2 * r1 * r2
           + 2 * (r1 + r2) * r3 + (1 + cut.eps * th) * r3 ** q)
    out = rhs - _pow_minus_linear(r, q)
    return float(out) if out.ndim == 0 else np.asarray(out, dtype=float)


# ---------------------------------------------------------------------------
# expansion of ||u + r||_q^2
# ---------------------------------------------------------------------------

def orthogonalize(u, r, w, q: float) -> np.ndarray:
    """Remove from r its component along u^{q-1} so that int u^{q-1} r = 0."""
    u, r, w = (np.asarray(a, dtype=float) for a in (u, r, w))
    k = u ** (q - 1)
    den = float(np.sum(w * k * k))
    if den == 0:
        return r.copy()
    return r - float(np.sum(w * k * r)) / den * k


def expand_check(u, r, w, q: float, tol: float = 1e-10) -> float:
    """RHS - LHS of the second-order upper expansion of ||u + r||_q^2.

    Branches: 2 <= q <= 3, 3 < q <= 4 and q = 6.
    """
    u, r, w = (np.asarray(a, dtype=float) for a in (u, r, w))
    if np.any(u < 0) or np.any(u + r < -1e-14) or np.any(w < 0):
        raise ValueError("need u >= 0, u + r >= 0 and nonnegative weights")
    I = lambda f: float(np.sum(w * f))
    nu = I(u ** q) ** (1.0 / q)
    if nu == 0:
        raise ValueError("u must be nonzero")
    scale = I(u ** (q - 1) * np.abs(r)) + 1e-300
    if abs(I(u ** (q - 1) * r)) > tol * max(scale, nu ** q):
        raise ValueError("orthogonality condition violated")
    lhs = I(np.maximum(u + r, 0.0) ** q) ** (2.0 / q)
    pre = nu ** (2.0 - q)
    if 2 <= q <= 3:
        extra = (q - 1) * I(u ** (q - 2) * r ** 2) + 2.0 / q * I(np.maximum(r, 0) ** q)
    elif 3 < q <= 4:
        extra = ((q - 1) * I(u ** (q - 2) * r ** 2) + (q - 1) * (q - 2) / 3.0 * I(u ** (q - 3) * r ** 3)
                 + 2.0 / q * I(np.abs(r) ** q))
    elif q == 6:
        extra = (5 * I(u ** 4 * r ** 2) + 20.0 / 3.0 * I(u ** 3 * r ** 3) + 5 * I(u ** 2 * r ** 4)
                 + 2 * I(u * r ** 5) + I(r ** 6) / 3.0)
    else:
        raise ValueError("q must lie in [2, 4] or equal 6")
    return nu ** 2 + pre * extra - lhs


def m_nu(nu, d: int):
    """Coefficient of the warm-up local bound as a function of nu = ||r||_q."""
    if d < 3:
        raise ValueError("d must be >= 3")
    nu = np.asarray(nu, dtype=float)
    if np.any(nu < 0):
        raise ValueError("nu must be >= 0")
    q = 2.0 * d / (d - 2.0)
    if d >= 6:
        out = 4.0 / (d + 4) - (2.0 / q) * nu ** (q - 2)
    elif d in (4, 5):
        out = 4.0 / (d + 4) - (q - 1) * (q - 2) / 3.0 * nu - (2.0 / q) * nu ** (q - 2)
    else:
        out = 4.0 / 7.0 - 20.0 / 3.0 * nu - 5 * nu ** 2 - 2 * nu ** 3 - nu ** 4 / 3.0
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# sphere-side terms
# ---------------------------------------------------------------------------

def sanitize_perturbation(r: ZonalFunction) -> ZonalFunction:
    """Project out degrees <= 1; the result must still satisfy r >= -1."""
    r = remove_low_modes(r)
    if np.min(r.values) < -1:
        raise ValueError("r >= -1 fails after removing degrees <= 1")
    return r


def _integrals(r: ZonalFunction, gamma: float, M: float) -> dict:
    w = r.grid.weights
    vals = r.values
    g2 = r.grad_sq()
    b1, b2, b3 = vals < gamma, (vals > gamma) & (vals < M), vals > M
    r1, r2, r3 = split_pieces(vals, gamma, M)
    I = lambda f: float(np.sum(w * f))
    return {
        "grad1": I(g2 * b1), "grad2": I(g2 * b2), "grad3": I(g2 * b3),
        "r1sq": I(r1 ** 2), "r2sq": I(r2 ** 2), "r3sq": I(r3 ** 2),
        "r3q": I(r3 ** (2.0 * r.d / (r.d - 2.0))),
        "r1r2": I(r1 * r2), "r12r3": I((r1 + r2) * r3),
        "grad": I(g2), "rsq": I(vals ** 2), "mean": I(vals),
    }


def _lhs(r: ZonalFunction, grad: float) -> float:
    d = r.d
    q = 2.0 * d / (d - 2.0)
    A = conformal_A(d)
    w = r.grid.weights
    pq = float(np.sum(w * np.expm1(q * np.log1p(np.maximum(r.values, -1 + 1e-300)))))
    sq = float(np.sum(w * r.values * (2.0 + r.values)))
    # int (|grad r|^2 + A (1+r)^2) - A (int (1+r)^q)^{2/q}, written to avoid cancellation
    return grad + A * (sq - math.expm1(2.0 / q * math.log1p(pq)))


@dataclass
class ITermsReport:
    I1: Any
    I2: Any
    I3: Any
    eps0: float
    eps1: float
    eps2: float
    sigma0: float
    C: float
    gamma: float
    M: float
    lhs: Any
    theta_rhs: Any
    master_residual: Any
    components: dict
    hypotheses: dict
    scale: Any = 1.0
    notes: list = field(default_factory=list)

    def to_json(self) -> str:
        conv = lambda v: mp.nstr(v, 17) if isinstance(v, mp.mpf) else v
        return json.dumps({k: (conv(v) if not isinstance(v, dict) else {a: conv(b) for a, b in v.items()})
                           for k, v in asdict(self).items()})


def _terms(c: dict, d: int, eps0: float, ledger) -> tuple[float, float, float]:
    q = 2.0 * d / (d - 2.0)
    th = q - 2.0
    s0, C = ledger.sigma0, ledger.C_eps
    A = conformal_A(d)
    I1 = (1 - th * eps0) * c["grad1"] - d * (1 + eps0 + ledger.eps1) * c["r1sq"] + d * s0 * (c["r2sq"] + c["r3sq"])
    I2 = (1 - th * eps0) * c["grad2"] - d * (1 + eps0 + s0 + C) * c["r2sq"]
    I3 = ((1 - th * eps0) * (c["grad3"] + A * c["r3sq"]) - 2.0 / q * A * (1 + ledger.eps2 * th) * c["r3q"]
          - A * s0 * th * c["r3sq"])
    return I1, I2, I3


def i_terms(r: ZonalFunction, eps0: float, ledger, sanitize: bool = True) -> ITermsReport:
    """The three band terms for r at its given scale, plus the summary lower bound.

    The summary inequality needs only r >= -1 and mean zero. Nonnegativity of
    each term is only claimed under the smallness hypothesis, reported in
    ``hypotheses``.
    """
    d = r.d
    if d != ledger.d:
        raise ValueError("ledger dimension mismatch")
    if sanitize:
        r = sanitize_perturbation(r)
    q = 2.0 * d / (d - 2.0)
    th = q - 2.0
    A = conformal_A(d)
    c = _integrals(r, ledger.gamma, ledger.M)
    I1, I2, I3 = _terms(c, d, eps0, ledger)
    lhs = _lhs(r, c["grad"])
    trhs = th * eps0 * (c["grad"] + A * c["rsq"])
    nq = float(np.sum(r.grid.weights * np.abs(r.values) ** q)) ** (2.0 / q)
    coeff = r.coefficients()
    hyp = {
        "r_ge_minus1": bool(np.min(r.values) >= -1),
        "orthogonal": bool(abs(coeff[0]) < 1e-12 and abs(coeff[1]) < 1e-12),
        "small": bool(mp.mpf(nq) <= ledger.dtilde),
        "norm_q_sq": nq,
    }
    return ITermsReport(I1, I2, I3, eps0, ledger.eps1, ledger.eps2, ledger.sigma0, ledger.C_eps,
                        ledger.gamma, ledger.M, lhs, trhs, lhs - trhs - (I1 + I2 + I3), c, hyp)


def i_terms_admissible(r: ZonalFunction, eps0: float, ledger, fraction: float = 0.5) -> ITermsReport:
    """I-terms for r rescaled to ||r||_q^2 = fraction * dtilde.

    The admissible scale is far below double precision. At that scale max r < gamma,
    so r2 = r3 = 0 and every term is a quadratic form in r; values are computed
    for the unit-scale r and multiplied by t^2 in multiprecision.
    """
    r = remove_low_modes(r)
    d = r.d
    q = 2.0 * d / (d - 2.0)
    nq = float(np.sum(r.grid.weights * np.abs(r.values) ** q)) ** (1.0 / q)
    if nq == 0:
        raise ValueError("r vanishes after sanitizing")
    unit = r.with_values(r.values / nq)
    t = mp.sqrt(mp.mpf(fraction) * ledger.dtilde)
    if t * mp.mpf(float(np.max(np.abs(unit.values)))) >= ledger.gamma:
        raise ArithmeticError("admissible scale does not lie below the lower cut")
    A = conformal_A(d)
    th = q - 2.0
    w = unit.grid.weights
    grad = float(np.sum(w * unit.grad_sq()))
    L2 = float(np.sum(w * unit.values ** 2))
    I1u = (1 - th * eps0) * grad - d * (1 + eps0 + ledger.eps1) * L2
    # leading quadratic part of the left side: grad - d * L2
    lhs_u = grad - d * L2
    trhs_u = th * eps0 * (grad + A * L2)
    t2 = t ** 2
    comps = {"grad": grad, "rsq": L2, "unit_I1": I1u, "unit_master": lhs_u - trhs_u - I1u}
    hyp = {"r_ge_minus1": True, "orthogonal": True, "small": True, "norm_q_sq": t2}
    return ITermsReport(t2 * I1u, mp.mpf(0), mp.mpf(0), eps0, ledger.eps1, ledger.eps2, ledger.sigma0,
                        ledger.C_eps, ledger.gamma, ledger.M, t2 * lhs_u, t2 * trhs_u,
                        t2 * (lhs_u - trhs_u - I1u), comps, hyp, scale=t,
                        notes=["quadratic scaling below the lower cut"])


@dataclass
class LocalCheck:
    lhs: float
    rhs: float
    margin: float
    coefficient: float
    route: str
    norm_q_sq: float
    quadratic_margin: float
    firstbound_rhs: float | None = None

    def as_tuple(self) -> tuple[float, float, float]:
        return self.lhs, self.rhs, self.margin


def local_deficit_check(r: ZonalFunction, eps0: float = 1.0 / 6.0, ledger=None,
                        target: float | None = None) -> LocalCheck:
    """Local deficit bound for the perturbation r of the constant function.

    r is sanitized (degrees <= 1 removed) and rescaled to ||r||_q^2 = target,
    by default min(dtilde, 1e-6). For d >= 6 the coefficient is theta * eps0;
    for d = 3, 4, 5 it is m(||r||_q). ``quadratic_margin`` is the same margin in
    the limit of vanishing amplitude, per unit of ||r||_2^2.
    """
    r = remove_low_modes(r)
    d = r.d
    q = 2.0 * d / (d - 2.0)
    th = q - 2.0
    A = conformal_A(d)
    w = r.grid.weights
    nq = float(np.sum(w * np.abs(r.values) ** q)) ** (1.0 / q)
    if nq == 0:
        return LocalCheck(0.0, 0.0, 0.0, 0.0, "trivial", 0.0, 0.0, 0.0)
    if target is None:
        dt = float(ledger.dtilde) if ledger is not None else 1e-6
        # when dtilde underflows, 1e-6 is used and the quadratic margin covers smaller scales
        target = min(dt, 1e-6) if dt > 0 else 1e-6
    r = r.with_values(r.values * math.sqrt(target) / nq)
    if np.min(r.values) < -1:
        raise ValueError("rescaled perturbation violates r >= -1")
    nq2 = float(np.sum(w * np.abs(r.values) ** q)) ** (2.0 / q)
    grad = float(np.sum(w * r.grad_sq()))
    L2 = float(np.sum(w * r.values ** 2))
    lhs = _lhs(r, grad)
    fb = m_nu(math.sqrt(nq2), d) * (grad + A * L2)
    if d >= 6:
        coeff, route = th * eps0, "cutting"
    else:
        coeff, route = m_nu(math.sqrt(nq2), d), "firstbound"
    rhs = coeff * (grad + A * L2)
    quad_margin = ((grad - d * L2) - coeff * (grad + A * L2)) / L2
    return LocalCheck(lhs, rhs, lhs - rhs, coeff, route, nq2, quad_margin,
                      fb if d in (3, 4, 5) else None)
