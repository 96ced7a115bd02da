"""Competing symmetries, the alternative classifier, tau_0 localization and global certification."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import mpmath as mp
import numpy as np
from scipy.optimize import brentq

from . import constants as C
from .manifold import (
    OnManifold, conformal_rotate, manifold_distance, rotate_sphere, sobolev_constant,
    sobolev_deficit, stereographic_lift, stereographic_pullback, sup_inner_product,
)
from .pieces import local_deficit_check
from .quad import (
    CylFunction, MeridianFunction, RadialFunction, ZonalFunction, log_sphere_area,
    radial_nodes, series_eval, sphere_area, zonal_grid,
)
from .rearrange import _ball_volume, decreasing_rearrangement, phi_n

__all__ = [
    "FlowTrace", "competing_symmetries_step", "competing_symmetries_run", "Alternative",
    "classify_alternative", "CylinderFlow", "Tau0Result", "locate_tau0", "CertificationReport",
    "certify_global", "boost_to_constant", "hf_distance",
]


def _q(d):
    return 2.0 * d / (d - 2.0)


# ---------------------------------------------------------------------------
# traces
# ---------------------------------------------------------------------------

@dataclass
class FlowTrace:
    """Per-sample functionals along a flow; ``index`` is n for iterations or tau for continuous flows."""

    index: list = field(default_factory=list)
    norm_q: list = field(default_factory=list)
    grad_norm: list = field(default_factory=list)
    dist2: list = field(default_factory=list)
    deficit: list = field(default_factory=list)
    ratio: list = field(default_factory=list)
    sup: list = field(default_factory=list)
    hf_gap: list = field(default_factory=list)
    converged: bool = False

    COLUMNS = ("index", "norm_q", "grad_norm", "dist2", "deficit", "ratio", "sup", "hf_gap")

    def append(self, **row):
        for k in self.COLUMNS:
            getattr(self, k).append(row.get(k, math.nan))

    def __len__(self):
        return len(self.index)

    def energy(self) -> np.ndarray:
        return np.asarray(self.grad_norm) ** 2

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(self.COLUMNS)
        for i in range(len(self)):
            w.writerow([getattr(self, k)[i] for k in self.COLUMNS])
        return buf.getvalue()

    def to_dict(self) -> dict:
        out = {k: list(map(float, getattr(self, k))) for k in self.COLUMNS}
        out["converged"] = self.converged
        return out


def _record(trace: FlowTrace, index, F, hf_const=None, with_sup=True):
    rep = sobolev_deficit(F)
    dist = manifold_distance(F) if with_sup else None
    d2 = dist.dist2 if dist else math.nan
    ratio = rep.deficit / d2 if dist and d2 > 0 else math.nan
    trace.append(index=index, norm_q=rep.norm_q, grad_norm=math.sqrt(rep.energy), dist2=d2,
                 deficit=rep.deficit, ratio=ratio, sup=dist.sup_value if dist else math.nan,
                 hf_gap=hf_distance(F, rep.norm_q if hf_const is None else hf_const))


def hf_distance(F, norm: float) -> float:
    """||f - h_f||_{2*} with h_f = ||f||_{2*} g_*, computed on the sphere."""
    d = F.d
    q = _q(d)
    if isinstance(F, (ZonalFunction, MeridianFunction)):
        c = norm * math.exp(-log_sphere_area(d) / q)
        return float(sphere_area(d) * np.sum(F.grid.weights * np.abs(F.values - c) ** q)) ** (1 / q)
    return hf_distance(stereographic_lift(F), norm)


# ---------------------------------------------------------------------------
# competing symmetries
# ---------------------------------------------------------------------------

def _radial_to_cyl(f: RadialFunction, like: CylFunction) -> CylFunction:
    S, T = np.meshgrid(like.s, like.t, indexing="ij")
    R = np.hypot(S, T)
    sig = np.arctan(f.nodes)
    vals = np.interp(np.arctan(R), sig, f.values)
    far = R > f.nodes[-1]
    vals[far] = f.values[-1] * (f.nodes[-1] / R[far]) ** (f.d - 2)
    return like.with_values(vals, signed=False)


def competing_symmetries_step(f):
    """R(U f). Zonal functions stay in the zonal class exactly; CylFunction uses the grid path."""
    if isinstance(f, ZonalFunction):
        if f.signed:
            raise ValueError("competing symmetries needs a nonnegative function")
        return decreasing_rearrangement(rotate_sphere(f))
    if isinstance(f, RadialFunction):
        return competing_symmetries_step(stereographic_lift(f))
    if isinstance(f, CylFunction):
        if f.signed:
            raise ValueError("competing symmetries needs a nonnegative function")
        g = conformal_rotate(f)
        g = g.with_values(np.maximum(g.values, 0.0), signed=False)
        return _radial_to_cyl(decreasing_rearrangement(g), f)
    raise TypeError(f"unsupported function type {type(f).__name__}")


def competing_symmetries_run(f, n_max: int = 40, tol: float = 0.01, with_sup: bool = True,
                             keep_iterates: bool = False):
    """Iterate f_n = (R U)^n f until ||f_n - h_f||_{2*} < tol or n_max steps.

    Returns the trace, plus the list of iterates when ``keep_iterates``.
    """
    F = stereographic_lift(f) if isinstance(f, RadialFunction) else f
    trace = FlowTrace()
    norm0 = sobolev_deficit(F).norm_q
    _record(trace, 0, F, norm0, with_sup)
    iterates = [F]
    for n in range(1, n_max + 1):
        if trace.hf_gap[-1] < tol:
            trace.converged = True
            break
        F = competing_symmetries_step(F)
        if keep_iterates:
            iterates.append(F)
        else:
            iterates = [iterates[0], F]
        _record(trace, n, F, norm0, with_sup)
    else:
        trace.converged = trace.hf_gap[-1] < tol
    return (trace, iterates) if keep_iterates else trace


# ---------------------------------------------------------------------------
# alternatives
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Alternative:
    branch: str
    n0: int


def classify_alternative(trace: FlowTrace, delta) -> Alternative:
    """(a) if dist^2 >= delta ||grad f_n||^2 along the whole trace; otherwise (b) with n0.

    n0 is the last index where the inequality holds and fails at the next one;
    n0 = -1 when it already fails at n = 0.
    """
    if len(trace) < 2:
        raise ValueError("trace too short: needs at least one step")
    E = trace.energy()
    holds = [trace.dist2[i] >= delta * E[i] for i in range(len(trace))]
    if all(holds):
        return Alternative("a", len(trace) - 1)
    if not holds[0]:
        return Alternative("b", -1)
    n0 = max(i for i in range(len(trace) - 1) if holds[i] and not holds[i + 1])
    return Alternative("b", n0)


# ---------------------------------------------------------------------------
# continuous interpolation between f_0 and its rearrangement on a cylinder grid
# ---------------------------------------------------------------------------

def _slide_bounds(bounds, t):
    """Float sliding flow on a list of (lo, hi) pairs."""
    if not bounds:
        return bounds
    c = [0.5 * (a + b) for a, b in bounds]
    h = [0.5 * (b - a) for a, b in bounds]
    while True:
        if len(c) < 2:
            tstar = math.inf
        else:
            tstar = min(math.log((c[k + 1] - c[k]) / (h[k] + h[k + 1])) for k in range(len(c) - 1))
            tstar = max(tstar, 0.0)
        if tstar >= t:
            s = 0.0 if math.isinf(t) else math.exp(-t)
            c = [x * s for x in c]
            break
        s = math.exp(-tstar)
        c = [x * s for x in c]
        t -= tstar
        nc, nh = [c[0]], [h[0]]
        for k in range(1, len(c)):
            if c[k] - nc[-1] <= (nh[-1] + h[k]) * (1 + 1e-12):
                lo, hi = nc[-1] - nh[-1], c[k] + h[k]
                nc[-1], nh[-1] = 0.5 * (lo + hi), nh[-1] + h[k]
            else:
                nc.append(c[k])
                nh.append(h[k])
        c, h = nc, nh
    return [(x - a, x + a) for x, a in zip(c, h)]


def _crossings(t, g, lam):
    """Intervals of {g > lam} for the piecewise-linear profile g(t)."""
    above = g > lam
    if not above.any():
        return []
    out = []
    n = g.size
    i = 0
    while i < n:
        if not above[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and above[j + 1]:
            j += 1
        lo = t[0] if i == 0 else t[i - 1] + (lam - g[i - 1]) / (g[i] - g[i - 1]) * (t[i] - t[i - 1])
        hi = t[-1] if j == n - 1 else t[j] + (lam - g[j]) / (g[j + 1] - g[j]) * (t[j + 1] - t[j])
        out.append((lo, hi))
        i = j + 1
    return out


def _signed_distance(bounds, t):
    """Distance to the boundary of the union, positive inside and negative outside."""
    if not bounds:
        return np.full(t.shape, -np.inf)
    lo = np.array([a for a, _ in bounds])[:, None]
    hi = np.array([b for _, b in bounds])[:, None]
    return np.max(np.minimum(t[None, :] - lo, hi - t[None, :]), axis=0)


def _reconstruct(sd, lams, top):
    """Nodal values from signed distances sd[m] to the level sets at heights lams[m].

    Between consecutive levels the boundary is taken to move linearly, which
    reproduces piecewise-linear profiles exactly.
    """
    inside = sd > 0
    M = lams.size
    idx = np.where(inside.any(axis=0), M - 1 - np.argmax(inside[::-1], axis=0), -1)
    out = np.zeros(sd.shape[1])
    cols = np.arange(sd.shape[1])
    has = idx >= 0
    m = idx[has]
    c = cols[has]
    nxt = np.minimum(m + 1, M - 1)
    upper = np.where(m + 1 < M, lams[nxt], top)
    d_in = sd[m, c]
    d_out = np.where(m + 1 < M, -sd[nxt, c], np.inf)
    frac = np.where(np.isfinite(d_out), d_in / (d_in + d_out), 0.0)
    out[has] = lams[m] + (upper - lams[m]) * frac
    return out


class CylinderFlow:
    """tau in [0, 1): Brock flow along x_d with time phi_0(tau); tau in [1, 2): slice half-lengths
    interpolated linearly towards the centered ball with weight 1 - exp(-phi_1(tau)); tau >= 2 is the
    symmetric decreasing rearrangement.

    Superlevel sets are tracked at ``levels`` equally spaced heights; every step preserves the
    discrete measure of each superlevel set, so the flow is equimeasurable at grid level. The
    second phase is not a Steiner flow; its gradient monotonicity is measured, not assumed.
    """

    def __init__(self, f: CylFunction, levels: int = 256):
        if f.signed:
            raise ValueError("the flow needs a nonnegative function")
        self.f = f
        self.d = f.d
        self.top = float(f.values.max())
        # quadratic spacing resolves the slowly decaying tail
        self.lams = self.top * ((np.arange(levels) + 0.5) / levels) ** 2
        t = f.t
        self.sets = [[_crossings(t, f.values[i], lam) for lam in self.lams] for i in range(f.s.size)]
        self.half = np.array([[0.5 * sum(b - a for a, b in row) for row in slice_]
                              for slice_ in self.sets])
        from .quad import _radial_weights
        self.ws = math.exp(log_sphere_area(self.d - 2)) * _radial_weights(f.s) * f.s ** (self.d - 2)
        self.mu = 2.0 * self.ws @ self.half
        self.ball = self._ball_halves()

    def _ball_halves(self) -> np.ndarray:
        s = self.f.s
        out = np.zeros_like(self.half)
        for m, mu in enumerate(self.mu):
            if mu <= 0:
                continue
            g = lambda R: 2.0 * self.ws @ np.sqrt(np.maximum(R * R - s * s, 0.0)) - mu
            hi = (mu / _ball_volume(self.d)) ** (1.0 / self.d) * 2 + s[1]
            while g(hi) < 0:
                hi *= 2
            R = brentq(g, 0.0, hi, xtol=1e-14, rtol=1e-14)
            out[:, m] = np.sqrt(np.maximum(R * R - s * s, 0.0))
        return out

    def _values(self, data, halves: bool) -> np.ndarray:
        t = self.f.t
        vals = np.zeros(self.f.values.shape)
        below = np.minimum(self.f.values, self.lams[0])
        for i in range(self.f.s.size):
            if halves:
                h = data[i][:, None]
                sd = np.where(h > 0, h - np.abs(t)[None, :], -np.inf)
            else:
                sd = np.stack([_signed_distance(b, t) for b in data[i]])
            v = _reconstruct(sd, self.lams, self.top)
            vals[i] = np.where(v > 0, v, 0.0 if halves else below[i])
        return vals

    def __call__(self, tau: float) -> CylFunction:
        if tau < 0:
            raise ValueError("tau must be nonnegative")
        if tau < 1:
            t = phi_n(tau, 0)
            moved = [[_slide_bounds(b, t) for b in slice_] for slice_ in self.sets]
            return self.f.with_values(self._values(moved, False), signed=False)
        sigma = 1.0 if tau >= 2 else -math.expm1(-phi_n(tau, 1))
        half = (1 - sigma) * self.half + sigma * self.ball
        return self.f.with_values(self._values(half, True), signed=False)


@dataclass
class Tau0Result:
    tau_lo: float
    tau_hi: float
    bracket_ok: bool
    dist2_lo: float
    energy_lo: float
    deficit_lo: float
    dist2_hi: float
    energy_hi: float
    energy0: float
    energy_monotone: bool
    chain_lhs: float
    chain_rhs: float
    snapshot: CylFunction | None = None
    trace: FlowTrace = field(default_factory=FlowTrace)
    message: str = ""

    @property
    def chain_ok(self) -> bool:
        return self.chain_lhs >= self.chain_rhs - 1e-9

    def to_dict(self) -> dict:
        out = {k: v for k, v in asdict(self).items() if k not in ("snapshot", "trace")}
        out["chain_ok"] = self.chain_ok
        out["trace"] = self.trace.to_dict()
        return out


def _sample(flow: CylinderFlow, tau: float):
    g = flow(tau)
    rep = sobolev_deficit(stereographic_lift(g))
    dist = manifold_distance(stereographic_lift(g))
    return g, rep, dist


def locate_tau0(f0, delta: float, levels: int = 256, scan: int = 16, tol: float = 1e-4,
                ns: int = 96, nt: int = 192) -> Tau0Result:
    """Bracket tau_0 = inf{tau : dist^2(f_tau) < delta ||grad f_tau||^2} by a scan then bisection."""
    if isinstance(f0, (ZonalFunction, MeridianFunction)):
        f0 = stereographic_pullback(f0, ns=ns, nt=nt)
    if isinstance(f0, RadialFunction):
        from .quad import cyl_nodes
        s, t = cyl_nodes(ns, nt)
        f0 = _radial_to_cyl(f0, CylFunction(f0.d, s, t, np.zeros((ns, nt))))
    flow = CylinderFlow(f0, levels)
    trace = FlowTrace()
    cache = {}

    def ev(tau):
        if tau not in cache:
            g, rep, dist = _sample(flow, tau)
            cache[tau] = (g, rep, dist)
            trace.append(index=tau, norm_q=rep.norm_q, grad_norm=math.sqrt(rep.energy),
                         dist2=dist.dist2, deficit=rep.deficit,
                         ratio=rep.deficit / dist.dist2 if dist.dist2 > 0 else math.nan,
                         sup=dist.sup_value)
        return cache[tau]

    def fails(tau):
        _, rep, dist = ev(tau)
        return dist.dist2 < delta * rep.energy

    taus = list(np.linspace(0.0, 2.0, scan + 1))
    _, rep0, _ = ev(0.0)
    E0 = rep0.energy
    msg = ""
    if fails(0.0):
        lo = hi = 0.0
        ok = True
        msg = "inequality already fails at tau = 0"
    else:
        lo, hi = None, None
        for a, b in zip(taus, taus[1:]):
            if fails(b):
                lo, hi = a, b
                break
        if lo is None:
            ok = False
            lo = hi = 2.0
            msg = "no crossing on the sampled flow"
        else:
            while hi - lo > tol:
                mid = 0.5 * (lo + hi)
                if fails(mid):
                    hi = mid
                else:
                    lo = mid
            ok = True
    g_lo, rep_lo, dist_lo = ev(lo)
    _, rep_hi, dist_hi = ev(hi)
    order = np.argsort(trace.index)
    E = np.asarray(trace.grad_norm)[order] ** 2
    monotone = bool(np.all(np.diff(E) <= 1e-8 * E[0]))
    d0 = rep0.deficit / rep0.energy
    rhs = delta * rep_lo.deficit / dist_lo.dist2 if dist_lo.dist2 > 0 else math.inf
    return Tau0Result(lo, hi, ok, dist_lo.dist2, rep_lo.energy, rep_lo.deficit, dist_hi.dist2,
                      rep_hi.energy, E0, monotone, d0, rhs, g_lo, trace, msg)


# ---------------------------------------------------------------------------
# certification
# ---------------------------------------------------------------------------

def boost_to_constant(F: ZonalFunction, x: float) -> ZonalFunction:
    """Conformal boost along the function's axis sending the bubble with parameter x to 1."""
    d = F.d
    k = 0.5 * (d - 2)
    s = F.grid.nodes
    th = math.tanh(x)
    sp = (s + th) / (1 + th * s)
    vals = (math.cosh(x) * (1 + th * s)) ** (-k) * series_eval(F.coefficients(), d, sp)[0]
    return F.with_values(vals, signed=True)


@dataclass
class CertificationReport:
    descriptor: str
    d: int
    delta: str
    branch: str
    measured_ratio: float
    certified_bound: str
    sound: bool
    n0: int | None = None
    tau0: tuple | None = None
    local: dict | None = None
    trace: FlowTrace | None = None
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        out = {k: v for k, v in asdict(self).items() if k != "trace"}
        out["trace"] = self.trace.to_dict() if self.trace is not None else None
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), default=str, indent=2)


def _pos_bound(d: int, eps0: float, ledger):
    """(delta, lower bound on C^pos) from the ledger (d >= 6) or the low-dimensional route."""
    if d >= 6:
        delta = ledger.dtilde / (1 + ledger.dtilde)
        return delta, delta * ledger.theta * mp.mpf(eps0)
    val, delta = C.lowdim_lower_bound(d)
    return mp.mpf(delta), mp.mpf(val)


def certify_global(f, delta=None, eps0: float = 1.0 / 6.0, ledger=None, n_max: int = 40,
                   descriptor: str = "") -> CertificationReport:
    """Measured stability ratio of f next to the certified lower bound, following the chosen route."""
    F = stereographic_lift(f) if isinstance(f, RadialFunction) else f
    if not isinstance(F, ZonalFunction):
        raise TypeError("certification runs on zonal (or radial) inputs")
    d = F.d
    if d >= 6 and ledger is None:
        ledger = C.build_ledger(d, eps0)
    d_default, bound = _pos_bound(d, eps0, ledger)
    delta = d_default if delta is None else delta
    notes = []
    signed = F.signed and bool(np.any(F.values < 0))
    if signed:
        bound = mp.mpf(C.be_from_pos(float(bound), d)) if float(bound) > 0 else bound
        notes.append("signed input: bound reduced to min(C_pos/2, 1 - 2^(-2/d))")
    rep = sobolev_deficit(F)
    dist = manifold_distance(F)
    if dist.dist2 < 1e-10 * rep.energy:
        return CertificationReport(descriptor, d, mp.nstr(delta, 8), "on-manifold", 0.0,
                                   mp.nstr(bound, 8), True, notes=notes)
    measured = rep.deficit / dist.dist2
    sound = bool(mp.mpf(measured) >= bound - mp.mpf("1e-6"))
    if dist.dist2 <= delta * rep.energy:
        x = dist.u[1] if F.axis == "v" else dist.u[0]
        if abs(dist.u[0 if F.axis == "v" else 1]) > 1e-6:
            notes.append("nearest optimizer off the symmetry axis; boost uses the axial component")
        Ft = boost_to_constant(F, x)
        c = dist.sup_value * math.exp(-log_sphere_area(d) / _q(d))
        r = Ft.with_values(Ft.values / c - 1.0, signed=True)
        chk = local_deficit_check(r, eps0, ledger)
        local = {"lhs": chk.lhs, "rhs": chk.rhs, "margin": chk.margin, "route": chk.route,
                 "coefficient": chk.coefficient}
        return CertificationReport(descriptor, d, mp.nstr(delta, 8), "local", measured,
                                   mp.nstr(bound, 8), sound and chk.margin >= 0, local=local,
                                   notes=notes)
    if signed:
        notes.append("flow route skipped for a signed input")
        return CertificationReport(descriptor, d, mp.nstr(delta, 8), "signed", measured,
                                   mp.nstr(bound, 8), sound, notes=notes)
    trace, its = competing_symmetries_run(F, n_max=n_max, tol=1e-3, keep_iterates=True)
    alt = classify_alternative(trace, delta) if len(trace) > 1 else Alternative("a", 0)
    tau0 = None
    if alt.branch == "b" and alt.n0 >= 0:
        res = locate_tau0(rotate_sphere(its[alt.n0]), float(delta))
        tau0 = (res.tau_lo, res.tau_hi)
        if not res.bracket_ok:
            notes.append(res.message)
        if not res.chain_ok:
            notes.append("inequality chain failed at the tau_0 snapshot")
    return CertificationReport(descriptor, d, mp.nstr(delta, 8), alt.branch, measured,
                               mp.nstr(bound, 8), sound, n0=alt.n0, tau0=tau0, trace=trace,
                               notes=notes)
