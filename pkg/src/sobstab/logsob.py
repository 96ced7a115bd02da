"""Gaussian log-Sobolev deficits, sign splitting, and the large-dimension bridge.

Gaussian integrals are taken against the probability measure
d gamma = exp(-pi |x|^2) dx on R^N.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial.hermite import hermgauss
from numpy.polynomial.legendre import leggauss
from scipy import integrate, optimize
from scipy.special import gammaln

from .manifold import sobolev_constant, sobolev_deficit, _as_sphere
from .quad import (
    GaussGrid,
    ZonalFunction,
    gauss_grid,
    log_sphere_area,
    sphere_area,
    series_eval,
)

_DEFAULT_NODES = {1: 96, 2: 48, 3: 32}


def _fd_gradient(func: Callable, X: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order central differences, one axis at a time."""
    G = np.empty_like(X)
    for j in range(X.shape[1]):
        e = np.zeros(X.shape[1])
        e[j] = h
        G[:, j] = (-func(X + 2 * e) + 8 * func(X + e) - 8 * func(X - e) + func(X - 2 * e)) / (12 * h)
    return G


@dataclass
class GaussFunction:
    """A function on R^N, sampled on demand for Gaussian quadrature.

    ``func`` maps an (M, N) array to M values. Without ``grad`` the gradient
    comes from fourth-order differences. When ``support`` is a radius R the
    function is assumed to vanish outside [-R, R]^N and a Gauss-Legendre
    rule on that box replaces Gauss-Hermite.
    """

    N: int
    func: Callable
    grad: Callable | None = None
    signed: bool = False
    support: float | None = None
    nodes: int | None = None
    name: str = ""

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")

    def __call__(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.asarray(self.func(X), dtype=float).reshape(X.shape[0])

    def gradient(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.grad is not None:
            return np.asarray(self.grad(X), dtype=float).reshape(X.shape)
        scale = self.support if self.support else 1.0
        return _fd_gradient(self, X, 1e-3 * scale)

    def n_nodes(self) -> int:
        if self.nodes:
            return self.nodes
        return _DEFAULT_NODES.get(self.N, 24)

    def rule(self) -> tuple[np.ndarray, np.ndarray]:
        """Points and weights (weights include the Gaussian density)."""
        n = self.n_nodes()
        if self.support is None:
            g = gauss_grid(self.N, n)
            return g.points(), g.tensor_weights()
        R = float(self.support)
        t, w = leggauss(4 * n)
        x = R * t
        w1 = R * w * np.exp(-math.pi * x * x)
        mesh = np.meshgrid(*([x] * self.N), indexing="ij")
        X = np.stack([m.ravel() for m in mesh], axis=-1)
        W = w1
        for _ in range(self.N - 1):
            W = np.multiply.outer(W, w1)
        return X, np.asarray(W).ravel()

    def grid(self) -> GaussGrid | None:
        return None if self.support is not None else gauss_grid(self.N, self.n_nodes())

    def line_rule(self, reach: float = 6.0, n_sample: int = 2048, order: int = 24,
                  panel: float = 0.75) -> tuple[np.ndarray, np.ndarray]:
        """Rule that splits every x_1-line at the zeros of u.

        The remaining coordinates use the tensor Gauss-Hermite rule. Each
        sign-definite segment gets composite Gauss-Legendre panels, so
        integrands with a kink on the zero set keep full accuracy.
        """
        N = self.N
        t, w = leggauss(order)
        if N > 1:
            g = gauss_grid(N - 1, self.n_nodes())
            rest, rest_w = g.points(), g.tensor_weights()
        else:
            rest, rest_w = np.zeros((1, 0)), np.ones(1)
        pts, wts = [], []
        for xr, wr in zip(rest, rest_w):
            def line(x1, xr=xr):
                x1 = np.atleast_1d(x1)
                return self(np.column_stack([x1, np.broadcast_to(xr, (x1.size, N - 1))]))

            roots = _sign_roots(line, -reach, reach, n_sample)
            for lo, hi in _pieces(-reach, reach, roots):
                k = max(1, int(math.ceil((hi - lo) / panel)))
                edges = np.linspace(lo, hi, k + 1)
                a, b = edges[:-1, None], edges[1:, None]
                x1 = (0.5 * (b - a) * t + 0.5 * (b + a)).ravel()
                w1 = (0.5 * (b - a) * w).ravel() * np.exp(-math.pi * x1 * x1)
                pts.append(np.column_stack([x1, np.broadcast_to(xr, (x1.size, N - 1))]))
                wts.append(wr * w1)
        return np.concatenate(pts), np.concatenate(wts)

    def deficit_rule(self) -> tuple[np.ndarray, np.ndarray]:
        """Rule used for deficits: zero-aware lines for signed functions."""
        if self.signed and self.support is None:
            return self.line_rule()
        return self.rule()

    def l2_sq(self) -> float:
        X, W = self.rule()
        return float(np.sum(W * self(X) ** 2))

    def scaled(self, c: float) -> "GaussFunction":
        f, g = self.func, self.grad
        return GaussFunction(self.N, lambda X: c * f(X), None if g is None else (lambda X: c * g(X)),
                             self.signed, self.support, self.nodes, self.name)


def _xlogx2(v: np.ndarray) -> np.ndarray:
    """v^2 ln v^2 with the value 0 at v = 0."""
    v2 = v * v
    out = np.zeros_like(v2)
    pos = v2 > 0
    out[pos] = v2[pos] * np.log(v2[pos])
    return out


def logsob_deficit(u: GaussFunction) -> float:
    """int |grad u|^2 d gamma - pi int u^2 ln(u^2/||u||^2) d gamma."""
    X, W = u.deficit_rule()
    v = u(X)
    M = float(np.sum(W * v * v))
    if not M > 0:
        raise ValueError("zero function has no log-Sobolev deficit")
    G = u.gradient(X)
    grad = float(np.sum(W * np.sum(G * G, axis=1)))
    ent = float(np.sum(W * _xlogx2(v))) - M * math.log(M)
    return grad - math.pi * ent


# ---------------------------------------------------------------------------
# right side: distance to c exp(b.x)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RhsResult:
    value: float
    b: np.ndarray          # exponent b' in c exp(pi b'.x)
    c: float
    overlap: float
    l2_sq: float
    direct_value: float | None = None
    direct_b: np.ndarray | None = None
    direct_c: float | None = None

    @property
    def exponent(self) -> np.ndarray:
        """b in the form c exp(b.x)."""
        return math.pi * self.b

    @property
    def agreement(self) -> float | None:
        """Gap between the two routes, relative to ||u||^2."""
        if self.direct_value is None:
            return None
        return abs(self.value - self.direct_value) / self.l2_sq


def _overlap_and_grad(v, X, W, b):
    e = np.exp(math.pi * (X @ b) - 0.5 * math.pi * float(b @ b))
    k = W * v * e
    om = float(np.sum(k))
    g = math.pi * (X.T @ k - om * b)
    return om, g


def _polish(fg, x0, nm_iter: int = 2000):
    """BFGS from ``x0``; Nelder-Mead first only if BFGS stops for another reason than precision loss."""
    r = optimize.minimize(fg, x0, jac=True, method="BFGS", options={"gtol": 1e-13})
    if r.success or r.status == 2:
        return r
    r1 = optimize.minimize(lambda p: fg(p)[0], x0, method="Nelder-Mead",
                           options={"xatol": 1e-10, "fatol": 1e-16, "maxiter": nm_iter})
    r2 = optimize.minimize(fg, r1.x, jac=True, method="BFGS", options={"gtol": 1e-13})
    return r2 if r2.fun <= r1.fun else r1


def _direct_rhs(v, X, W, start_b, start_c=None):
    """Minimize int (u - c exp(pi b.x))^2 d gamma over (c, b) jointly from each start in ``start_b``."""
    M = float(np.sum(W * v * v))

    def J(p):
        c, b = p[0], p[1:]
        # line searches may probe huge |b|; report those as +inf
        with np.errstate(over="ignore", invalid="ignore"):
            e = np.exp(math.pi * (X @ b))
            r = v - c * e
            val = float(np.sum(W * r * r))
            grad = np.empty_like(p)
            grad[0] = -2.0 * float(np.sum(W * r * e))
            grad[1:] = -2.0 * c * math.pi * (X.T @ (W * r * e))
        if not (math.isfinite(val) and np.all(np.isfinite(grad))):
            return math.inf, np.zeros_like(p)
        return val / M, grad / M

    best = None
    for sb in start_b:
        e = np.exp(math.pi * (X @ sb))
        c0 = float(np.sum(W * v * e)) / float(np.sum(W * e * e)) if start_c is None else start_c
        p0 = np.concatenate([[c0], sb])
        cand = _polish(J, p0, 4000)
        if best is None or cand.fun < best.fun:
            best = cand
    return max(best.fun, 0.0) * M, best.x[1:].copy(), float(best.x[0])


def logsob_rhs_inf(u: GaussFunction, cross_check: bool = True) -> RhsResult:
    """inf over (c, b') of int (u - c exp(pi b'.x))^2 d gamma.

    The overlap with the shifted Gaussian is maximized over b' and c is
    then explicit. With ``cross_check`` the same infimum is found by
    minimizing over (c, b') directly from neutral starts.
    """
    X, W = u.rule()
    v = u(X)
    M = float(np.sum(W * v * v))
    if not M > 0:
        raise ValueError("zero function")
    b0 = (X.T @ (W * v * v)) / M

    def neg(b):
        om, g = _overlap_and_grad(v, X, W, b)
        return -om * om / M, -2.0 * om * g / M

    axes = np.eye(u.N) * 0.5
    cands = [b0, np.zeros(u.N), *axes, *(-axes)]
    best = None
    for start in cands:
        r = _polish(neg, start)
        if best is None or r.fun < best.fun:
            best = r
    if not np.all(np.isfinite(best.x)):
        raise RuntimeError("overlap search failed")
    b = best.x
    om, _ = _overlap_and_grad(v, X, W, b)
    c = om * math.exp(-0.5 * math.pi * float(b @ b))
    value = max(M - om * om, 0.0)
    if not cross_check:
        return RhsResult(value, b, c, om, M)
    # neutral starts: the origin and +-1/2 along each axis, c by projection
    dv, db, dc = _direct_rhs(v, X, W, [np.zeros(u.N), *axes, *(-axes)])
    return RhsResult(value, b, c, om, M, dv, db, dc)


@dataclass(frozen=True)
class LogSobCheck:
    deficit: float
    rhs: float
    beta: str
    margin: float
    ratio: float | None
    ok: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def logsob_stability_check(u: GaussFunction, beta_logsob, tol: float = 1e-8) -> LogSobCheck:
    """deficit - (beta pi / 2) * rhs, with beta possibly an mpmath number."""
    D = logsob_deficit(u)
    R = logsob_rhs_inf(u, cross_check=False).value
    coef = float(beta_logsob) * math.pi / 2
    margin = D - coef * R
    ratio = D / R if R > 1e-14 * u.l2_sq() else None
    return LogSobCheck(D, R, str(beta_logsob), margin, ratio, margin >= -tol)


# ---------------------------------------------------------------------------
# sign splitting
# ---------------------------------------------------------------------------

def h_sobolev(p, d: int):
    a = 1.0 - 2.0 / d
    p = np.asarray(p, dtype=float)
    return p ** a + (1 - p) ** a - 1.0


def h_entropy(p):
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0)
        t2 = np.where(p < 1, (1 - p) * np.log(np.where(p < 1, 1 - p, 1.0)), 0.0)
    return -(t1 + t2)


@dataclass(frozen=True)
class SplitReport:
    D: float
    D_plus: float
    D_minus: float
    m: float
    h: float
    coupling: float       # S_d h(m) or pi h(m)
    residual: float
    swapped: bool
    h_sweep_ok: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _sign_roots(g: Callable, a: float, b: float, n: int) -> list[float]:
    t = np.linspace(a, b, n + 1)
    y = g(t)
    roots = []
    for i in range(n):
        if y[i] == 0.0:
            roots.append(float(t[i]))
        elif y[i] * y[i + 1] < 0:
            roots.append(optimize.brentq(lambda x: float(g(np.array([x]))[0]), t[i], t[i + 1], xtol=1e-15))
    return roots


def _pieces(a: float, b: float, roots: list[float]) -> list[tuple[float, float]]:
    pts = [a] + [r for r in roots if a < r < b] + [b]
    return [(pts[i], pts[i + 1]) for i in range(len(pts) - 1) if pts[i + 1] > pts[i]]


def _h_sweep(h: Callable, lower: Callable, n: int = 2001) -> bool:
    p = np.linspace(0.0, 0.5, n)
    return bool(np.all(h(p) >= lower(p) - 1e-14))


def split_sign_sobolev(u, n_sample: int = 4096, order: int = 64) -> SplitReport:
    """Positive/negative parts of a zonal function and the concavity identity.

    Piece integrals are taken in the polar angle between consecutive zeros,
    where the integrand is smooth, so the identity residual reflects
    quadrature accuracy rather than the kink of u_+ and u_-.
    """
    F = _as_sphere(u)
    if not isinstance(F, ZonalFunction):
        raise TypeError("sign splitting is implemented for zonal sphere functions")
    d = F.d
    q = 2.0 * d / (d - 2.0)
    S = sobolev_constant(d)
    area = sphere_area(d)
    full = sobolev_deficit(F)
    scale = 1.0 / full.norm_q
    coef = F.coefficients() * scale

    def val(theta):
        return series_eval(coef, d, np.cos(theta))[0]

    roots = _sign_roots(val, 0.0, math.pi, n_sample)
    t, w = leggauss(order)
    cd = math.exp(gammaln((d + 1) / 2) - 0.5 * math.log(math.pi) - gammaln(d / 2))
    A = d * (d - 2) / 4.0
    parts = {1: [0.0, 0.0], -1: [0.0, 0.0]}   # energy, int |F|^q
    for lo, hi in _pieces(0.0, math.pi, roots):
        th = 0.5 * (hi - lo) * t + 0.5 * (hi + lo)
        wt = 0.5 * (hi - lo) * w * cd * np.sin(th) ** (d - 1)
        s = np.cos(th)
        v, dv = series_eval(coef, d, s, derivative=True)
        sign = 1 if float(np.sum(wt * v)) >= 0 else -1
        parts[sign][0] += area * float(np.sum(wt * ((1 - s * s) * dv * dv + A * v * v)))
        parts[sign][1] += area * float(np.sum(wt * np.abs(v) ** q))
    swapped = parts[-1][1] > parts[1][1]
    pos, neg = (parts[-1], parts[1]) if swapped else (parts[1], parts[-1])
    m = neg[1] / (pos[1] + neg[1])
    D = full.deficit * scale ** 2
    Dp = pos[0] - S * pos[1] ** (2 / q)
    Dm = neg[0] - S * neg[1] ** (2 / q)
    hm = float(h_sobolev(m, d))
    coupling = S * hm
    a = 1.0 - 2.0 / d
    hd = 2.0 ** (2.0 / d) - 1.0
    xi = 2.0 * (1.0 - 2.0 ** (-a))
    ok = _h_sweep(lambda p: h_sobolev(p, d), lambda p: 2 * hd * p) and \
        _h_sweep(lambda p: (1 - p) ** a, lambda p: 1 - xi * p)
    return SplitReport(D, Dp, Dm, m, hm, coupling, abs(D - (Dp + Dm + coupling)), swapped, ok)


def split_sign_logsob(u: GaussFunction) -> SplitReport:
    """Log-Sobolev analog of the sign-splitting identity.

    The deficit of u comes from ``logsob_deficit``; the parts are summed
    over the nodes of the zero-aware line rule where u is positive or
    negative.
    """
    s = GaussFunction(u.N, u.func, u.grad, True, u.support, u.nodes, u.name)
    X, W = s.deficit_rule()
    M = float(np.sum(W * s(X) ** 2))
    if not M > 0:
        raise ValueError("zero function")
    # both sides are 2-homogeneous, so normalize after the fact
    D = logsob_deficit(s) / M
    val = s(X) / math.sqrt(M)
    G = s.gradient(X) / math.sqrt(M)
    g2 = np.sum(G * G, axis=1)

    def part(mask):
        mass = float(np.sum(W[mask] * val[mask] ** 2))
        if mass <= 0:
            return 0.0, 0.0
        ent = float(np.sum(W[mask] * _xlogx2(val[mask]))) - mass * math.log(mass)
        return float(np.sum(W[mask] * g2[mask])) - math.pi * ent, mass

    (Dp, mp_), (Dm, mm_) = part(val > 0), part(val < 0)
    swapped = mm_ > mp_
    if swapped:
        Dp, Dm, mp_, mm_ = Dm, Dp, mm_, mp_
    m = mm_ / (mp_ + mm_)
    hm = float(h_entropy(m))
    coupling = math.pi * hm
    ok = _h_sweep(h_entropy, lambda p: 2 * math.log(2) * p)
    return SplitReport(D, Dp, Dm, m, hm, coupling, abs(D - (Dp + Dm + coupling)), swapped, ok)


# ---------------------------------------------------------------------------
# large-dimension bridge
# ---------------------------------------------------------------------------

def r_d(d: int) -> float:
    return math.sqrt(d / (2 * math.pi))


def log_z_d(d: int) -> tuple[float, float]:
    """ln Z_d by the gamma-ratio form and by the sphere-area form."""
    if d < 3:
        raise ValueError("d must be >= 3")
    a = 0.5 * d * math.log(d / 2) + gammaln(d / 2) - gammaln(d)
    b = 0.5 * d * math.log(d / (8 * math.pi)) + log_sphere_area(d)
    return float(a), float(b)


def z_d(d: int) -> float:
    return math.exp(log_z_d(d)[0])


def z_d_pow(d: int) -> float:
    """Z_d^{2/d}, which tends to e/4."""
    return math.exp(2.0 / d * log_z_d(d)[0])


def _log_fiber(k: int, m: float, r: float, y2) -> np.ndarray:
    """ln of int_{R^k} (1 + (|y|^2+|z|^2)/r^2)^{-m} dz."""
    Y = 1.0 + np.asarray(y2, dtype=float) / r ** 2
    return ((k / 2 - m) * np.log(Y) + k * math.log(r) + 0.5 * k * math.log(math.pi)
            + gammaln(m - k / 2) - gammaln(m))


def limit_check_dz(d: int, N: int, y) -> tuple[float, float]:
    """Fiber integral by radial quadrature against its closed form."""
    if not (3 <= d <= 12) or not (1 <= N < d):
        raise ValueError("need 3 <= d <= 12 and 1 <= N < d")
    k = d - N
    r2 = d / (2 * math.pi)
    y2 = float(np.sum(np.asarray(y, dtype=float) ** 2))
    shell = math.exp(log_sphere_area(k - 1)) if k > 1 else 2.0
    lhs = shell * integrate.quad(lambda p: (1 + (y2 + p * p) / r2) ** (-d) * p ** (k - 1),
                                 0, np.inf, epsabs=0, epsrel=1e-13, limit=400)[0]
    rhs = math.exp(gammaln((d + N) / 2) + 0.5 * k * math.log(d / 2) - gammaln(d)
                   - 0.5 * (N + d) * math.log1p(y2 / r2))
    return lhs, rhs


def limit_check_zeta(d: int, N: int, A: float, lam: float) -> tuple[float, float]:
    """Both sides of the dilation identity for the fiber integral, by quadrature."""
    k = d - N
    shell = math.exp(log_sphere_area(k - 1)) if k > 1 else 2.0

    def rad(g):
        return shell * integrate.quad(lambda p: g(p) * p ** (k - 1), 0, np.inf,
                                      epsabs=0, epsrel=1e-13, limit=400)[0]

    lhs = rad(lambda p: (A * A + p * p / lam ** 2) ** (-d))
    rhs = lam ** k / A ** (d + N) * rad(lambda p: (1 + p * p) ** (-d))
    return lhs, rhs


@dataclass
class LimitSweep:
    d: list
    value: list
    target: float
    gap: list = field(default_factory=list)
    label: str = ""
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.gap:
            self.gap = [abs(v - self.target) / max(abs(self.target), 1e-300) for v in self.value]
        if not all(math.isfinite(g) for g in self.gap):
            raise ValueError("non-finite gap in sweep")

    @property
    def decreasing(self) -> bool:
        return all(b <= a * (1 + 1e-12) for a, b in zip(self.gap, self.gap[1:]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf)
        wr.writerow(["d", "value", "target", "gap"])
        for row in zip(self.d, self.value, [self.target] * len(self.d), self.gap):
            wr.writerow([row[0], repr(float(row[1])), repr(float(row[2])), repr(float(row[3]))])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"label": self.label, "d": list(self.d), "value": [float(v) for v in self.value],
                "target": float(self.target), "gap": [float(g) for g in self.gap],
                "decreasing": self.decreasing, **self.extra}


def zd_sweep(ds) -> LimitSweep:
    ds = list(ds)
    return LimitSweep(ds, [z_d_pow(d) for d in ds], math.e / 4, label="Z_d^(2/d)")


@dataclass(frozen=True)
class AnsatzPoint:
    d: int
    deficit: float
    grad_direct: float
    grad_formula: float

    @property
    def identity_gap(self) -> float:
        return abs(self.grad_direct - self.grad_formula) / abs(self.grad_formula)


def ansatz_deficit(u: GaussFunction, d: int, order: int = 2000) -> AnsatzPoint:
    """Sobolev deficit of f = u(y) f_*(x) on R^d with the z-fiber integrated out.

    Requires N = 1, compact support [-R, R], and d >= 5 so that every fiber
    integral converges.
    """
    if u.N != 1 or u.support is None:
        raise ValueError("ansatz sweep needs a compactly supported function of one variable")
    if d < 5:
        raise ValueError("d must be >= 5")
    N, k = 1, d - 1
    R = float(u.support)
    t, w = leggauss(order)
    y = R * t
    w = R * w
    Y = y[:, None]
    uu = u(Y)
    du = u.gradient(Y)[:, 0]
    r = r_d(d)
    lz = log_z_d(d)[0]
    lc2 = (2.0 - d) / d * lz                     # ln C^2
    y2 = y * y
    phi = {m: np.exp(lc2 + _log_fiber(k, m, r, y2)) for m in (d - 2, d - 1)}
    dens = np.exp(-lz + _log_fiber(k, d, r, y2))   # y-marginal of f_*^{2*}
    phi_d = np.exp(lc2 + _log_fiber(k, d, r, y2))
    g1 = float(np.sum(w * du * du * phi[d - 2]))
    cross = float(np.sum(w * uu * du * (2.0 - d) * (2 * y / r ** 2) * phi[d - 1]))
    g3 = float(np.sum(w * uu * uu * (d - 2) ** 2 / r ** 2 * (phi[d - 1] - phi_d)))
    direct = g1 + cross + g3
    formula = g1 + d * (d - 2) / r ** 2 * math.exp(2 * lz / d) * float(np.sum(w * uu * uu * dens))
    q = 2.0 * d / (d - 2)
    S = sobolev_constant(d)
    norm2 = float(np.sum(w * np.abs(uu) ** q * dens)) ** (2 / q)
    return AnsatzPoint(d, direct - S * norm2, direct, formula)


def ansatz_deficit_sweep(u: GaussFunction, ds, order: int = 2000) -> LimitSweep:
    """Deficit of u f_* in growing d against e times the log-Sobolev deficit of u."""
    pts = [ansatz_deficit(u, d, order) for d in ds]
    target = math.e * logsob_deficit(u)
    sweep = LimitSweep([p.d for p in pts], [p.deficit for p in pts], target, label="ansatz deficit")
    sweep.extra["gradient_identity_gap"] = [p.identity_gap for p in pts]
    return sweep


def f_star(x, d: int) -> np.ndarray:
    """Optimizer of unit L^{2*} norm with scale r_d, evaluated at points of R^d (last axis)."""
    x = np.asarray(x, dtype=float)
    r = r_d(d)
    lz = log_z_d(d)[0]
    s2 = np.sum(x * x, axis=-1)
    return np.exp((2.0 - d) / (2 * d) * lz) * (1 + s2 / r ** 2) ** (1 - d / 2)


def bump_preset(R: float = 0.3, tilt: float = 0.2) -> GaussFunction:
    """(1 - (y/R)^2)_+^2 e^{tilt y}: nonnegative, C^1, supported in [-R, R]."""
    def f(X):
        y = X[:, 0]
        base = np.clip(1 - (y / R) ** 2, 0, None)
        return base ** 2 * np.exp(tilt * y)

    def g(X):
        y = X[:, 0]
        base = np.clip(1 - (y / R) ** 2, 0, None)
        val = base ** 2 * np.exp(tilt * y)
        d = (-4 * y / R ** 2 * base + tilt * base ** 2) * np.exp(tilt * y)
        return np.where(base > 0, d, 0.0 * val)[:, None]

    return GaussFunction(1, f, g, support=R, name="bump")


# ---------------------------------------------------------------------------
# Euclidean form
# ---------------------------------------------------------------------------

@dataclass
class EuclidFunction:
    """A function on R^N with a length scale used to place quadrature nodes."""

    N: int
    func: Callable
    grad: Callable | None = None
    scale: float = 1.0
    nodes: int | None = None

    def __call__(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.asarray(self.func(X), dtype=float).reshape(X.shape[0])

    def gradient(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.grad is not None:
            return np.asarray(self.grad(X), dtype=float).reshape(X.shape)
        return _fd_gradient(self, X, 1e-3 * self.scale)

    def rule(self):
        n = self.nodes or _DEFAULT_NODES.get(self.N, 24)
        t, w = hermgauss(n)
        x = self.scale * t
        w1 = self.scale * w * np.exp(t * t)
        mesh = np.meshgrid(*([x] * self.N), indexing="ij")
        X = np.stack([m.ravel() for m in mesh], axis=-1)
        W = w1
        for _ in range(self.N - 1):
            W = np.multiply.outer(W, w1)
        return X, np.asarray(W).ravel()

    def dilate(self, lam: float) -> "EuclidFunction":
        """x -> lam^{N/2} w(lam x)."""
        f, g, N = self.func, self.grad, self.N
        c = lam ** (N / 2)
        fn = lambda X: c * f(lam * X)
        gn = None if g is None else (lambda X: c * lam * g(lam * X))
        return EuclidFunction(N, fn, gn, self.scale / lam, self.nodes)


def euclidean_lhs(w: EuclidFunction) -> float:
    X, W = w.rule()
    v = w(X)
    M = float(np.sum(W * v * v))
    G = w.gradient(X)
    E = float(np.sum(W * np.sum(G * G, axis=1)))
    ent = float(np.sum(W * _xlogx2(v))) - M * math.log(M)
    N = w.N
    return M * math.log(2.0 / (N * math.pi * math.e) * E / M) - 2.0 / N * ent


def euclidean_rhs_inf(w: EuclidFunction) -> tuple[float, float, np.ndarray, float]:
    """inf over (lam, b, c) of ||w - c exp(-pi |y-b|^2/(2 lam^2))||^2, c in closed form."""
    X, W = w.rule()
    v = w(X)
    M = float(np.sum(W * v * v))
    N = w.N
    mean = (X.T @ (W * v * v)) / M
    var = float(np.sum(W * v * v * np.sum((X - mean) ** 2, axis=1))) / (M * N)
    lam0 = math.sqrt(2 * math.pi * var)

    def obj(p):
        lam = math.exp(p[0])
        b = p[1:]
        g = np.exp(-math.pi * np.sum((X - b) ** 2, axis=1) / (2 * lam * lam))
        ov = float(np.sum(W * v * g))
        return -(ov * ov) / (lam ** N * M)

    p0 = np.concatenate([[math.log(lam0)], mean])
    r = optimize.minimize(obj, p0, method="Nelder-Mead",
                          options={"xatol": 1e-11, "fatol": 1e-16, "maxiter": 4000})
    lam = math.exp(r.x[0])
    b = r.x[1:]
    g = np.exp(-math.pi * np.sum((X - b) ** 2, axis=1) / (2 * lam * lam))
    ov = float(np.sum(W * v * g))
    c = ov / lam ** N
    return max(M + r.fun * M, 0.0), lam, b, c


@dataclass(frozen=True)
class EuclidCheck:
    lhs: float
    rhs: float
    margin: float
    lam: float
    b: list
    c: float
    dilation_gap: float
    ok: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def euclidean_logsob_check(w: EuclidFunction, beta, tol: float = 1e-8,
                           dilation: float = 1.7) -> EuclidCheck:
    lhs = euclidean_lhs(w)
    rhs_val, lam, b, c = euclidean_rhs_inf(w)
    rhs = float(beta) / w.N * rhs_val
    gap = abs(euclidean_lhs(w.dilate(dilation)) - lhs)
    margin = lhs - rhs
    return EuclidCheck(float(lhs), float(rhs), float(margin), float(lam), [float(x) for x in b],
                       float(c), float(gap), bool(margin >= -tol))


def gaussian_euclid(N: int) -> EuclidFunction:
    def f(X):
        return np.exp(-0.5 * math.pi * np.sum(X * X, axis=1))

    def g(X):
        return -math.pi * X * f(X)[:, None]

    return EuclidFunction(N, f, g, 1.0)


# ---------------------------------------------------------------------------
# corpora
# ---------------------------------------------------------------------------

def exp_family(N: int, b, c: float = 1.0) -> GaussFunction:
    """c exp(b.x) with its exact gradient."""
    b = np.asarray(b, dtype=float)

    def f(X):
        return c * np.exp(X @ b)

    def g(X):
        return np.outer(f(X), b)

    return GaussFunction(N, f, g, name="exp")


def mixture(N: int, amps, exps, const: float = 0.0, signed: bool = False) -> GaussFunction:
    """const + sum_k a_k exp(b_k . x)."""
    amps = np.asarray(amps, dtype=float)
    exps = np.asarray(exps, dtype=float).reshape(len(amps), N)

    def f(X):
        return const + np.exp(X @ exps.T) @ amps

    def g(X):
        return (np.exp(X @ exps.T) * amps) @ exps

    return GaussFunction(N, f, g, signed=signed, name="mixture")


def random_corpus(count: int, seed: int = 0, signed: bool = False) -> list[GaussFunction]:
    """Mixtures with N cycling through 1, 2, 3.

    Positive corpora have positive amplitudes; signed ones add a negative
    constant so that the function changes sign near the origin.
    """
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        N = 1 + i % 3
        K = int(rng.integers(1, 4))
        amps = rng.uniform(0.2, 1.0, K)
        exps = rng.normal(0.0, 0.6, (K, N))
        const = float(rng.uniform(0.0, 0.5))
        if signed:
            const = -float(rng.uniform(0.5, 1.5)) * float(np.sum(amps))
        out.append(mixture(N, amps, exps, const, signed))
    return out
