"""Grids, quadrature rules, gradients and norms for the symmetric function classes.

Four discretizations are provided:

* ``RadialFunction``: radial profiles on R^d, sampled on a compactified radius grid.
* ``CylFunction``: functions of (|x'|, x_d) on R^d, sampled on a compactified 2D grid.
* ``ZonalFunction``: functions on S^d of a single coordinate (omega_{d+1} by default,
  or omega_d), sampled at Gauss nodes of the Gegenbauer weight.
* ``MeridianFunction``: functions on S^d of the pair (omega_d, omega_{d+1}), sampled on a
  polar grid of the unit disk.

Sphere-side integrals are taken against the uniform probability measure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.special import betaln, gammaln, roots_jacobi

__all__ = [
    "log_sphere_area", "sphere_area", "critical_exponent", "conformal_A",
    "RadialFunction", "CylFunction", "ZonalGrid", "ZonalFunction", "MeridianGrid",
    "MeridianFunction", "GaussGrid", "radial_nodes", "radial_from_callable",
    "cyl_nodes", "cyl_from_callable", "zonal_grid", "zonal_from_callable",
    "meridian_grid", "meridian_from_callable", "series_eval", "gauss_grid", "integrate_radial",
    "lp_norm", "dirichlet_energy", "gauss_integral",
]


def log_sphere_area(n: int) -> float:
    """log |S^n| with |S^n| = 2 pi^{(n+1)/2} / Gamma((n+1)/2)."""
    return math.log(2.0) + 0.5 * (n + 1) * math.log(math.pi) - float(gammaln(0.5 * (n + 1)))


def sphere_area(n: int) -> float:
    return math.exp(log_sphere_area(n))


def critical_exponent(d: int) -> float:
    _check_dim(d)
    return 2.0 * d / (d - 2.0)


def conformal_A(d: int) -> float:
    return 0.25 * d * (d - 2.0)


def _check_dim(d: int) -> None:
    if int(d) != d or d < 3:
        raise ValueError(f"dimension must be an integer >= 3, got {d!r}")


def _finite(name: str, arr: np.ndarray) -> None:
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")


# ---------------------------------------------------------------------------
# radial functions on R^d
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RadialFunction:
    d: int
    nodes: np.ndarray
    values: np.ndarray
    signed: bool = False

    def __post_init__(self):
        _check_dim(self.d)
        r = np.asarray(self.nodes, dtype=float)
        f = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "nodes", r)
        object.__setattr__(self, "values", f)
        if r.ndim != 1 or r.size == 0:
            raise ValueError("empty radial grid")
        if f.shape != r.shape:
            raise ValueError("values and nodes must have the same length")
        _finite("nodes", r)
        _finite("values", f)
        if r[0] != 0.0:
            raise ValueError("radial grid must start at r = 0")
        if np.any(np.diff(r) <= 0):
            raise ValueError("radial nodes must be strictly increasing")
        if not self.signed and np.any(f < 0):
            raise ValueError("negative values in a function flagged nonnegative")

    def with_values(self, values, signed=None) -> "RadialFunction":
        return RadialFunction(self.d, self.nodes, values, self.signed if signed is None else signed)


def radial_nodes(n: int = 2048) -> np.ndarray:
    """r = tan(pi sigma / 2) on uniform sigma = i/n, i = 0..n-1."""
    sigma = np.arange(n) / n
    return np.tan(0.5 * np.pi * sigma)


def radial_from_callable(func: Callable, d: int, n: int = 2048, signed: bool = False) -> RadialFunction:
    r = radial_nodes(n)
    return RadialFunction(d, r, np.asarray(func(r), dtype=float), signed)


def _radial_weights(r: np.ndarray) -> np.ndarray:
    w = np.zeros_like(r)
    h = np.diff(r)
    w[:-1] += 0.5 * h
    w[1:] += 0.5 * h
    return w


def integrate_radial(f: RadialFunction, p: float) -> float:
    """|S^{d-1}| * integral |f(r)|^p r^{d-1} dr, trapezoid rule plus a far-field closure.

    Beyond the last node the profile is continued by the decaying harmonic
    f_N (R/r)^{d-2}; its contribution is added whenever it is integrable.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    d = f.d
    r, v = f.nodes, np.abs(f.values)
    if r.size < 2:
        raise ValueError("radial grid needs at least two nodes")
    body = float(np.sum(_radial_weights(r) * v ** p * r ** (d - 1)))
    tail = 0.0
    R, fN = r[-1], v[-1]
    if fN > 0 and p * (d - 2) > d:
        tail = fN ** p * R ** d / (p * (d - 2) - d)
    return sphere_area(d - 1) * (body + tail)


def _radial_energy(f: RadialFunction) -> float:
    d = f.d
    r, v = f.nodes, f.values
    if r.size < 3:
        raise ValueError("degenerate grid: need at least three nodes")
    g = np.gradient(v, r, edge_order=2)
    body = float(np.sum(_radial_weights(r) * g ** 2 * r ** (d - 1)))
    tail = (d - 2) * v[-1] ** 2 * r[-1] ** (d - 2)
    return sphere_area(d - 1) * (body + tail)


# ---------------------------------------------------------------------------
# cylindrically symmetric functions on R^d
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CylFunction:
    """f(x) = F(s, t) with s = |x'| (first d-1 coordinates) and t = x_d."""

    d: int
    s: np.ndarray
    t: np.ndarray
    values: np.ndarray
    signed: bool = False

    def __post_init__(self):
        _check_dim(self.d)
        s = np.asarray(self.s, dtype=float)
        t = np.asarray(self.t, dtype=float)
        F = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "values", F)
        if s.size == 0 or t.size == 0:
            raise ValueError("empty cylindrical grid")
        if F.shape != (s.size, t.size):
            raise ValueError("values must have shape (len(s), len(t))")
        for name, a in (("s", s), ("t", t), ("values", F)):
            _finite(name, a)
        if s[0] != 0.0:
            raise ValueError("transverse grid must start at s = 0")
        if np.any(np.diff(s) <= 0) or np.any(np.diff(t) <= 0):
            raise ValueError("grids must be strictly increasing")
        if not self.signed and np.any(F < 0):
            raise ValueError("negative values in a function flagged nonnegative")

    def with_values(self, values, signed=None) -> "CylFunction":
        return CylFunction(self.d, self.s, self.t, values, self.signed if signed is None else signed)

    def cell_weights(self) -> np.ndarray:
        """Quadrature weights of |S^{d-2}| s^{d-2} ds dt (2D trapezoid)."""
        ws = _radial_weights(self.s) * self.s ** (self.d - 2)
        wt = _radial_weights(self.t)
        return sphere_area(self.d - 2) * np.outer(ws, wt)


def cyl_nodes(ns: int = 256, nt: int = 512) -> tuple[np.ndarray, np.ndarray]:
    s = np.tan(0.5 * np.pi * np.arange(ns) / ns)
    tau = -1.0 + (2.0 * np.arange(nt) + 1.0) / nt
    return s, np.tan(0.5 * np.pi * tau)


def cyl_from_callable(func: Callable, d: int, ns: int = 256, nt: int = 512,
                      signed: bool = False) -> CylFunction:
    s, t = cyl_nodes(ns, nt)
    S, T = np.meshgrid(s, t, indexing="ij")
    return CylFunction(d, s, t, np.asarray(func(S, T), dtype=float), signed)


def _cyl_energy(f: CylFunction) -> float:
    if f.s.size < 3 or f.t.size < 3:
        raise ValueError("degenerate grid: need at least three nodes per axis")
    gs = np.gradient(f.values, f.s, axis=0, edge_order=2)
    gt = np.gradient(f.values, f.t, axis=1, edge_order=2)
    return float(np.sum(f.cell_weights() * (gs ** 2 + gt ** 2)))


# ---------------------------------------------------------------------------
# zonal functions on S^d
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ZonalGrid:
    """Gauss rule for the marginal of omega_{d+1}, density proportional to (1-s^2)^{(d-2)/2}.

    ``basis[l, m]`` is the degree-l orthonormal polynomial at node m and
    ``dbasis`` its s-derivative.
    """

    d: int
    n: int
    nodes: np.ndarray
    weights: np.ndarray
    basis: np.ndarray
    dbasis: np.ndarray

    @property
    def theta(self) -> np.ndarray:
        return np.arccos(self.nodes)

    @property
    def degrees(self) -> np.ndarray:
        return np.arange(self.n)


def recurrence_coefficients(d: int, n: int) -> np.ndarray:
    """b[k] = beta_k of the monic three-term recurrence, k = 0..n (b[0] unused)."""
    lam = 0.5 * (d - 1)
    k = np.arange(n + 1, dtype=float)
    b = np.zeros(n + 1)
    kk = k[1:]
    b[1:] = kk * (kk + 2 * lam - 1) / (4.0 * (kk + lam) * (kk + lam - 1))
    return b


def orthonormal_basis(d: int, L: int, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Values and derivatives of the orthonormal zonal polynomials of degree < L at s."""
    s = np.asarray(s, dtype=float)
    sb = np.sqrt(recurrence_coefficients(d, L))
    P = np.zeros((L,) + s.shape)
    D = np.zeros((L,) + s.shape)
    P[0] = 1.0
    if L > 1:
        P[1] = s / sb[1]
        D[1] = 1.0 / sb[1]
    for k in range(1, L - 1):
        P[k + 1] = (s * P[k] - sb[k] * P[k - 1]) / sb[k + 1]
        D[k + 1] = (P[k] + s * D[k] - sb[k] * D[k - 1]) / sb[k + 1]
    return P, D


def series_eval(c: np.ndarray, d: int, s, derivative: bool = False):
    """Sum of c[l] p_l(s) (and its derivative) by running the recurrence without storing the basis."""
    s = np.asarray(s, dtype=float)
    L = len(c)
    sb = np.sqrt(recurrence_coefficients(d, max(L, 2)))
    p_prev = np.zeros_like(s)
    p_cur = np.ones_like(s)
    d_prev = np.zeros_like(s)
    d_cur = np.zeros_like(s)
    val = c[0] * p_cur
    der = np.zeros_like(s)
    for k in range(1, L):
        bk = sb[k - 1] if k > 1 else 0.0
        p_next = (s * p_cur - bk * p_prev) / sb[k]
        if derivative:
            d_next = (p_cur + s * d_cur - bk * d_prev) / sb[k]
            d_prev, d_cur = d_cur, d_next
            der = der + c[k] * d_cur
        p_prev, p_cur = p_cur, p_next
        val = val + c[k] * p_cur
    return val, (der if derivative else None)


@lru_cache(maxsize=64)
def zonal_grid(d: int, n: int = 512) -> ZonalGrid:
    _check_dim(d)
    if n < 3:
        raise ValueError("zonal grid needs at least three nodes")
    a = 0.5 * (d - 2)
    x, w = roots_jacobi(n, a, a)
    total = math.exp((2 * a + 1) * math.log(2.0) + betaln(a + 1, a + 1))
    w = w / total
    P, D = orthonormal_basis(d, n, x)
    for arr in (x, w, P, D):
        arr.setflags(write=False)
    return ZonalGrid(d, n, x, w, P, D)


@dataclass(frozen=True, eq=False)
class ZonalFunction:
    """F(omega) = G(omega_axis) with axis 'v' (omega_{d+1}) or 'p' (omega_d)."""

    grid: ZonalGrid
    values: np.ndarray
    signed: bool = False
    axis: str = "v"

    def __post_init__(self):
        F = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", F)
        if F.shape != (self.grid.n,):
            raise ValueError("values must match the zonal grid")
        _finite("values", F)
        if self.axis not in ("v", "p"):
            raise ValueError("axis must be 'v' or 'p'")
        if not self.signed and np.any(F < 0):
            raise ValueError("negative values in a function flagged nonnegative")

    @property
    def d(self) -> int:
        return self.grid.d

    @property
    def nodes(self) -> np.ndarray:
        return self.grid.nodes

    def with_values(self, values, signed=None, axis=None) -> "ZonalFunction":
        return ZonalFunction(self.grid, values, self.signed if signed is None else signed,
                             self.axis if axis is None else axis)

    def coefficients(self) -> np.ndarray:
        return self.grid.basis @ (self.grid.weights * self.values)

    def derivative(self) -> np.ndarray:
        return self.coefficients() @ self.grid.dbasis

    def grad_sq(self) -> np.ndarray:
        s = self.grid.nodes
        return (1.0 - s ** 2) * self.derivative() ** 2

    def __call__(self, s) -> np.ndarray:
        return series_eval(self.coefficients(), self.d, s)[0]

    def eval_with_derivative(self, s) -> tuple[np.ndarray, np.ndarray]:
        return series_eval(self.coefficients(), self.d, s, derivative=True)


def zonal_from_callable(func: Callable, d: int, n: int = 512, signed: bool = False,
                        axis: str = "v") -> ZonalFunction:
    g = zonal_grid(d, n)
    return ZonalFunction(g, np.asarray(func(g.nodes), dtype=float), signed, axis)


def _zonal_energy(F: ZonalFunction, method: str = "spectral") -> float:
    if method == "spectral":
        c = F.coefficients()
        ell = F.grid.degrees
        return float(np.sum(ell * (ell + F.d - 1) * c ** 2))
    if method == "fd":
        th = F.grid.theta[::-1]
        g = np.gradient(F.values[::-1], th, edge_order=2)
        return float(np.sum(F.grid.weights[::-1] * g ** 2))
    raise ValueError(f"unknown gradient method {method!r}")


# ---------------------------------------------------------------------------
# meridian functions on S^d: F(p, v) with p = omega_d, v = omega_{d+1}
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MeridianGrid:
    """Polar grid of the unit disk (p, v) = rho (sin phi, cos phi).

    The marginal of (omega_d, omega_{d+1}) under the uniform probability on S^d
    has density (d-1)/(2 pi) (1-rho^2)^{(d-3)/2} rho d rho d phi. Gauss-Jacobi
    nodes in rho and uniform nodes in phi; ``nphi`` is a multiple of 4 so the
    quarter turn is an index shift.
    """

    d: int
    rho: np.ndarray
    phi: np.ndarray
    weights: np.ndarray
    drho: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.rho.size, self.phi.size

    @property
    def p(self) -> np.ndarray:
        return np.outer(self.rho, np.sin(self.phi))

    @property
    def v(self) -> np.ndarray:
        return np.outer(self.rho, np.cos(self.phi))


def _barycentric_weights(x: np.ndarray) -> np.ndarray:
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    # scale to avoid overflow for many nodes
    logw = -np.sum(np.log(np.abs(diff) * 2.0), axis=1)
    sign = np.prod(np.sign(diff), axis=1)
    logw -= logw.max()
    return sign * np.exp(logw)


def differentiation_matrix(x: np.ndarray) -> np.ndarray:
    w = _barycentric_weights(x)
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    D = (w[None, :] / w[:, None]) / diff
    np.fill_diagonal(D, 0.0)
    np.fill_diagonal(D, -D.sum(axis=1))
    return D


def interpolation_matrix(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Matrix mapping values at nodes x to the polynomial interpolant at points y."""
    w = _barycentric_weights(x)
    diff = y[:, None] - x[None, :]
    exact = diff == 0
    diff[exact] = 1.0
    K = w[None, :] / diff
    K /= K.sum(axis=1, keepdims=True)
    rows = np.any(exact, axis=1)
    K[rows] = exact[rows].astype(float)
    return K


@lru_cache(maxsize=32)
def meridian_grid(d: int, nr: int = 96, nphi: int = 256) -> MeridianGrid:
    _check_dim(d)
    if nphi % 4:
        raise ValueError("nphi must be divisible by 4")
    a = 0.5 * (d - 3)
    x, wx = roots_jacobi(nr, a, 1.0)
    rho = 0.5 * (1.0 + x)
    wr = wx * 2.0 ** (-a) * (0.5 * (3.0 + x)) ** a * 0.25
    phi = 2.0 * np.pi * np.arange(nphi) / nphi
    W = np.outer(wr, np.full(nphi, (d - 1) / nphi))
    D = differentiation_matrix(rho)
    for arr in (rho, phi, W, D):
        arr.setflags(write=False)
    return MeridianGrid(d, rho, phi, W, D)


@dataclass(frozen=True, eq=False)
class MeridianFunction:
    grid: MeridianGrid
    values: np.ndarray
    signed: bool = False

    def __post_init__(self):
        F = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", F)
        if F.shape != self.grid.shape:
            raise ValueError("values must match the meridian grid")
        _finite("values", F)
        if not self.signed and np.any(F < 0):
            raise ValueError("negative values in a function flagged nonnegative")

    @property
    def d(self) -> int:
        return self.grid.d

    def with_values(self, values, signed=None) -> "MeridianFunction":
        return MeridianFunction(self.grid, values, self.signed if signed is None else signed)

    def grad_sq(self) -> np.ndarray:
        g = self.grid
        Fr = g.drho @ self.values
        k = np.fft.fftfreq(g.phi.size, 1.0 / g.phi.size)
        Fp = np.real(np.fft.ifft(1j * k[None, :] * np.fft.fft(self.values, axis=1), axis=1))
        rho = g.rho[:, None]
        return (1.0 - rho ** 2) * Fr ** 2 + Fp ** 2 / rho ** 2

    def resample(self, nr: int, nphi: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Values on a uniform-midpoint (rho, phi) grid via polynomial x Fourier interpolation."""
        g = self.grid
        rf = (np.arange(nr) + 0.5) / nr
        vals = interpolation_matrix(g.rho, rf) @ self.values
        spec = np.fft.rfft(vals, axis=1)
        m = g.phi.size
        out = np.fft.irfft(spec, n=nphi, axis=1) * (nphi / m)
        if m % 2 == 0 and nphi > m:
            # the Nyquist mode of the coarse grid is split evenly between +/- frequencies
            pass
        return rf, 2.0 * np.pi * np.arange(nphi) / nphi, out


def meridian_from_callable(func: Callable, d: int, nr: int = 96, nphi: int = 256,
                           signed: bool = False) -> MeridianFunction:
    """Build from func(p, v)."""
    g = meridian_grid(d, nr, nphi)
    return MeridianFunction(g, np.asarray(func(g.p, g.v), dtype=float), signed)


# ---------------------------------------------------------------------------
# Gaussian measure d gamma = exp(-pi |x|^2) dx on R^N
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GaussGrid:
    N: int
    nodes: np.ndarray
    weights: np.ndarray

    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*([self.nodes] * self.N), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def tensor_weights(self) -> np.ndarray:
        w = self.weights
        out = w
        for _ in range(self.N - 1):
            out = np.multiply.outer(out, w)
        return np.asarray(out).ravel()

    def axis_shape(self) -> tuple[int, ...]:
        return (self.nodes.size,) * self.N


@lru_cache(maxsize=16)
def gauss_grid(N: int, n: int = 64) -> GaussGrid:
    if N < 1:
        raise ValueError("N must be >= 1")
    y, w = hermgauss(n)
    x = y / math.sqrt(math.pi)
    w = w / math.sqrt(math.pi)
    x.setflags(write=False)
    w.setflags(write=False)
    return GaussGrid(N, x, w)


def gauss_integral(u, grid: GaussGrid, b=None) -> float:
    """Integral of u against d gamma; with b, against exp(pi b.x - pi|b|^2/2) d gamma.

    The shifted form equals the overlap integral of u with
    exp(-pi|x|^2/2) exp(-pi|x-b|^2/2) dx.
    """
    X = grid.points()
    vals = np.asarray(u(X) if callable(u) else u, dtype=float).ravel()
    if vals.size != X.shape[0]:
        raise ValueError("dimension mismatch between u and the Gauss grid")
    w = grid.tensor_weights()
    if b is not None:
        b = np.atleast_1d(np.asarray(b, dtype=float))
        if b.size != grid.N:
            raise ValueError("shift dimension mismatch")
        w = w * np.exp(math.pi * (X @ b) - 0.5 * math.pi * float(b @ b))
    return float(np.sum(w * vals))


# ---------------------------------------------------------------------------
# generic norms and energies
# ---------------------------------------------------------------------------

def lp_norm(f, p: float) -> float:
    """L^p norm: Lebesgue measure for R^d classes, probability measure for sphere classes."""
    if not (1 <= p < math.inf):
        raise ValueError("unsupported exponent; need 1 <= p < inf")
    if isinstance(f, RadialFunction):
        return integrate_radial(f, p) ** (1.0 / p)
    if isinstance(f, CylFunction):
        return float(np.sum(f.cell_weights() * np.abs(f.values) ** p)) ** (1.0 / p)
    if isinstance(f, (ZonalFunction, MeridianFunction)):
        w = f.grid.weights
        return float(np.sum(w * np.abs(f.values) ** p)) ** (1.0 / p)
    raise TypeError(f"unsupported function type {type(f).__name__}")


def dirichlet_energy(f, method: str = "spectral") -> float:
    """Integral of |grad f|^2 (Lebesgue measure on R^d, probability measure on S^d)."""
    if isinstance(f, RadialFunction):
        return _radial_energy(f)
    if isinstance(f, CylFunction):
        return _cyl_energy(f)
    if isinstance(f, ZonalFunction):
        return _zonal_energy(f, method)
    if isinstance(f, MeridianFunction):
        return float(np.sum(f.grid.weights * f.grad_sq()))
    raise TypeError(f"unsupported function type {type(f).__name__}")
