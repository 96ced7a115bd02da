"""Symmetric decreasing rearrangement, Steiner symmetrization and Brock's continuous flow.

Continuous flows work on layer-cake step functions. Every superlevel set is a
finite union of open intervals (1D) or of rectangles (2D). Half-lengths are
held as ``Fraction`` so merges conserve measure exactly; centers are floats.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.special import ndtr, roots_legendre

from .quad import (
    CylFunction, RadialFunction, ZonalFunction, integrate_radial, log_sphere_area,
    radial_nodes, series_eval, zonal_grid,
)

log = logging.getLogger(__name__)

__all__ = [
    "IntervalUnion", "LayeredFunction", "Layered2D", "StripSet", "FlowEvent", "SliceProfile",
    "touch_time", "slide_intervals", "slide_with_events", "continuous_1d_flow", "phi_n",
    "decreasing_rearrangement", "steiner_symmetrize", "grid_energy_2d", "chained_flow",
    "zonal_distribution", "interval_interaction",
]

TOUCH_RTOL = 1e-12


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(float(x))


# ---------------------------------------------------------------------------
# interval unions and the sliding flow
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IntervalUnion:
    """Disjoint open intervals (b_k - a_k, b_k + a_k), sorted by center."""

    centers: tuple
    halves: tuple

    def __post_init__(self):
        c = tuple(float(b) for b in self.centers)
        h = tuple(_frac(a) for a in self.halves)
        if len(c) != len(h):
            raise ValueError("centers and halves differ in length")
        if any(a <= 0 for a in h):
            raise ValueError("half-lengths must be positive")
        for k in range(len(c) - 1):
            gap = c[k + 1] - c[k]
            need = float(h[k] + h[k + 1])
            if gap < need * (1 - TOUCH_RTOL):
                raise ValueError(f"intervals {k} and {k + 1} overlap")
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "halves", h)

    @classmethod
    def empty(cls) -> "IntervalUnion":
        return cls((), ())

    @classmethod
    def from_intervals(cls, pairs) -> "IntervalUnion":
        """Build from (lo, hi) pairs; overlapping or touching pieces are joined."""
        pairs = sorted((float(lo), float(hi)) for lo, hi in pairs if hi > lo)
        merged: list[list[float]] = []
        for lo, hi in pairs:
            if merged and lo <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], hi)
            else:
                merged.append([lo, hi])
        return cls(tuple(0.5 * (lo + hi) for lo, hi in merged),
                   tuple(Fraction(hi) / 2 - Fraction(lo) / 2 for lo, hi in merged))

    def __len__(self) -> int:
        return len(self.centers)

    @property
    def measure(self) -> Fraction:
        return 2 * sum(self.halves, Fraction(0))

    def bounds(self) -> list[tuple[float, float]]:
        return [(b - float(a), b + float(a)) for b, a in zip(self.centers, self.halves)]

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape, dtype=bool)
        for lo, hi in self.bounds():
            out |= (x > lo) & (x < hi)
        return out

    def is_subset(self, other: "IntervalUnion", tol: float = 1e-12) -> bool:
        ob = other.bounds()
        for lo, hi in self.bounds():
            scale = tol * max(1.0, abs(lo), abs(hi))
            if not any(lo >= olo - scale and hi <= ohi + scale for olo, ohi in ob):
                return False
        return True

    def intersect(self, other: "IntervalUnion") -> "IntervalUnion":
        out = []
        for lo, hi in self.bounds():
            for olo, ohi in other.bounds():
                a, b = max(lo, olo), min(hi, ohi)
                if b > a:
                    out.append((a, b))
        return IntervalUnion.from_intervals(out)

    def to_dict(self) -> dict:
        return {"centers": list(self.centers), "halves": [str(a) for a in self.halves]}

    @classmethod
    def from_dict(cls, data: dict) -> "IntervalUnion":
        return cls(tuple(data["centers"]), tuple(Fraction(a) for a in data["halves"]))


def touch_time(u: IntervalUnion) -> tuple[float, int]:
    """Time until the first adjacent pair touches when centers scale by exp(-t)."""
    if len(u) < 2:
        return math.inf, -1
    best, k_best = math.inf, -1
    for k in range(len(u) - 1):
        gap = u.centers[k + 1] - u.centers[k]
        t = math.log(gap / float(u.halves[k] + u.halves[k + 1]))
        if t < best:
            best, k_best = t, k
    return max(best, 0.0), k_best


@dataclass(frozen=True)
class FlowEvent:
    time: float
    merged: tuple
    count_before: int
    count_after: int
    measure_before: Fraction
    measure_after: Fraction


def _merge_touching(centers, halves):
    """Join every adjacent run of touching intervals."""
    new_c, new_h, merged = [centers[0]], [halves[0]], []
    for k in range(1, len(centers)):
        gap = centers[k] - new_c[-1]
        need = float(new_h[-1] + halves[k])
        if gap <= need * (1 + TOUCH_RTOL):
            lo = new_c[-1] - float(new_h[-1])
            hi = centers[k] + float(halves[k])
            new_c[-1] = 0.5 * (lo + hi)
            new_h[-1] = new_h[-1] + halves[k]
            merged.append(k)
        else:
            new_c.append(centers[k])
            new_h.append(halves[k])
    return new_c, new_h, tuple(merged)


def slide_with_events(u: IntervalUnion, t: float) -> tuple[IntervalUnion, list[FlowEvent]]:
    """Advance the sliding flow by time t and return the merge events on the way."""
    if t < 0 or math.isnan(t):
        raise ValueError("t must be nonnegative")
    centers, halves = list(u.centers), list(u.halves)
    events: list[FlowEvent] = []
    elapsed = 0.0
    while True:
        cur = IntervalUnion(tuple(centers), tuple(halves)) if centers else u
        t_star, _ = touch_time(cur)
        remaining = t - elapsed
        if math.isinf(t_star) or t_star > remaining:
            if math.isinf(remaining):
                centers = [0.0 for _ in centers]
            elif math.isinf(t_star) and not centers:
                pass
            else:
                s = math.exp(-remaining)
                centers = [b * s for b in centers]
            break
        s = math.exp(-t_star)
        centers = [b * s for b in centers]
        elapsed += t_star
        before = sum(halves, Fraction(0)) * 2
        n0 = len(centers)
        centers, halves, merged = _merge_touching(centers, halves)
        events.append(FlowEvent(elapsed, merged, n0, len(centers), before,
                                2 * sum(halves, Fraction(0))))
    return IntervalUnion(tuple(centers), tuple(halves)), events


def slide_intervals(u: IntervalUnion, t: float) -> IntervalUnion:
    return slide_with_events(u, t)[0]


def phi_n(tau: float, n: int) -> float:
    """exp((tau - n)/(n + 1 - tau)) - 1 on [n, n + 1)."""
    if not (n <= tau < n + 1):
        raise ValueError(f"tau={tau} outside [{n}, {n + 1})")
    x = (tau - n) / (n + 1 - tau)
    return math.inf if x > 700 else math.expm1(x)


# ---------------------------------------------------------------------------
# layered 1D functions
# ---------------------------------------------------------------------------

def _psi(z, h):
    return z * ndtr(z / h) + h * np.exp(-0.5 * (z / h) ** 2) / math.sqrt(2 * math.pi)


def interval_interaction(I, J, h: float) -> np.ndarray:
    """int_I int_J rho_h(x - y) dy dx for Gaussian rho_h of standard deviation h (vectorized)."""
    x0, x1 = I
    y0, y1 = J
    return _psi(x1 - y0, h) - _psi(x0 - y0, h) - _psi(x1 - y1, h) + _psi(x0 - y1, h)


@dataclass(frozen=True)
class LayeredFunction:
    """f = sum_j (h_j - h_{j-1}) chi_{E_j} with 0 < h_1 < ... < h_m and E_1 ⊇ ... ⊇ E_m."""

    thresholds: tuple
    layers: tuple
    repairs: int = 0

    def __post_init__(self):
        h = tuple(float(x) for x in self.thresholds)
        if len(h) != len(self.layers):
            raise ValueError("one layer per threshold")
        if any(x <= 0 for x in h) or any(b <= a for a, b in zip(h, h[1:])):
            raise ValueError("thresholds must be positive and increasing")
        object.__setattr__(self, "thresholds", h)
        object.__setattr__(self, "layers", tuple(self.layers))

    @property
    def increments(self) -> np.ndarray:
        h = np.asarray(self.thresholds)
        return np.diff(np.concatenate([[0.0], h]))

    def nesting_violations(self, tol: float = 1e-12) -> list[int]:
        return [j for j in range(1, len(self.layers))
                if not self.layers[j].is_subset(self.layers[j - 1], tol)]

    def measures(self) -> list[Fraction]:
        return [E.measure for E in self.layers]

    def lp_integral(self, p: float) -> float:
        """int |f|^p through the layer cake; exact up to one rounding per layer."""
        h = [0.0] + list(self.thresholds)
        return math.fsum((h[j + 1] ** p - h[j] ** p) * float(E.measure)
                         for j, E in enumerate(self.layers))

    def lp_norm(self, p: float) -> float:
        return self.lp_integral(p) ** (1.0 / p)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        for c, E in zip(self.increments, self.layers):
            out += c * E.contains(x)
        return out

    def rearranged(self) -> "LayeredFunction":
        layers = tuple(IntervalUnion((0.0,), (E.measure / 2,)) if len(E) else E for E in self.layers)
        return LayeredFunction(self.thresholds, layers)

    def breakpoints(self) -> np.ndarray:
        pts = [x for E in self.layers for pair in E.bounds() for x in pair]
        return np.unique(np.asarray(pts, dtype=float))

    def lp_distance(self, other: "LayeredFunction", p: float) -> float:
        pts = np.union1d(self.breakpoints(), other.breakpoints())
        if pts.size < 2:
            return 0.0
        mid = 0.5 * (pts[1:] + pts[:-1])
        diff = np.abs(self(mid) - other(mid)) ** p
        return float(np.sum(diff * np.diff(pts))) ** (1.0 / p)

    def smoothed_energy(self, h: float) -> float:
        """(2/h^2)(int f^2 - int int f(x) f(y) rho_h(x-y)) with a Gaussian rho_h.

        This nonlocal energy tends to int |f'|^2 for smooth f as h -> 0 and is
        nonincreasing under the sliding flow, since every pairwise interaction
        depends only on a shrinking center distance.
        """
        lo, hi, c = [], [], []
        for cj, E in zip(self.increments, self.layers):
            for a, b in E.bounds():
                lo.append(a)
                hi.append(b)
                c.append(cj)
        if not c:
            return 0.0
        lo, hi, c = map(np.asarray, (lo, hi, c))
        K = interval_interaction((lo[:, None], hi[:, None]), (lo[None, :], hi[None, :]), h)
        l2 = self.lp_integral(2.0)
        return 2.0 / h ** 2 * (l2 - float(c @ K @ c))

    @classmethod
    def from_samples(cls, edges, values, max_layers: int = 64) -> "LayeredFunction":
        """Cell-wise constant function on the cells [edges[i], edges[i+1]] quantized to at most ``max_layers`` levels."""
        edges = np.asarray(edges, dtype=float)
        vals = np.asarray(values, dtype=float)
        if vals.size != edges.size - 1:
            raise ValueError("need one value per cell")
        if np.any(vals < 0):
            raise ValueError("layered functions are nonnegative")
        levels = np.unique(vals[vals > 0])
        if levels.size > max_layers:
            top = levels[-1]
            grid = top * np.arange(1, max_layers + 1) / max_layers
            idx = np.searchsorted(grid, vals, side="right")
            vals = np.where(idx > 0, grid[np.maximum(idx - 1, 0)], 0.0)
            levels = np.unique(vals[vals > 0])
        layers = []
        for lev in levels:
            mask = vals >= lev
            layers.append(IntervalUnion.from_intervals(_runs(edges, mask)))
        return cls(tuple(levels), tuple(layers))

    def to_json(self) -> str:
        return json.dumps({"thresholds": list(self.thresholds),
                           "layers": [E.to_dict() for E in self.layers],
                           "repairs": self.repairs})

    @classmethod
    def from_json(cls, text: str) -> "LayeredFunction":
        data = json.loads(text)
        return cls(tuple(data["thresholds"]),
                   tuple(IntervalUnion.from_dict(e) for e in data["layers"]),
                   int(data.get("repairs", 0)))


def _runs(edges, mask):
    out, start = [], None
    for i, m in enumerate(mask):
        if m and start is None:
            start = i
        if not m and start is not None:
            out.append((edges[start], edges[i]))
            start = None
    if start is not None:
        out.append((edges[start], edges[len(mask)]))
    return out


def continuous_1d_flow(f: LayeredFunction, tau: float) -> LayeredFunction:
    """Slide every layer for the same time; nesting is re-validated and repaired if needed."""
    layers = [slide_intervals(E, tau) if len(E) else E for E in f.layers]
    repairs = f.repairs
    for j in range(1, len(layers)):
        if not layers[j].is_subset(layers[j - 1]):
            log.warning("nesting violated at layer %d (tau=%g); intersecting with its predecessor", j, tau)
            layers[j] = layers[j].intersect(layers[j - 1])
            repairs += 1
    return LayeredFunction(f.thresholds, tuple(layers), repairs)


# ---------------------------------------------------------------------------
# planar layered functions (unions of rectangles) and the chained flow
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StripSet:
    """Union over strips [edges[i], edges[i+1]] (transverse) of intervals along ``axis``."""

    edges: tuple
    rows: tuple
    axis: int = 0

    @property
    def measure(self) -> float:
        return math.fsum((self.edges[i + 1] - self.edges[i]) * float(r.measure)
                         for i, r in enumerate(self.rows))

    def contains(self, x, y) -> np.ndarray:
        along, across = (x, y) if self.axis == 0 else (y, x)
        along = np.asarray(along, dtype=float)
        across = np.asarray(across, dtype=float)
        out = np.zeros(np.broadcast(along, across).shape, dtype=bool)
        e = np.asarray(self.edges)
        for i, r in enumerate(self.rows):
            if len(r):
                out |= (across > e[i]) & (across < e[i + 1]) & r.contains(along)
        return out

    def rectangles(self) -> np.ndarray:
        """Rows (x0, x1, y0, y1)."""
        out = []
        for i, r in enumerate(self.rows):
            for lo, hi in r.bounds():
                if self.axis == 0:
                    out.append((lo, hi, self.edges[i], self.edges[i + 1]))
                else:
                    out.append((self.edges[i], self.edges[i + 1], lo, hi))
        return np.asarray(out, dtype=float).reshape(-1, 4)

    def transpose(self) -> "StripSet":
        pts = sorted({x for r in self.rows for pair in r.bounds() for x in pair})
        edges, rows = _columns(pts, self)
        return StripSet(tuple(edges), tuple(rows), 1 - self.axis)

    def slide(self, t: float) -> "StripSet":
        return StripSet(self.edges, tuple(slide_intervals(r, t) if len(r) else r for r in self.rows),
                        self.axis)

    def oriented(self, axis: int) -> "StripSet":
        return self if self.axis == axis else self.transpose()


def _columns(pts, s: StripSet):
    """Columns of ``s`` between consecutive breakpoints, with identical neighbours joined."""
    edges, rows, keys = [], [], []
    for a, b in zip(pts, pts[1:]):
        m = 0.5 * (a + b)
        runs = []
        for i, r in enumerate(s.rows):
            if len(r) and bool(r.contains(m)):
                if runs and runs[-1][1] == s.edges[i]:
                    runs[-1][1] = s.edges[i + 1]
                else:
                    runs.append([s.edges[i], s.edges[i + 1]])
        key = tuple(map(tuple, runs))
        if rows and keys[-1] == key and edges[-1] == a:
            edges[-1] = b
            continue
        if not edges or edges[-1] != a:
            if edges:
                rows.append(IntervalUnion.empty())
                keys.append(())
                edges.append(a)
            else:
                edges.append(a)
        rows.append(IntervalUnion.from_intervals(runs))
        keys.append(key)
        edges.append(b)
    return edges, rows


@dataclass(frozen=True)
class Layered2D:
    thresholds: tuple
    layers: tuple

    @property
    def increments(self) -> np.ndarray:
        return np.diff(np.concatenate([[0.0], np.asarray(self.thresholds, dtype=float)]))

    def lp_integral(self, p: float) -> float:
        h = [0.0] + list(self.thresholds)
        return math.fsum((h[j + 1] ** p - h[j] ** p) * E.measure for j, E in enumerate(self.layers))

    def lp_norm(self, p: float) -> float:
        return self.lp_integral(p) ** (1.0 / p)

    def __call__(self, x, y) -> np.ndarray:
        out = np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)
        for c, E in zip(self.increments, self.layers):
            out += c * E.contains(x, y)
        return out

    def _breaks(self):
        R = np.concatenate([E.rectangles() for E in self.layers] or [np.zeros((0, 4))])
        return np.unique(R[:, :2]), np.unique(R[:, 2:])

    def lp_distance(self, other: "Layered2D", p: float) -> float:
        xa, ya = self._breaks()
        xb, yb = other._breaks()
        xs, ys = np.union1d(xa, xb), np.union1d(ya, yb)
        if xs.size < 2 or ys.size < 2:
            return 0.0
        X, Y = np.meshgrid(0.5 * (xs[1:] + xs[:-1]), 0.5 * (ys[1:] + ys[:-1]), indexing="ij")
        area = np.outer(np.diff(xs), np.diff(ys))
        return float(np.sum(np.abs(self(X, Y) - other(X, Y)) ** p * area)) ** (1.0 / p)

    def flow(self, axis: int, t: float) -> "Layered2D":
        return Layered2D(self.thresholds, tuple(E.oriented(axis).slide(t) for E in self.layers))

    def smoothed_energy(self, h: float) -> float:
        """Planar analogue of ``LayeredFunction.smoothed_energy`` with a product Gaussian kernel."""
        rects, cs = [], []
        for c, E in zip(self.increments, self.layers):
            R = E.rectangles()
            rects.append(R)
            cs.append(np.full(R.shape[0], c))
        R = np.concatenate(rects)
        c = np.concatenate(cs)
        Kx = interval_interaction((R[:, None, 0], R[:, None, 1]), (R[None, :, 0], R[None, :, 1]), h)
        Ky = interval_interaction((R[:, None, 2], R[:, None, 3]), (R[None, :, 2], R[None, :, 3]), h)
        return 2.0 / h ** 2 * (self.lp_integral(2.0) - float(c @ (Kx * Ky) @ c))

    @classmethod
    def from_grid(cls, x_edges, y_edges, values, max_layers: int = 64) -> "Layered2D":
        x_edges = np.asarray(x_edges, dtype=float)
        y_edges = np.asarray(y_edges, dtype=float)
        vals = np.asarray(values, dtype=float)
        if vals.shape != (x_edges.size - 1, y_edges.size - 1):
            raise ValueError("values must have shape (nx, ny)")
        if np.any(vals < 0):
            raise ValueError("layered functions are nonnegative")
        levels = np.unique(vals[vals > 0])
        if levels.size > max_layers:
            grid = levels[-1] * np.arange(1, max_layers + 1) / max_layers
            idx = np.searchsorted(grid, vals, side="right")
            vals = np.where(idx > 0, grid[np.maximum(idx - 1, 0)], 0.0)
            levels = np.unique(vals[vals > 0])
        layers = []
        for lev in levels:
            mask = vals >= lev
            rows = tuple(IntervalUnion.from_intervals(_runs(x_edges, mask[:, j]))
                         for j in range(y_edges.size - 1))
            layers.append(StripSet(tuple(y_edges), rows, 0))
        return cls(tuple(levels), tuple(layers))


def _schedule(n: int, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).integers(0, 2, size=n)


def chained_flow(f: Layered2D, tau: float, seed: int = 0x5EED, max_steps: int = 64) -> Layered2D:
    """f_tau: Brock flows along a seeded random sequence of coordinate hyperplanes chained by phi_n."""
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    n_full = max_steps if math.isinf(tau) else int(math.floor(tau))
    axes = _schedule(max(n_full + 1, 1), seed)
    g = f
    for n in range(min(n_full, max_steps)):
        g = g.flow(int(axes[n]), math.inf)
    if math.isinf(tau) or n_full >= max_steps:
        return g
    t = phi_n(tau, n_full)
    return g.flow(int(axes[n_full]), t)


# ---------------------------------------------------------------------------
# grid Steiner symmetrization
# ---------------------------------------------------------------------------

def _center_order(n: int) -> np.ndarray:
    idx = np.arange(n)
    dist = np.abs(idx - (n - 1) / 2.0)
    return np.lexsort((idx, dist))


def steiner_symmetrize(values, axis: int = 0) -> np.ndarray:
    """Discrete Steiner symmetrization of a uniform-grid array along ``axis`` about its midpoint."""
    v = np.asarray(values, dtype=float)
    if np.any(v < 0):
        raise ValueError("Steiner symmetrization expects a nonnegative function")
    moved = np.moveaxis(v, axis, -1)
    order = _center_order(moved.shape[-1])
    srt = -np.sort(-moved, axis=-1)
    out = np.empty_like(moved)
    out[..., order] = srt
    return np.moveaxis(out, -1, axis)


def grid_energy_2d(values, hx: float, hy: float) -> float:
    """Finite-difference Dirichlet energy with zero values outside the array."""
    v = np.pad(np.asarray(values, dtype=float), 1)
    gx = np.diff(v, axis=0)[:, 1:-1] / hx
    gy = np.diff(v, axis=1)[1:-1, :] / hy
    return float((np.sum(gx ** 2) + np.sum(gy ** 2)) * hx * hy)


# ---------------------------------------------------------------------------
# symmetric decreasing rearrangement
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SliceProfile:
    """Symmetric decreasing step function: value[j] on |x| in [edges[j], edges[j+1])."""

    edges: np.ndarray
    values: np.ndarray

    def __call__(self, x) -> np.ndarray:
        x = np.abs(np.asarray(x, dtype=float))
        idx = np.searchsorted(self.edges, x, side="right") - 1
        ok = (idx >= 0) & (idx < self.values.size)
        return np.where(ok, self.values[np.clip(idx, 0, self.values.size - 1)], 0.0)


def _ball_volume(d: int) -> float:
    return math.exp(log_sphere_area(d - 1)) / d


def _invert_distribution(mu, targets, lam_hi, iters: int = 60) -> np.ndarray:
    """Solve mu(lambda) = target for each target by bisection on log(lambda)."""
    targets = np.asarray(targets, dtype=float)
    lo = np.full(targets.shape, math.log(lam_hi) - 80.0)
    hi = np.full(targets.shape, math.log(lam_hi))
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        m = mu(np.exp(mid))
        big = m > targets
        lo = np.where(big, mid, lo)
        hi = np.where(big, hi, mid)
    return np.exp(0.5 * (lo + hi))


def _radial_distribution(r, g, d, tail=True):
    """mu(lambda) for the piecewise-linear radial profile g(r), with a harmonic tail past r[-1]."""
    vol = _ball_volume(d)
    r0, r1 = r[:-1], r[1:]
    g0, g1 = g[:-1], g[1:]
    R, gN = r[-1], g[-1]

    def mu(lam):
        lam = np.atleast_1d(lam)[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            frac = (lam - g0) / (g1 - g0)
        x = r0 + np.clip(np.nan_to_num(frac, nan=0.0), 0, 1) * (r1 - r0)
        above0, above1 = g0 > lam, g1 > lam
        lo = np.where(above0, r0, x)
        hi = np.where(above1, r1, x)
        seg = np.where(above0 | above1, hi ** d - lo ** d, 0.0)
        total = seg.sum(axis=1)
        if tail and gN > 0:
            Rl = R * (gN / lam[:, 0]) ** (1.0 / (d - 2))
            total += np.where(lam[:, 0] < gN, Rl ** d - R ** d, 0.0)
        return vol * total
    return mu


def _rearrange_radial(f: RadialFunction) -> RadialFunction:
    if f.signed:
        raise ValueError("rearrangement expects a nonnegative function")
    r, g, d = f.nodes, f.values, f.d
    top = float(g.max())
    if top <= 0:
        return f
    mu = _radial_distribution(r, g, d)
    targets = _ball_volume(d) * r ** d
    vals = np.empty_like(g)
    chunk = 256
    for i in range(0, r.size, chunk):
        vals[i:i + chunk] = _invert_distribution(mu, targets[i:i + chunk], top)
    vals[0] = top
    return RadialFunction(d, r, vals)


def _rearrange_cyl(f: CylFunction, n: int = 2048) -> RadialFunction:
    if f.signed:
        raise ValueError("rearrangement expects a nonnegative function")
    d = f.d
    w = f.cell_weights().ravel()
    v = f.values.ravel()
    order = np.argsort(-v, kind="stable")
    vs, ws = v[order], w[order]
    cum = np.cumsum(ws) - 0.5 * ws
    r = radial_nodes(n)
    m = _ball_volume(d) * r ** d
    vals = np.interp(m, cum, vs, left=vs[0], right=vs[-1])
    R_edge = (cum[-1] / _ball_volume(d)) ** (1.0 / d)
    beyond = r > R_edge
    vals[beyond] = vs[-1] * (R_edge / r[beyond]) ** (d - 2)
    return RadialFunction(d, r, vals)


def _rearrange_slice(values, widths) -> SliceProfile:
    v = np.asarray(values, dtype=float)
    w = np.asarray(widths, dtype=float)
    if np.any(v < 0):
        raise ValueError("rearrangement expects a nonnegative function")
    order = np.argsort(-v, kind="stable")
    edges = np.concatenate([[0.0], np.cumsum(w[order]) / 2.0])
    return SliceProfile(edges, v[order])


# --- zonal functions: Euclidean distribution from the sphere representation ---

@lru_cache(maxsize=8)
def _p_nodes(m_panels: int = 128, order: int = 16):
    x, w = roots_legendre(order)
    edges = np.linspace(-1.0, 1.0, m_panels + 1)
    h = np.diff(edges)
    nodes = (edges[:-1, None] + 0.5 * h[:, None] * (x[None, :] + 1)).ravel()
    weights = (0.5 * h[:, None] * w[None, :]).ravel()
    return nodes, weights


@lru_cache(maxsize=4)
def _cos_nodes(n: int = 24):
    x, w = roots_legendre(n)
    th = 0.5 * np.pi * (x + 1)
    return th, 0.5 * np.pi * w


def _slice_integral(a, c, d):
    """J(a, c) = int_a^c (1+v)^{-d} (c^2 - v^2)^{(d-3)/2} dv (elementwise, a <= c)."""
    if d == 3:
        return 0.5 * ((1 + a) ** -2 - (1 + c) ** -2)
    # z = (1+v)^{1-d}; the cosine map tames the endpoint root singularities
    za, zc = (1 + a) ** (1 - d), (1 + c) ** (1 - d)
    th, w = _cos_nodes()
    z = zc[..., None] + (za - zc)[..., None] * 0.5 * (1 - np.cos(th))
    jac = (za - zc)[..., None] * 0.5 * np.sin(th)
    v = z ** (-1.0 / (d - 1)) - 1
    integrand = np.maximum(c[..., None] ** 2 - v ** 2, 0.0) ** ((d - 3) / 2.0)
    return np.sum(integrand * jac * w, axis=-1) / (d - 1)


def zonal_distribution(F: ZonalFunction):
    """mu(lambda) = |{x : f(x) > lambda}| for the Euclidean function f = (1+v)^k F."""
    d = F.d
    k = 0.5 * (d - 2)
    coeffs = F.coefficients()
    if F.axis == "v":
        th = np.linspace(0.0, np.pi, 8193)
        v = np.cos(th)[::-1]
        Fv = series_eval(coeffs, d, v)[0]
        g = np.where(v > -1, (1 + v) ** k * Fv, 0.0)
        with np.errstate(divide="ignore"):
            r = np.sqrt(np.maximum(1 - v, 0) / np.maximum(1 + v, 1e-300))
        # ascending in r: reverse v order
        r, g = r[::-1], g[::-1]
        r[-1] = np.inf
        finite = np.isfinite(r)
        mu_r = _radial_distribution(r[finite], g[finite], d, tail=False)
        return mu_r, float(np.max(g))
    p, wp = _p_nodes()
    Fp = np.maximum(series_eval(coeffs, d, p)[0], 0.0)
    c = np.sqrt(np.maximum(1 - p * p, 0.0))
    const = math.exp(log_sphere_area(d - 2))
    top = float(np.max(Fp * (1 + c) ** k))

    def mu(lam):
        lam = np.atleast_1d(lam)[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            vl = (lam / Fp[None, :]) ** (1.0 / k) - 1.0
        vl = np.where(Fp[None, :] > 0, vl, np.inf)
        a = np.maximum(vl, -c[None, :])
        live = a < c[None, :]
        a = np.where(live, a, 0.0)
        cc = np.broadcast_to(c[None, :], a.shape)
        J = np.where(live, _slice_integral(a, np.where(live, cc, 1.0), d), 0.0)
        return const * (J @ wp)
    return mu, top


def _rearrange_zonal(F: ZonalFunction, n: int | None = None) -> ZonalFunction:
    if F.signed:
        raise ValueError("rearrangement expects a nonnegative function")
    d = F.d
    k = 0.5 * (d - 2)
    grid = F.grid if n is None else zonal_grid(d, n)
    mu, top = zonal_distribution(F)
    s = grid.nodes
    R = np.sqrt((1 - s) / (1 + s))
    targets = _ball_volume(d) * R ** d
    lam = np.empty_like(s)
    chunk = 64
    for i in range(0, s.size, chunk):
        lam[i:i + chunk] = _invert_distribution(mu, targets[i:i + chunk], top)
    return ZonalFunction(grid, lam / (1 + s) ** k, signed=False, axis="v")


def decreasing_rearrangement(f, widths=None):
    """Symmetric decreasing rearrangement.

    RadialFunction -> RadialFunction, CylFunction -> RadialFunction,
    ZonalFunction (either axis) -> ZonalFunction about the v axis, and
    a 1D array with cell ``widths`` -> SliceProfile.
    """
    if widths is not None:
        return _rearrange_slice(f, widths)
    if isinstance(f, RadialFunction):
        return _rearrange_radial(f)
    if isinstance(f, CylFunction):
        return _rearrange_cyl(f)
    if isinstance(f, ZonalFunction):
        return _rearrange_zonal(f)
    raise TypeError(f"cannot rearrange {type(f).__name__}")
