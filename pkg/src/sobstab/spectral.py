"""Zonal harmonic analysis on S^d: eigenvalues, projections and the degree-2 spectral gap."""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .quad import ZonalFunction, ZonalGrid, conformal_A, dirichlet_energy, zonal_grid

__all__ = [
    "eigenvalue", "spectral_gap_residual", "HarmonicDecomposition", "project",
    "project_function", "remove_low_modes", "zonal_harmonic", "rayleigh_check",
    "harmonic_supnorm_bound", "zonal_harmonic_norm", "projection_bound_r2",
]


def eigenvalue(ell: int, d: int) -> int:
    if ell < 0 or d < 2:
        raise ValueError("need ell >= 0 and d >= 2")
    return ell * (ell + d - 1)


def spectral_gap_residual(ell: int, d: int, exact: bool = False):
    """ell(ell+d-1) - d - 4/(d+4) (ell(ell+d-1) + A), computed in rational arithmetic."""
    if ell < 2:
        raise ValueError("the gap inequality concerns degrees ell >= 2")
    if d < 3:
        raise ValueError("d must be >= 3")
    lam = Fraction(eigenvalue(ell, d))
    A = Fraction(d * (d - 2), 4)
    res = lam - d - Fraction(4, d + 4) * (lam + A)
    return res if exact else float(res)


@dataclass(frozen=True)
class HarmonicDecomposition:
    d: int
    L: int
    coefficients: np.ndarray
    tail: float

    @property
    def norm_sq(self) -> float:
        return float(np.sum(self.coefficients ** 2) + self.tail)

    def energy_shares(self) -> np.ndarray:
        tot = self.norm_sq
        return self.coefficients ** 2 / tot if tot > 0 else np.zeros_like(self.coefficients)

    def function(self, grid: ZonalGrid | None = None, signed: bool = True) -> ZonalFunction:
        grid = grid or zonal_grid(self.d)
        vals = self.coefficients @ grid.basis[: self.L + 1]
        return ZonalFunction(grid, vals, signed=signed)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["degree", "coefficient", "energy_share"])
        for ell, (c, s) in enumerate(zip(self.coefficients, self.energy_shares())):
            w.writerow([ell, repr(float(c)), repr(float(s))])
        return buf.getvalue()


def project(F: ZonalFunction, K: int) -> HarmonicDecomposition:
    """Coefficients of degrees 0..K in the orthonormal zonal basis; the rest goes to ``tail``."""
    if K < 0:
        raise ValueError("K must be >= 0")
    n = F.grid.n
    if K >= n // 2:
        warnings.warn(f"degree {K} is close to the quadrature resolution ({n} nodes)")
    K = min(K, n - 1)
    c = F.coefficients()[: K + 1]
    total = float(np.sum(F.grid.weights * F.values ** 2))
    tail = max(total - float(np.sum(c ** 2)), 0.0)
    return HarmonicDecomposition(F.d, K, c, tail)


def project_function(F: ZonalFunction, K: int) -> ZonalFunction:
    """Projection of F onto degrees 0..K, as a zonal function on the same grid."""
    return project(F, K).function(F.grid)


def remove_low_modes(F: ZonalFunction) -> ZonalFunction:
    """Subtract the degree 0 and 1 components.

    For a zonal function the other first-order harmonics omega_j integrate to
    zero against F, so this enforces all orthogonality conditions at once.
    """
    c = F.coefficients()
    vals = F.values - c[0] * F.grid.basis[0] - c[1] * F.grid.basis[1]
    return F.with_values(vals, signed=True)


def zonal_harmonic(d: int, k: int, grid: ZonalGrid | None = None) -> ZonalFunction:
    """L^2-normalized zonal harmonic of degree k."""
    grid = grid or zonal_grid(d)
    if k >= grid.n:
        raise ValueError("degree exceeds grid resolution")
    return ZonalFunction(grid, grid.basis[k].copy(), signed=True)


def rayleigh_check(r: ZonalFunction) -> tuple[float, float]:
    """Both sides of the gap inequality for r with degrees <= 1 removed."""
    r = remove_low_modes(r)
    d = r.d
    E = dirichlet_energy(r)
    L2 = float(np.sum(r.grid.weights * r.values ** 2))
    lhs = E - d * L2
    rhs = 4.0 / (d + 4) * (E + conformal_A(d) * L2)
    return lhs, rhs


def harmonic_supnorm_bound(k: int, p: float) -> float:
    """(p-1)^{k/2}, a bound for the L^p norm of an L^2-normalized degree-k harmonic."""
    if p < 2 or k < 0:
        raise ValueError("need p >= 2 and k >= 0")
    return (p - 1.0) ** (0.5 * k)


def zonal_harmonic_norm(d: int, k: int, p: float, n: int = 512) -> float:
    Y = zonal_harmonic(d, k, zonal_grid(d, n))
    return float(np.sum(Y.grid.weights * np.abs(Y.values) ** p)) ** (1.0 / p)


def projection_bound_r2(k: int, gamma: float, dtilde: float, q: float,
                        r2: ZonalFunction) -> tuple[float, float]:
    """(3^{k/2} gamma^{-q/4} dtilde^{q/8}, |int Y r2| / ||r2||_2) for the zonal degree-k Y."""
    if gamma <= 0 or dtilde <= 0:
        raise ValueError("gamma and dtilde must be positive")
    bound = 3.0 ** (0.5 * k) * gamma ** (-0.25 * q) * dtilde ** (q / 8.0)
    w = r2.grid.weights
    nrm = math.sqrt(float(np.sum(w * r2.values ** 2)))
    if nrm == 0.0:
        return 0.0, 0.0
    Y = r2.grid.basis[k]
    return bound, abs(float(np.sum(w * Y * r2.values))) / nrm
