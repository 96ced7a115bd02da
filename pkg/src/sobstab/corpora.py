"""Seeded zonal test corpora on S^d."""
from __future__ import annotations

import numpy as np

from .quad import ZonalFunction, zonal_grid

__all__ = ["zonal_corpus"]


def zonal_corpus(count: int, d: int, seed: int = 0, signed: bool = False, axis: str = "v",
                 n: int = 512) -> list[ZonalFunction]:
    """Random zonal functions: two exponential caps, plus a low-degree ripple.

    Nonnegative members are exp(k1 (s-1)) + w exp(-k2 (s+1)) times a positive
    ripple. Signed members subtract a constant between the two cap heights so
    the function changes sign on a latitude band.
    """
    if count < 0:
        raise ValueError("count must be nonnegative")
    rng = np.random.default_rng(seed)
    g = zonal_grid(d, n)
    s = g.nodes
    out = []
    for _ in range(count):
        k1, k2 = rng.uniform(0.5, 3.0, 2)
        w = rng.uniform(0.1, 0.8)
        ripple = 1.0 + 0.15 * np.tanh(rng.normal(0, 1) * g.basis[2] / np.max(np.abs(g.basis[2])))
        vals = (np.exp(k1 * (s - 1)) + w * np.exp(-k2 * (s + 1))) * ripple
        if signed:
            lo, hi = float(vals.min()), float(vals.max())
            vals = vals - (lo + rng.uniform(0.2, 0.6) * (hi - lo))
        out.append(ZonalFunction(g, vals, signed=signed, axis=axis))
    return out
