"""Command-line front end.

Every subcommand prints (or writes to --out) a JSON or CSV payload and, when
--out is given, a sibling ``.manifest.json`` recording versions, seed, grids
and tolerances. Exit codes: 0 pass, 1 property violation, 2 input error,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import platform
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import constants as C
from . import flows, logsob, manifold, rearrange, spectral, sweeps
from .pieces import local_deficit_check
from .quad import CylFunction, RadialFunction, ZonalFunction, zonal_grid

EXIT_OK, EXIT_VIOLATION, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3

SUBCOMMANDS = ("constants", "deficit", "dist", "certify", "flow-cs", "flow-steiner", "local-check",
               "spectral-gap", "inequality-sweeps", "logsob", "limits", "verify-all")

ANCHORS = {
    "constants": ["constant ledger", "beta", "low-dimension bound sup delta m(sqrt(delta/(1-delta)))"],
    "deficit": ["Sobolev deficit ||grad f||^2 - S_d ||f||_{2*}^2"],
    "dist": ["distance to the optimizer manifold via the inner-product formula"],
    "certify": ["global stability inequality", "competing-symmetries alternative"],
    "flow-cs": ["competing symmetries f_n = (R U)^n f", "monotone gradient norm"],
    "flow-steiner": ["continuous Steiner rearrangement", "phi_n time change"],
    "local-check": ["local deficit bound near the constant function"],
    "spectral-gap": ["spectral gap ell(ell+d-1) - d >= 4/(d+4)(ell(ell+d-1) + A)"],
    "inequality-sweeps": ["elementary inequalities", "expansion of ||u + r||_q^2", "cutting bounds"],
    "logsob": ["Gaussian log-Sobolev stability", "sign splitting", "Euclidean log-Sobolev form"],
    "limits": ["Z_d closed forms and Z_d^(2/d) -> e/4", "fiber integral identities",
               "ansatz deficit limit e * logsob deficit"],
    "verify-all": ["all of the above at reduced scale"],
}


class SpecError(ValueError):
    """Malformed function spec; ``pointer`` locates the offending field."""

    def __init__(self, pointer: str, message: str):
        super().__init__(f"{pointer}: {message}")
        self.pointer = pointer


@dataclass
class RunConfig:
    subcommand: str
    d: int = 3
    eps0: float = 1.0 / 6.0
    delta: float | None = None
    seed: int = 0
    grid_radial: int = 2048
    grid_lat: int = 512
    preset: str | None = None
    spec: str | None = None
    out: str | None = None
    format: str = "json"
    lmax: int = 200
    N: int = 1
    count: int = 50
    n_max: int = 40
    extra: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.subcommand not in SUBCOMMANDS:
            raise SpecError("/subcommand", f"unknown subcommand {self.subcommand!r}")
        if self.d < 3:
            raise SpecError("/d", "d must be >= 3")
        if not (0 < self.eps0 < 1.0 / 3.0):
            raise SpecError("/eps0", "eps0 must lie in (0, 1/3)")
        if self.delta is not None and not (0 < self.delta < 1):
            raise SpecError("/delta", "delta must lie in (0, 1)")
        if self.format not in ("json", "csv"):
            raise SpecError("/format", "format must be json or csv")
        if self.grid_radial < 16 or self.grid_lat < 16:
            raise SpecError("/grid", "grids need at least 16 nodes")
        if self.N < 1:
            raise SpecError("/N", "N must be >= 1")


# ---------------------------------------------------------------------------
# function specs
# ---------------------------------------------------------------------------

PRESETS = ("gstar", "aubin_talenti", "perturbed_optimizer", "two_bumps", "signed_two_bumps")


def _need(obj: dict, key: str, where: str):
    if key not in obj:
        raise SpecError(f"{where}/{key}", "missing field")
    return obj[key]


def _array(obj, pointer: str, ndim: int = 1) -> np.ndarray:
    try:
        a = np.asarray(obj, dtype=float)
    except (TypeError, ValueError):
        raise SpecError(pointer, "expected numbers") from None
    if a.ndim != ndim:
        raise SpecError(pointer, f"expected a {ndim}-dimensional array")
    return a


def _preset(name: str, obj: dict, sphere: bool):
    d = int(obj.get("d", 3))
    if d < 3:
        raise SpecError("/d", "d must be >= 3")
    n = int(obj.get("grid_lat", 512))
    if name == "gstar":
        F = manifold.preset_gstar(d, n)
    elif name == "aubin_talenti":
        a = float(obj.get("a", 1.0))
        if a <= 0:
            raise SpecError("/a", "scale a must be positive")
        F = manifold.preset_aubin_talenti(d, a, float(obj.get("b", 0.0)), obj.get("c"))
    elif name == "perturbed_optimizer":
        F = manifold.preset_perturbed_optimizer(d, float(obj.get("eps", 0.05)),
                                                int(obj.get("degree", 2)), n)
    elif name == "two_bumps":
        F = manifold.preset_two_bumps(d, float(obj.get("kappa", 4.0)), float(obj.get("weight", 0.6)), n)
    elif name == "signed_two_bumps":
        g = zonal_grid(d, n)
        k, w = float(obj.get("kappa", 4.0)), float(obj.get("weight", 0.6))
        F = ZonalFunction(g, np.exp(k * (g.nodes - 1)) - w * np.exp(-k * (g.nodes + 1)), signed=True)
    else:
        raise SpecError("/preset", f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    if sphere:
        return F
    return manifold.stereographic_pullback(F, n=int(obj.get("grid_radial", 2048)))


def load_function_spec(spec, sphere: bool = False):
    """Build a typed function from a JSON path, a JSON string or a dict.

    Presets come back on R^d (radial or cylindrical) unless ``sphere``.
    """
    if isinstance(spec, (str, Path)):
        raw = str(spec)
        if raw.lstrip().startswith("{"):
            text = raw
        elif Path(raw).is_file():
            text = Path(raw).read_text()
        else:
            raise SpecError("", f"spec file {raw!r} not found")
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as e:
            raise SpecError("", f"invalid JSON ({e.msg})") from None
    else:
        obj = dict(spec)
    if not isinstance(obj, dict):
        raise SpecError("", "spec must be a JSON object")
    if "preset" in obj:
        return _preset(str(obj["preset"]), obj, sphere or bool(obj.get("sphere", False)))
    kind = _need(obj, "kind", "")
    signed = bool(obj.get("signed", False))
    try:
        if kind == "gauss":
            N = int(_need(obj, "N", ""))
            amps = _array(_need(obj, "amps", ""), "/amps")
            exps = _array(_need(obj, "exps", ""), "/exps", 2)
            if exps.shape != (amps.size, N):
                raise SpecError("/exps", f"expected shape ({amps.size}, {N})")
            return logsob.mixture(N, amps, exps, float(obj.get("const", 0.0)), signed)
        d = int(_need(obj, "d", ""))
        grid = _need(obj, "grid", "")
        if not isinstance(grid, dict):
            raise SpecError("/grid", "grid must be an object")
        if kind == "radial":
            nodes = _array(_need(grid, "nodes", "/grid"), "/grid/nodes")
            if np.any(np.diff(nodes) <= 0):
                raise SpecError("/grid/nodes", "nodes must be strictly increasing")
            return RadialFunction(d, nodes, _array(_need(obj, "values", ""), "/values"), signed)
        if kind == "cyl":
            s = _array(_need(grid, "s", "/grid"), "/grid/s")
            t = _array(_need(grid, "t", "/grid"), "/grid/t")
            for name, a in (("s", s), ("t", t)):
                if np.any(np.diff(a) <= 0):
                    raise SpecError(f"/grid/{name}", "nodes must be strictly increasing")
            return CylFunction(d, s, t, _array(_need(obj, "values", ""), "/values", 2), signed)
        if kind == "zonal":
            g = zonal_grid(d, int(_need(grid, "n", "/grid")))
            return ZonalFunction(g, _array(_need(obj, "values", ""), "/values"), signed,
                                 str(grid.get("axis", "v")))
    except SpecError:
        raise
    except (TypeError, ValueError) as e:
        raise SpecError("/values", str(e)) from None
    raise SpecError("/kind", f"unknown kind {kind!r}")


def _input_function(cfg: RunConfig, default: str, sphere: bool = False):
    if cfg.spec:
        return load_function_spec(cfg.spec, sphere)
    return load_function_spec({"preset": cfg.preset or default, "d": cfg.d,
                               "grid_lat": cfg.grid_lat, "grid_radial": cfg.grid_radial}, sphere)


# ---------------------------------------------------------------------------
# subcommands: each returns (payload dict, csv rows or None, ok)
# ---------------------------------------------------------------------------

def _rows_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
    return buf.getvalue()


def cmd_constants(cfg):
    payload = {}
    ok = True
    if cfg.d >= 6:
        led = C.build_ledger(cfg.d, cfg.eps0)
        payload["ledger"] = led.to_dict()
        ok = led.positive()
        beta, bstar, bls = C.beta_values(led)
        payload["beta_logsob"] = str(bls)
    rows = []
    for d in (3, 4, 5, 6):
        val, delta = C.lowdim_lower_bound(d)
        rows.append((d, val, delta, 4.0 / (d + 4)))
        ok = ok and 0 < val < 4.0 / (d + 4)
    payload["lowdim"] = [dict(zip(("d", "value", "delta", "upper"), r)) for r in rows]
    return payload, _rows_csv(("d", "value", "delta", "upper"), rows), ok


def cmd_deficit(cfg):
    f = _input_function(cfg, "gstar")
    rep = manifold.sobolev_deficit(f)
    payload = asdict(rep)
    payload["relative"] = rep.relative
    ok = rep.deficit >= -1e-8 * rep.energy
    return payload, _rows_csv(("energy", "norm_q", "deficit", "S_d"),
                              [(rep.energy, rep.norm_q, rep.deficit, rep.S_d)]), ok


def cmd_dist(cfg):
    f = _input_function(cfg, "two_bumps", sphere=True)
    dist = manifold.manifold_distance(f)
    direct = manifold.direct_distance(f, dist)
    gap = abs(dist.dist2 - direct.dist2) / max(abs(direct.dist2), 1e-300)
    payload = {"dist2": dist.dist2, "direct_dist2": direct.dist2, "relative_gap": gap,
               "params": asdict(dist.params), "sup": dist.sup_value, "energy": dist.energy}
    return payload, _rows_csv(("dist2", "direct_dist2", "relative_gap"),
                              [(dist.dist2, direct.dist2, gap)]), gap <= 1e-6


def cmd_certify(cfg):
    f = _input_function(cfg, "two_bumps", sphere=True)
    if isinstance(f, ZonalFunction) and f.axis == "p":
        # certification follows the axis-v symmetry class
        f = manifold.stereographic_lift(manifold.stereographic_pullback(f))
        if not isinstance(f, ZonalFunction):
            raise SpecError("/preset", "certification needs a zonal or radial input")
    rep = flows.certify_global(f, delta=cfg.delta, eps0=cfg.eps0, n_max=cfg.n_max,
                               descriptor=cfg.preset or cfg.spec or "")
    csv_text = rep.trace.to_csv() if rep.trace is not None else _rows_csv(
        ("branch", "measured_ratio", "certified_bound"), [(rep.branch, rep.measured_ratio, rep.certified_bound)])
    return rep.to_dict(), csv_text, rep.sound


def cmd_flow_cs(cfg):
    f = _input_function(cfg, "two_bumps", sphere=True)
    trace = flows.competing_symmetries_run(f, n_max=cfg.n_max)
    q = 2.0 * f.d / (f.d - 2.0)
    nq = np.asarray(trace.norm_q)
    g = np.asarray(trace.grad_norm)
    ok = bool(np.all(np.abs(nq - nq[0]) <= 1e-3 * nq[0]) and np.all(np.diff(g) <= 1e-6 * g[:-1]))
    payload = trace.to_dict()
    payload["q"] = q
    return payload, trace.to_csv(), ok


def _steiner_profile(seed: int) -> rearrange.LayeredFunction:
    rng = np.random.default_rng(seed)
    x = np.linspace(-4, 4, 801)
    centers = rng.uniform(-3, 3, 3)
    vals = sum(rng.uniform(0.5, 1.0) * np.exp(-((x - c) / 0.4) ** 2) for c in centers)
    return rearrange.LayeredFunction.from_samples(x, vals[:-1], max_layers=32)


def cmd_flow_steiner(cfg):
    f = _steiner_profile(cfg.seed)
    p = 2.0
    base = f.lp_norm(p)
    rows = []
    ok = True
    prev = None
    for tau in np.linspace(0.0, 3.0, 31):
        g = rearrange.continuous_1d_flow(f, float(tau))
        nrm, en = g.lp_norm(p), g.smoothed_energy(0.25)
        ok = ok and nrm == base and (prev is None or en <= prev + 1e-8)
        prev = en
        rows.append((float(tau), nrm, en))
    end = rearrange.continuous_1d_flow(f, math.inf)
    ok = ok and end.lp_distance(f.rearranged(), 1.0) == 0
    payload = {"tau": [r[0] for r in rows], "lp_norm": [r[1] for r in rows],
               "smoothed_energy": [r[2] for r in rows], "end_matches_rearrangement": ok}
    return payload, _rows_csv(("tau", "lp_norm", "smoothed_energy"), rows), ok


def cmd_local_check(cfg):
    d = cfg.d
    led = C.build_ledger(d, cfg.eps0) if d >= 6 else None
    F = manifold.preset_perturbed_optimizer(d, 0.1, 2, cfg.grid_lat)
    r = F.with_values(F.values - 1.0, signed=True)
    chk = local_deficit_check(r, cfg.eps0, led)
    payload = asdict(chk)
    return payload, _rows_csv(("lhs", "rhs", "margin", "route"),
                              [(chk.lhs, chk.rhs, chk.margin, chk.route)]), chk.margin >= 0


def cmd_spectral_gap(cfg):
    rows = [(ell, float(spectral.spectral_gap_residual(ell, cfg.d, exact=True)))
            for ell in range(2, cfg.lmax + 1)]
    ok = rows[0][1] == 0 and all(r >= 0 for _, r in rows)
    return {"d": cfg.d, "ell": [r[0] for r in rows], "residual": [r[1] for r in rows]}, \
        _rows_csv(("ell", "residual"), rows), ok


def cmd_inequality_sweeps(cfg):
    el = sweeps.elementary_sweeps(seed=cfg.seed)
    cut = sweeps.cutting_sweeps(C.build_ledger(max(cfg.d, 6), cfg.eps0))
    ok = all(v["min_residual"] >= -1e-12 for v in el.values()) and min(cut["ptw"], cut["cutting"]) >= -1e-12
    rows = [(k, v["min_residual"], v["points"]) for k, v in el.items()]
    rows += [("ptw", cut["ptw"], cut["points"]), ("cutting", cut["cutting"], cut["points"])]
    return {"elementary": el, "cutting": cut}, _rows_csv(("inequality", "min_residual", "points"), rows), ok


def cmd_logsob(cfg):
    led = C.build_ledger(6, cfg.eps0)
    _, _, bls = C.beta_values(led)
    rows = []
    ok = True
    corpus = logsob.random_corpus(cfg.count, cfg.seed) + logsob.random_corpus(cfg.count // 2, cfg.seed + 1, True)
    if cfg.spec:
        corpus = [load_function_spec(cfg.spec)]
    for i, u in enumerate(corpus):
        chk = logsob.logsob_stability_check(u, bls)
        ok = ok and chk.ok
        rows.append((i, u.N, int(u.signed), chk.deficit, chk.rhs, chk.margin,
                     chk.ratio if chk.ratio is not None else math.nan))
    eu = logsob.euclidean_logsob_check(logsob.gaussian_euclid(cfg.N), bls)
    ok = ok and eu.ok
    payload = {"beta_logsob": str(bls),
               "corpus": [dict(zip(("index", "N", "signed", "deficit", "rhs", "margin", "ratio"), r))
                          for r in rows],
               "euclidean_gaussian": eu.to_dict()}
    return payload, _rows_csv(("index", "N", "signed", "deficit", "rhs", "margin", "ratio"), rows), ok


def cmd_limits(cfg):
    zs = logsob.zd_sweep([3, 5, 10, 20, 50, 100, 200, 500])
    an = logsob.ansatz_deficit_sweep(logsob.bump_preset(), [10, 20, 40, 60, 120])
    dz = []
    for d in range(4, 13):
        lhs, rhs = logsob.limit_check_dz(d, 1, [0.7])
        dz.append((d, lhs, rhs, abs(lhs - rhs) / rhs))
    ok = zs.gap[-1] < 0.01 and an.gap[an.d.index(60)] < 0.05 and all(r[3] < 1e-6 for r in dz)
    payload = {"zd": zs.to_dict(), "ansatz": an.to_dict(),
               "dz": [dict(zip(("d", "lhs", "rhs", "gap"), r)) for r in dz]}
    return payload, zs.to_csv() + an.to_csv(), ok


def cmd_verify_all(cfg):
    results = {}
    ok = True
    quick = RunConfig("verify-all", d=cfg.d, eps0=cfg.eps0, seed=cfg.seed, count=20, lmax=60, n_max=10,
                      grid_lat=cfg.grid_lat, grid_radial=cfg.grid_radial)
    for name in ("constants", "spectral-gap", "inequality-sweeps", "flow-steiner", "logsob", "limits"):
        payload, _, good = DISPATCH[name](quick)
        results[name] = bool(good)
        ok = ok and good
    rows = [(k, int(v)) for k, v in results.items()]
    return results, _rows_csv(("check", "pass"), rows), ok


DISPATCH = {
    "constants": cmd_constants, "deficit": cmd_deficit, "dist": cmd_dist, "certify": cmd_certify,
    "flow-cs": cmd_flow_cs, "flow-steiner": cmd_flow_steiner, "local-check": cmd_local_check,
    "spectral-gap": cmd_spectral_gap, "inequality-sweeps": cmd_inequality_sweeps,
    "logsob": cmd_logsob, "limits": cmd_limits, "verify-all": cmd_verify_all,
}


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------

def _manifest(cfg: RunConfig) -> dict:
    import mpmath
    import scipy
    return {
        "package": "sobstab", "version": __version__, "python": platform.python_version(),
        "numpy": np.__version__, "scipy": scipy.__version__, "mpmath": mpmath.__version__,
        "config": asdict(cfg), "anchors": ANCHORS.get(cfg.subcommand, []),
        "tolerances": {"deficit": 1e-8, "distance_gap": 1e-6, "sweep_residual": -1e-12,
                       "logsob_margin": -1e-8, "ansatz_gap": 0.05},
    }


def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    return str(o)


def run(cfg: RunConfig) -> int:
    """Dispatch one subcommand; writes the payload and returns the exit status."""
    try:
        cfg.validate()
        payload, csv_text, ok = DISPATCH[cfg.subcommand](cfg)
    except (SpecError, FileNotFoundError, KeyError) as e:
        print(json.dumps({"error": "input", "message": str(e)}), file=sys.stderr)
        return EXIT_INPUT
    except (ArithmeticError, RuntimeError, np.linalg.LinAlgError) as e:
        print(json.dumps({"error": "numerical", "type": type(e).__name__, "message": str(e)}),
              file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, TypeError) as e:
        print(json.dumps({"error": "input", "message": str(e)}), file=sys.stderr)
        return EXIT_INPUT
    if cfg.format == "csv":
        text = csv_text
    else:
        body = payload if isinstance(payload, dict) else {"result": payload}
        text = json.dumps({"subcommand": cfg.subcommand, "anchors": ANCHORS[cfg.subcommand],
                           "pass": bool(ok), **body}, indent=2, default=_default, sort_keys=True) + "\n"
    if cfg.out:
        out = Path(cfg.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)
        Path(str(out) + ".manifest.json").write_text(
            json.dumps(_manifest(cfg), indent=2, default=_default, sort_keys=True) + "\n")
    else:
        sys.stdout.write(text)
    return EXIT_OK if ok else EXIT_VIOLATION


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sobstab", description=__doc__.splitlines()[0])
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--d", type=int, default=3, help="dimension (default 3)")
    p.add_argument("--eps0", type=float, default=1.0 / 6.0, help="epsilon_0 in (0, 1/3), default 1/6")
    p.add_argument("--delta", type=float, default=None, help="flow threshold delta (default from ledger)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid-radial", type=int, default=2048, help="radial nodes (default 2048)")
    p.add_argument("--grid-lat", type=int, default=512, help="latitude nodes (default 512)")
    p.add_argument("--preset", choices=PRESETS, default=None)
    p.add_argument("--spec", default=None, help="path to a JSON function spec")
    p.add_argument("--out", default=None, help="output file; a manifest is written next to it")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--lmax", type=int, default=200, help="largest degree for spectral-gap")
    p.add_argument("--N", type=int, default=1, help="Gaussian dimension for logsob")
    p.add_argument("--count", type=int, default=50, help="corpus size for logsob")
    p.add_argument("--n-max", type=int, default=40, help="iteration cap for flows")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = RunConfig(args.subcommand, args.d, args.eps0, args.delta, args.seed, args.grid_radial,
                    args.grid_lat, args.preset, args.spec, args.out, args.format, args.lmax, args.N,
                    args.count, args.n_max)
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
