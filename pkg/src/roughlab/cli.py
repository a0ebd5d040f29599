"""Command-line experiment runner.

Every subcommand takes its parameters from defaults, then an optional JSON
config (--config), then explicit flags, in increasing priority.  Results are
written as CSV/JSON into --out together with manifest.json; nothing is left
behind when a run fails.

Exit codes: 0 success, 2 validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import platform
import shutil
import sys
import tempfile
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np
import scipy

from . import __version__
from . import area_analysis as aa
from . import gaussian_field as gf
from . import qft_engine as qe
from . import rde_solver as rs
from . import rough_algebra as ra

WORKERS_ENV = "ROUGHLAB_WORKERS"


class ValidationError(ValueError):
    pass


@dataclass(frozen=True)
class Param:
    name: str
    kind: str  # float, int, str, bool, floats, ints
    default: object
    help: str = ""


def _floats(text):
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    return [float(x) for x in str(text).split(",") if x.strip()]


def _ints(text):
    if isinstance(text, (list, tuple)):
        return [int(x) for x in text]
    return [int(x) for x in str(text).split(",") if x.strip()]


def _bool(text):
    if isinstance(text, bool):
        return text
    s = str(text).lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _optional(conv):
    return lambda x: None if x is None or x == "" or x == "none" else conv(x)


CONVERTERS = {
    "float": float,
    "int": int,
    "str": str,
    "bool": _bool,
    "floats": _floats,
    "ints": _ints,
    "float?": _optional(float),
    "str?": _optional(str),
}


def _grid_params(xi_max=64.0, n_modes=2048):
    return [
        Param("xi_max", "float", xi_max, "largest positive frequency"),
        Param("n_modes", "int", n_modes, "number of positive modes"),
    ]


SEED = Param("seed", "int", 0, "base seed")
ALPHA = Param("alpha", "float", 0.2, "Hurst index")
MODEL = [
    Param("alpha", "float", 0.2, "Hurst index"),
    Param("lam", "float", 0.1, "coupling lambda"),
    Param("M", "float", 2.0, "dyadic scale base"),
    Param("rho", "int", 20, "ultraviolet scale index"),
    Param("K", "float?", None, "bubble constant (measured when omitted)"),
]
PATH_PARAMS = [
    Param("path_csv", "str?", None, "sampled path CSV (default: the square-corner path)"),
    Param("depth", "int", 4, "signature depth"),
]

COMMANDS = {
    "simulate": [ALPHA, Param("d", "int", 1, "components"), *_grid_params(256.0, 8192),
                 Param("t_max", "float", 1.0), Param("n_times", "int", 1025), SEED,
                 Param("tail", "bool", True, "add the sub-grid variance correction")],
    "covariance": [ALPHA, Param("times", "floats", [0.25, 0.5, 0.75, 1.0]), *_grid_params(409.6, 4096),
                   Param("replicates", "int", 0, "Monte-Carlo replicates (0: exact only)"), SEED],
    "scales": [Param("M", "float", 2.0), Param("rho", "int", 4),
               Param("xi", "floats", [0.5, 1, 2, 4, 8, 16, 32])],
    "wick": [Param("cov", "str", "[[1,0.5],[0.5,1]]", "covariance matrix as JSON"),
             Param("indices", "ints", [0, 0, 1, 1], "0-based indices")],
    "levy-area": [ALPHA, *_grid_params(64.0, 256), Param("s", "float", 0.0), Param("t", "float", 1.0),
                  Param("n_times", "int", 2049), SEED],
    "sectors": [ALPHA, *_grid_params(64.0, 256), Param("s", "float", 0.0), Param("t", "float", 1.0), SEED],
    "variance-scan": [ALPHA, Param("quantity", "str", "a_plus"), Param("control_kind", "str", "cutoff"),
                      Param("controls", "floats", [1024, 2048, 4096, 8192]),
                      Param("replicates", "int", 1000), SEED,
                      Param("spacing", "float?", None, "grid spacing (default per quantity)"),
                      Param("n_modes", "int", 0, "modes for increment scans (0: default per quantity)"),
                      Param("increment", "float", 1.0, "|t - s| for cutoff scans")],
    "holder": [Param("alpha", "float", 0.5), Param("n_points", "int", 2**14),
               Param("path_csv", "str?", None, "path CSV instead of a fresh fBm sample"), SEED],
    "signature": PATH_PARAMS,
    "chen-check": PATH_PARAMS + [Param("split", "float?", None, "split time (default: midpoint)")],
    "shuffle-check": PATH_PARAMS,
    "heisenberg": [Param("g1", "floats", [1.0, 0.0, 0.0]), Param("g2", "floats", [0.0, 1.0, 0.0])],
    "rde-solve": [Param("benchmark", "str", "rotation", "rotation or commuting"), Param("rank", "int", 2),
                  Param("n_steps", "ints", [16, 32, 64, 128])],
    "power-count": [ALPHA, Param("v_max", "int", 6)],
    "bubble": [*MODEL[:2], Param("xi", "float", 1.0),
               Param("cutoffs", "floats", [1e6, 1e7, 1e8, 1e9, 1e10]),
               Param("amputated", "bool", True)],
    "bubble-series": [*MODEL, Param("xi", "float", 1.0), Param("n_terms", "int", 0)],
    "sd-spectrum": [*MODEL, Param("xi", "float", 1.0),
                    Param("sigma", "str", "resummed", "resummed, bare, or a numeric spectrum value"),
                    Param("K_pp", "float?", None, "mixed-bubble constant K''")],
    "area-variance": [ALPHA, Param("lam", "float", 1.0), Param("taus", "floats", [0.125, 0.25, 0.5, 1.0]),
                      Param("replicates", "int", 400), SEED],
}

KIND_ALIASES = {
    "signature_check": "signature",
    "power_count_table": "power-count",
}


def _kind_to_command(kind):
    kind = str(kind)
    if kind in KIND_ALIASES:
        return KIND_ALIASES[kind]
    cmd = kind.replace("_", "-")
    if cmd not in COMMANDS:
        raise ValidationError(f"config.kind: unknown experiment kind {kind!r}")
    return cmd


# ---------------------------------------------------------------- configuration

def resolve_params(command, config: dict, flags: dict) -> dict:
    """defaults < config < flags, each value converted and reported with its parameter path."""
    spec = {p.name: p for p in COMMANDS[command]}
    unknown = sorted(set(config) - set(spec) - {"kind"})
    if unknown:
        raise ValidationError(f"config.{unknown[0]}: unknown parameter for {command}")
    out = {}
    for name, p in spec.items():
        if name in flags:
            raw, where = flags[name], f"--{name.replace('_', '-')}"
        elif name in config:
            raw, where = config[name], f"config.{name}"
        else:
            out[name] = p.default
            continue
        try:
            out[name] = CONVERTERS[p.kind](raw)
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"{where}: {exc}") from None
    return out


def _check(path, fn, *args):
    try:
        return fn(*args)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{path}: {exc}") from None


def _positive(path, x):
    if not x > 0:
        raise ValidationError(f"{path}: must be positive, got {x}")


def _grid(p, path="config"):
    _positive(f"{path}.xi_max", p["xi_max"])
    if p["n_modes"] < 1:
        raise ValidationError(f"{path}.n_modes: must be at least 1")
    return gf.FrequencyGrid(p["xi_max"], p["n_modes"])


def _model(p):
    params = _check("config.alpha", qe.ModelParams, p["alpha"], p["lam"], p["M"], p["rho"])
    _check("config.alpha", params.require_window)
    if p["K"] is not None:
        _positive("config.K", p["K"])
    return params


def _load_path(p):
    if p["path_csv"] is None:
        return gf.SamplePath(np.array([0.0, 1.0, 2.0]), np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]]))
    if not os.path.exists(p["path_csv"]):
        raise ValidationError(f"config.path_csv: no such file {p['path_csv']}")
    return _check("config.path_csv", gf.SamplePath.from_csv, p["path_csv"])


def validate(command, p):
    """Check every parameter against the owning module's preconditions; returns prepared objects."""
    prep = {}
    if "alpha" in p and command not in ("bubble-series", "sd-spectrum"):
        upper = {"area-variance": 0.5, "bubble": 0.25}.get(command, 1.0)
        _check("config.alpha", gf.check_alpha, p["alpha"], 0.0, upper)
    if command == "simulate":
        prep["grid"] = _grid(p)
        if p["d"] < 1:
            raise ValidationError("config.d: must be at least 1")
        _positive("config.t_max", p["t_max"])
        if p["n_times"] < 2:
            raise ValidationError("config.n_times: need at least 2")
    elif command == "covariance":
        prep["grid"] = _grid(p)
        if not p["times"] or any(t < 0 for t in p["times"]):
            raise ValidationError("config.times: need non-negative times")
        if p["replicates"] < 0:
            raise ValidationError("config.replicates: must be non-negative")
    elif command == "scales":
        prep["cutoff"] = _check("config.M", gf.CutoffSpec, p["M"], p["rho"])
    elif command == "wick":
        cov = _check("config.cov", lambda s: np.asarray(json.loads(s), dtype=np.float64), p["cov"])
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
            raise ValidationError("config.cov: must be a square matrix")
        if any(not 0 <= i < cov.shape[0] for i in p["indices"]):
            raise ValidationError("config.indices: index outside the covariance matrix")
        if len(p["indices"]) % 2 or len(p["indices"]) > 12:
            raise ValidationError("config.indices: need an even count of at most 12")
        prep["cov"] = cov
    elif command in ("levy-area", "sectors"):
        prep["grid"] = _grid(p)
        _check("config.n_modes", aa._pair_modes_ok, prep["grid"])
        if not p["s"] < p["t"]:
            raise ValidationError("config.t: need s < t")
        if command == "levy-area" and p["n_times"] < 3:
            raise ValidationError("config.n_times: need at least 3")
    elif command == "variance-scan":
        if p["quantity"] not in aa.QUANTITIES:
            raise ValidationError(f"config.quantity: must be one of {aa.QUANTITIES}")
        if p["control_kind"] not in ("cutoff", "increment"):
            raise ValidationError("config.control_kind: must be 'cutoff' or 'increment'")
        if p["replicates"] < 100:
            raise ValidationError("config.replicates: need at least 100")
        c = p["controls"]
        if len(c) < 3 or any(b <= a for a, b in zip(c, c[1:])) or c[0] <= 0:
            raise ValidationError("config.controls: need at least three positive increasing values")
        base = aa.default_scan_grid(p["quantity"])
        h = p["spacing"] if p["spacing"] is not None else base.spacing
        _positive("config.spacing", h)
        if p["control_kind"] == "cutoff":
            n = [round(x / h) for x in c]
            if any(k < 1 or abs(k * h - x) > 1e-9 * x for k, x in zip(n, c)):
                raise ValidationError("config.controls: cutoffs must be multiples of the grid spacing")
            if p["quantity"] in ("a_plus", "a_minus") and max(n) > aa.MAX_PAIR_MODES:
                raise ValidationError(f"config.controls: sector sums are capped at {aa.MAX_PAIR_MODES} modes")
            prep["grid"] = gf.FrequencyGrid.from_spacing(h, max(n))
        else:
            n_modes = p["n_modes"] or base.n_modes
            prep["grid"] = gf.FrequencyGrid.from_spacing(h, n_modes)
            if p["quantity"] in ("a_plus", "a_minus"):
                _check("config.n_modes", aa._pair_modes_ok, prep["grid"])
    elif command == "holder":
        if p["path_csv"] is None and p["n_points"] < 64:
            raise ValidationError("config.n_points: need at least 64")
        if p["path_csv"] is not None:
            prep["path"] = _load_path(p)
    elif command in ("signature", "chen-check", "shuffle-check"):
        if not 1 <= p["depth"] <= ra.MAX_DEPTH:
            raise ValidationError(f"config.depth: must be in 1..{ra.MAX_DEPTH}")
        if command == "shuffle-check" and p["depth"] < 2:
            raise ValidationError("config.depth: shuffle identities need depth >= 2")
        path = _load_path(p)
        prep["path"] = path
        if command == "chen-check":
            u = p["split"] if p["split"] is not None else 0.5 * (path.times[0] + path.times[-1])
            if not path.times[0] < u < path.times[-1]:
                raise ValidationError("config.split: must lie strictly inside the time range")
            prep["split"] = u
    elif command == "heisenberg":
        for key in ("g1", "g2"):
            if len(p[key]) != 3:
                raise ValidationError(f"config.{key}: need three coordinates x,y,z")
    elif command == "rde-solve":
        if p["benchmark"] not in ("rotation", "commuting"):
            raise ValidationError("config.benchmark: must be 'rotation' or 'commuting'")
        if not 1 <= p["rank"] <= rs.MAX_RANK:
            raise ValidationError(f"config.rank: must be in 1..{rs.MAX_RANK}")
        if not p["n_steps"] or min(p["n_steps"]) < 1:
            raise ValidationError("config.n_steps: need positive step counts")
    elif command == "power-count":
        if not 1 <= p["v_max"] <= 8:
            raise ValidationError("config.v_max: must be in 1..8")
    elif command == "bubble":
        _positive("config.lam", p["lam"])
        if p["xi"] == 0:
            raise ValidationError("config.xi: must be non-zero")
        if len(p["cutoffs"]) < 2 or min(p["cutoffs"]) <= abs(p["xi"]):
            raise ValidationError("config.cutoffs: need at least two cutoffs above |xi|")
    elif command in ("bubble-series", "sd-spectrum"):
        prep["params"] = _model(p)
        if p["xi"] == 0:
            raise ValidationError("config.xi: must be non-zero")
        if command == "bubble-series":
            if abs(p["xi"]) > prep["params"].cutoff:
                raise ValidationError("config.xi: need |xi| <= M^rho")
            if p["n_terms"] < 0:
                raise ValidationError("config.n_terms: must be non-negative")
        else:
            if p["sigma"] not in ("resummed", "bare"):
                value = _check("config.sigma", float, p["sigma"])
                if value < 0:
                    raise ValidationError("config.sigma: spectrum value must be non-negative")
            if p["K_pp"] is not None:
                _positive("config.K_pp", p["K_pp"])
    elif command == "area-variance":
        _positive("config.lam", p["lam"])
        if len(p["taus"]) < 2 or min(p["taus"]) <= 0:
            raise ValidationError("config.taus: need at least two positive increments")
        if p["replicates"] < 2:
            raise ValidationError("config.replicates: need at least 2")
    return prep


# ---------------------------------------------------------------- output helpers

def _csv(header, rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(x) for x in row))
    return "\n".join(lines) + "\n"


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return repr(float(x))


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if hasattr(x, "numerator") and hasattr(x, "denominator") and not isinstance(x, (int, float)):
        return str(x)
    return x


def _dumps(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _require_finite(obj, path="result"):
    if isinstance(obj, dict):
        for k, v in obj.items():
            _require_finite(v, f"{path}.{k}")
    elif isinstance(obj, (list, tuple)):
        for k, v in enumerate(obj):
            _require_finite(v, f"{path}[{k}]")
    elif isinstance(obj, (float, np.floating)) and not math.isfinite(obj):
        raise FloatingPointError(f"{path} is not finite")


def _workers():
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValidationError(f"{WORKERS_ENV}: not an integer: {raw!r}") from None
    if n < 1:
        raise ValidationError(f"{WORKERS_ENV}: must be at least 1")
    return n


def _K(p):
    return p["K"] if p["K"] is not None else qe.measure_bubble_constant(p["alpha"])


# ---------------------------------------------------------------- handlers
# each returns (summary dict, {filename: text})

def do_simulate(p, prep):
    noise = gf.sample_spectral_noise(prep["grid"], p["d"], p["seed"])
    times = np.linspace(0.0, p["t_max"], p["n_times"])
    path = gf.fbm_from_spectrum(noise, times, p["alpha"], tail=p["tail"])
    with tempfile.NamedTemporaryFile("r+", suffix=".csv") as fh:
        path.to_csv(fh.name)
        text = open(fh.name).read()
    summary = {"n_times": p["n_times"], "d": p["d"], "final_value": path.values[-1].tolist()}
    return summary, {"path.csv": text, "noise.json": noise.to_json() + "\n"}


def do_covariance(p, prep):
    times = p["times"]
    rows = []
    emp = None
    if p["replicates"] > 0:
        seeds = range(p["seed"], p["seed"] + p["replicates"])
        vals = gf.fbm_increment_batch(prep["grid"], seeds, p["alpha"], [0.0] + list(times), tail=True)[:, 1:]
        emp = vals.T @ vals / vals.shape[0]
    for i, s in enumerate(times):
        for j, t in enumerate(times):
            row = [s, t, gf.fbm_covariance(s, t, p["alpha"])]
            if emp is not None:
                row.append(emp[i, j])
            rows.append(row)
    header = ["s", "t", "exact"] + (["empirical"] if emp is not None else [])
    summary = {"entries": len(rows)}
    if emp is not None:
        summary["max_abs_deviation"] = max(abs(r[3] - r[2]) for r in rows)
    return summary, {"covariance.csv": _csv(header, rows)}


def do_scales(p, prep):
    cut = prep["cutoff"]
    xi = np.asarray(p["xi"], dtype=np.float64)
    cols = [cut.slice_multiplier(j, xi) for j in range(cut.rho + 1)]
    total = cut.total_multiplier(xi)
    rows = [[x, *(c[k] for c in cols), total[k], sum(c[k] for c in cols) - total[k]] for k, x in enumerate(xi)]
    header = ["xi"] + [f"chi_{j}" for j in range(cut.rho + 1)] + ["total", "telescoping_defect"]
    summary = {"M": cut.M, "rho": cut.rho, "chi0_support": cut.chi0_support,
               "chi1_support": list(cut.chi1_support),
               "max_telescoping_defect": max(abs(r[-1]) for r in rows)}
    return summary, {"scales.csv": _csv(header, rows)}


def do_wick(p, prep):
    value = gf.wick_moment(prep["cov"], p["indices"])
    return {"moment": value, "pairings": gf.pairing_count(len(p["indices"]))}, {}


def _pair_noise(p, prep):
    return gf.sample_spectral_noise(prep["grid"], 2, p["seed"])


def do_levy_area(p, prep):
    noise = _pair_noise(p, prep)
    times = np.linspace(p["s"], p["t"], p["n_times"])
    path = gf.fbm_from_spectrum(noise, times, p["alpha"])
    discrete = aa.levy_area_discrete(path, p["s"], p["t"])
    dec = aa.levy_area_decomposition(noise, p["s"], p["t"], p["alpha"])
    summary = {"discrete": discrete, "reconstructed": dec.reconstruct(),
               "discrepancy": abs(discrete - dec.reconstruct()),
               "a_plus_increment": dec.a_plus_increment, "a_minus_increment": dec.a_minus_increment,
               "boundary": dec.boundary}
    return summary, {}


def do_sectors(p, prep):
    noise = _pair_noise(p, prep)
    n1, n2 = noise.component(0), noise.component(1)
    a = p["alpha"]
    summary = {
        "skeleton_plus_t": aa.skeleton_area_sector(n1, n2, "plus", p["t"], a),
        "skeleton_minus_t": aa.skeleton_area_sector(n1, n2, "minus", p["t"], a),
        "a_plus_increment": aa.sector_increment(n1, n2, "plus", p["s"], p["t"], a),
        "a_minus_increment": aa.sector_increment(n1, n2, "minus", p["s"], p["t"], a),
        "boundary": aa.boundary_term(n1, n2, p["s"], p["t"], a),
        "ordered_area": aa.ordered_area_spectral(n1, n2, p["s"], p["t"], a),
    }
    return summary, {}


def do_variance_scan(p, prep):
    res = aa.variance_scan(p["quantity"], p["alpha"], p["controls"], p["control_kind"], p["replicates"],
                           p["seed"], grid=prep["grid"], increment=p["increment"], workers=_workers())
    rows = [list(pt) for pt in res.points]
    summary = {"fitted_exponent": res.fitted_exponent, "fit_stderr": res.fit_stderr,
               "r_squared": res.r_squared}
    return summary, {"scan.csv": _csv(["control", "estimate", "mc_error"], rows),
                     "scan.json": _dumps(res.sidecar())}


def do_holder(p, prep):
    if "path" in prep:
        path = prep["path"]
    else:
        n = p["n_points"]
        dt = 1.0 / (n - 1)
        grid = gf.FrequencyGrid(math.pi / dt, n)
        noise = gf.sample_spectral_noise(grid, 1, p["seed"])
        path = gf.fbm_from_spectrum(noise, np.linspace(0.0, 1.0, n), p["alpha"], tail=True)
    return {"holder_estimate": aa.holder_exponent_estimate(path)}, {}


def do_signature(p, prep):
    path = prep["path"]
    sig = ra.signature(path, p["depth"])
    u = 0.5 * (path.times[0] + path.times[-1])
    left = ra.signature_of_points(ra.restrict(path, path.times[0], u), p["depth"])
    right = ra.signature_of_points(ra.restrict(path, u, path.times[-1]), p["depth"])
    chen = (sig - ra.chen_product(left, right)).max_abs(1)
    summary = {"chen_violation": chen,
               "shuffle_violation": ra.check_shuffle(sig) if p["depth"] >= 2 else 0.0}
    return summary, {"signature.json": sig.to_json() + "\n"}


def do_chen_check(p, prep):
    path, u = prep["path"], prep["split"]
    whole = ra.signature(path, p["depth"])
    left = ra.signature_of_points(ra.restrict(path, path.times[0], u), p["depth"])
    right = ra.signature_of_points(ra.restrict(path, u, path.times[-1]), p["depth"])
    return {"split": u, "chen_violation": (whole - ra.chen_product(left, right)).max_abs(1)}, {}


def do_shuffle_check(p, prep):
    return {"shuffle_violation": ra.check_shuffle(ra.signature(prep["path"], p["depth"]))}, {}


def do_heisenberg(p, prep):
    g1, g2 = ra.HeisenbergElement(*p["g1"]), ra.HeisenbergElement(*p["g2"])
    prod = ra.heisenberg_product(g1, g2)
    via = ra.heisenberg_from_signature(
        ra.chen_product(ra.heisenberg_to_signature(g1), ra.heisenberg_to_signature(g2)))
    defect = max(abs(a - b) for a, b in zip(prod.as_tuple(), via.as_tuple()))
    return {"product": list(prod.as_tuple()), "intertwining_defect": defect}, {}


def _rotation_benchmark():
    Lx, Ly, _ = rs.rotation_generators()
    vfs = rs.VectorFieldSystem.linear([Lx, Ly])
    xdot = lambda u: np.array([1.0, math.cos(u)])  # noqa: E731
    y0 = np.array([1.0, 0.2, -0.3])
    return vfs, xdot, y0


def do_rde_solve(p, prep):
    rank = p["rank"]
    if p["benchmark"] == "rotation":
        vfs, xdot, y0 = _rotation_benchmark()
        exact = rs.reference_solution(vfs, xdot, 0.0, 1.0, y0)
    else:
        D1, D2 = np.diag([0.3, -0.5, 0.1]), np.diag([-0.2, 0.4, 0.7])
        vfs = rs.VectorFieldSystem.linear([D1, D2])
        xdot = lambda u: np.array([math.cos(3 * u), 1.0 + u])  # noqa: E731
        y0 = np.array([1.0, -1.0, 0.5])
        x1 = np.array([math.sin(3.0) / 3.0, 1.5])
        exact = np.exp(np.diag(D1) * x1[0] + np.diag(D2) * x1[1]) * y0
    driver = rs.Driver.from_smooth(xdot, 2, max(rank, 2))
    errors, order = rs.convergence_order(vfs, driver, exact, 0.0, 1.0, y0, rank, p["n_steps"])
    traj = rs.solve(vfs, driver, np.linspace(0.0, 1.0, p["n_steps"][-1] + 1), y0, rank)
    rows = [[n, e] for n, e in zip(p["n_steps"], errors)]
    header = ["t"] + [f"y_{i + 1}" for i in range(traj.states.shape[1])]
    traj_rows = [[t, *y] for t, y in zip(traj.times, traj.states)]
    summary = {"order": order if len(errors) > 1 else None, "errors": errors, "exact": exact.tolist()}
    return summary, {"convergence.csv": _csv(["n_steps", "error"], rows),
                     "trajectory.csv": _csv(header, traj_rows)}


def do_power_count(p, prep):
    table = qe.enumerate_leg_structures(p["v_max"], qe.exact_alpha(p["alpha"]))
    rows = [[s.legs.n_sigma, s.legs.n_phi, s.legs.n_dphi, str(s.degree), s.divergent] for s in table]
    divergent = [list(s.legs.as_tuple()) for s in table if s.divergent]
    diagrams = {"bubble": qe.bubble_diagram().to_dict(), "double_bubble": qe.double_bubble_diagram().to_dict()}
    summary = {"structures": len(rows), "divergent": divergent}
    return summary, {"degrees.csv": _csv(["n_sigma", "n_phi", "n_dphi", "degree", "divergent_flag"], rows),
                     "diagrams.json": _dumps(diagrams)}


def do_bubble(p, prep):
    params = qe.ModelParams(p["alpha"], p["lam"])
    vals = [qe.bubble_integral(p["xi"], c, params, amputated=p["amputated"]) for c in p["cutoffs"]]
    slope, stderr, _ = aa.fit_power_law([(c, -v) for c, v in zip(p["cutoffs"], vals)])
    summary = {"fitted_cutoff_exponent": slope, "fit_stderr": stderr, "expected": 1 - 4 * p["alpha"],
               "K_measured": qe.measure_bubble_constant(p["alpha"])}
    return summary, {"bubble.csv": _csv(["cutoff", "value"], zip(p["cutoffs"], vals))}


def do_bubble_series(p, prep):
    params, K = prep["params"], _K(p)
    value = qe.bubble_series_sum(p["xi"], params, K)
    summary = {"value": value, "K": K, "ratio": qe.bubble_ratio(p["xi"], params, K),
               "limit": abs(p["xi"]) ** params.beta / params.lam**2}
    files = {}
    if p["n_terms"]:
        partial = qe.bubble_series_partial_sums(p["xi"], params, K, p["n_terms"])
        files["partial_sums.csv"] = _csv(["n_terms", "partial_sum"], zip(range(1, p["n_terms"] + 1), partial))
    return summary, files


def do_sd_spectrum(p, prep):
    params, K = prep["params"], _K(p)
    if p["sigma"] == "resummed":
        sigma = qe.resummed_sigma_spectrum(p["xi"], params, K)
    elif p["sigma"] == "bare":
        sigma = abs(p["xi"]) ** -params.beta
    else:
        sigma = float(p["sigma"])
    value = qe.schwinger_dyson_area_spectrum(sigma, p["xi"], params)
    summary = {"sigma_spectrum": sigma, "area_spectrum": value, "K": K,
               "free_limit": abs(p["xi"]) ** params.beta / params.lam**2}
    if p["K_pp"] is not None:
        summary["mixed_spectrum"] = qe.mixed_area_spectrum(p["xi"], params, p["K_pp"], K)
    return summary, {}


def do_area_variance(p, prep):
    params = qe.ModelParams(p["alpha"], p["lam"])
    rows = []
    for tau in p["taus"]:
        part = qe.interacting_area_variance_parts(0.0, tau, params, p["replicates"], p["seed"])
        rows.append([tau, part.quadrature_part, part.boundary_part, part.boundary_error, part.total])
    quad_slope, _, _ = aa.fit_power_law([(r[0], r[1]) for r in rows])
    total_slope, _, _ = aa.fit_power_law([(r[0], r[4]) for r in rows])
    summary = {"quadrature_exponent": quad_slope, "total_exponent": total_slope,
               "expected": 4 * p["alpha"], "K1": qe.area_kernel_integral(1.0, p["alpha"])}
    header = ["tau", "quadrature", "boundary", "boundary_mc_error", "total"]
    return summary, {"area_variance.csv": _csv(header, rows)}


HANDLERS = {
    "simulate": do_simulate, "covariance": do_covariance, "scales": do_scales, "wick": do_wick,
    "levy-area": do_levy_area, "sectors": do_sectors, "variance-scan": do_variance_scan,
    "holder": do_holder, "signature": do_signature, "chen-check": do_chen_check,
    "shuffle-check": do_shuffle_check, "heisenberg": do_heisenberg, "rde-solve": do_rde_solve,
    "power-count": do_power_count, "bubble": do_bubble, "bubble-series": do_bubble_series,
    "sd-spectrum": do_sd_spectrum, "area-variance": do_area_variance,
}

SEEDED = {"simulate", "covariance", "levy-area", "sectors", "variance-scan", "holder", "area-variance"}


# ---------------------------------------------------------------- driver

def _write_outputs(out_dir, files):
    """Write into a scratch directory next to out_dir, then move the files in place."""
    parent = os.path.dirname(os.path.abspath(out_dir)) or "."
    os.makedirs(parent, exist_ok=True)
    scratch = tempfile.mkdtemp(prefix=".roughlab-", dir=parent)
    try:
        for name, text in files.items():
            with open(os.path.join(scratch, name), "w") as fh:
                fh.write(text)
        os.makedirs(out_dir, exist_ok=True)
        for name in files:
            os.replace(os.path.join(scratch, name), os.path.join(out_dir, name))
    finally:
        shutil.rmtree(scratch, ignore_errors=True)


def execute(command, params, out_dir=None, dry_run=False, stdout=None):
    stdout = stdout or sys.stdout
    prep = validate(command, params)
    config_text = json.dumps(_jsonable({"command": command, "params": params}), sort_keys=True)
    if dry_run:
        stdout.write(_dumps({"command": command, "params": params, "status": "valid"}))
        return 0
    summary, files = HANDLERS[command](params, prep)
    _require_finite(summary)
    result = {"command": command, "params": params, "summary": summary}
    files = dict(files)
    files["result.json"] = _dumps(result)
    if out_dir is not None:
        manifest = {
            "command": command,
            "config": params,
            "config_sha256": hashlib.sha256(config_text.encode()).hexdigest(),
            "seeds": {"base_seed": params["seed"]} if command in SEEDED else {},
            "versions": {"roughlab": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                         "python": platform.python_version()},
            "files": {name: hashlib.sha256(text.encode()).hexdigest() for name, text in sorted(files.items())},
        }
        text = _dumps(manifest)
        stamped = json.loads(text)
        stamped["timestamp"] = datetime.now(timezone.utc).isoformat()
        files["manifest.json"] = json.dumps(stamped, indent=2, sort_keys=True) + "\n"
        _write_outputs(out_dir, files)
    stdout.write(_dumps(summary))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="roughlab", description="Rough-path and Lévy-area experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, params in COMMANDS.items():
        sp = sub.add_parser(name)
        _common(sp)
        for p in params:
            sp.add_argument(f"--{p.name.replace('_', '-')}", dest=p.name, default=argparse.SUPPRESS,
                            help=f"{p.help} (default: {p.default})".strip())
    run = sub.add_parser("run", help="run the experiment described by a JSON config (key 'kind')")
    run.add_argument("config_file")
    run.add_argument("--out", default=None)
    run.add_argument("--dry-run", action="store_true")
    return parser


def _common(sp):
    sp.add_argument("--config", default=None, help="JSON config file")
    sp.add_argument("--out", default=None, help="output directory")
    sp.add_argument("--dry-run", action="store_true", help="validate only")


def _read_config(path):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"config: cannot read {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise ValidationError("config: top level must be a JSON object")
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            config = _read_config(args.config_file)
            if "kind" not in config:
                raise ValidationError("config.kind: missing")
            command = _kind_to_command(config["kind"])
            flags = {}
            out = args.out if args.out is not None else config.get("out")
            config = {k: v for k, v in config.items() if k != "out"}
        else:
            command = args.command
            config = _read_config(args.config)
            if "kind" in config and _kind_to_command(config["kind"]) != command:
                raise ValidationError(f"config.kind: {config['kind']!r} does not match subcommand {command}")
            out = args.out if args.out is not None else config.pop("out", None)
            config.pop("out", None)
            reserved = {"command", "config", "out", "dry_run"}
            flags = {k: v for k, v in vars(args).items() if k not in reserved}
        params = resolve_params(command, config, flags)
        return execute(command, params, out, args.dry_run)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FloatingPointError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
