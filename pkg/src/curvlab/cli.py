"""Command-line front end.

Subcommands: simulate, curvature, action, dynamics, noether, ingest.  All
outputs are written atomically (temp file + rename) with 17 significant
digits, accompanied by a manifest recording the command, the config hash and
the seed so that a rerun is byte-identical.  Exit codes: 0 success, 2 invalid
input, 3 runtime failure, 4 mathematical precondition violated.

Config files are INI-style; unknown sections or keys are rejected.  The
downstream commands (curvature, action, noether) take the output directory of
a previous `simulate` run and rebuild the market bit-exactly from the config
copy and seed stored there.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import json
import os
import sys
import tempfile
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import __version__
from .action import (Strategy, arbitrage_action, classify_arbitrage)
from .dynamics import (PerturbationSpec, euler_lagrange_residual,
                       noether_integrals, solve_arbitrage_dynamics,
                       solve_noarb_dynamics)
from .gauges import Gauge
from .geometry import MarketModel, nflvr_report
from .marketsim import (ItoModel, build_market, calibrate_arbitrage_free,
                        inject_arbitrage)
from .paths import PathEnsemble, TimeGrid

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_RUNTIME = 3
EXIT_MATH = 4


class InputError(Exception):
    pass


class MathError(Exception):
    pass


def _fmt(v) -> str:
    return f"{float(v):.17g}"


def _threads() -> Optional[int]:
    raw = os.environ.get("CURVLAB_THREADS")
    if raw is None:
        return None
    try:
        n = int(raw)
        if n < 1:
            raise ValueError
    except ValueError:
        raise InputError("CURVLAB_THREADS must be a positive integer")
    return n


# ---------------------------------------------------------------------------
# atomic output helpers


def _atomic_write(path: str, write_fn):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".",
                               prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            write_fn(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_csv(path: str, header: list, rows):
    def go(fh):
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow(row)
    _atomic_write(path, go)


def _write_json(path: str, obj):
    _atomic_write(path, lambda fh: json.dump(obj, fh, indent=2, sort_keys=True))


def _sha256_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out_dir: str, command: str, config_path: Optional[str],
                    seed: Optional[int], files: list):
    manifest = {
        "command": command,
        "config_sha256": _sha256_file(config_path) if config_path else None,
        "seed": seed,
        "threads": _threads(),
        "version": __version__,
        "outputs": {os.path.basename(f): _sha256_file(f) for f in files},
    }
    _write_json(os.path.join(out_dir, "manifest.json"), manifest)


# ---------------------------------------------------------------------------
# config parsing (strict)


_SECTION_KEYS = {
    "grid": {"t0", "t1", "dt"},
    "mc": {"n_scenarios", "seed"},
    "assets": {"count"},
    "maturities": {"h_max", "dh"},
    "calibration": {"enabled"},
    "bump": {"asset", "delta"},
    "output": {"term_structure"},
    "curvature": {"mode", "threshold", "n_random", "seed"},
    "dynamics": {"branch", "x0", "d0", "d0_prime", "r0", "t0", "t1", "dt",
                 "n_scenarios", "seed", "scale_x", "scale_deflator",
                 "scale_rate", "mode"},
    "ingest": {"window", "tolerance_factor"},
}
_ASSET_KEYS = {"alpha", "sigma", "a", "b", "s0", "r0"}


@dataclass
class RunConfig:
    """Parsed simulation configuration."""

    grid: TimeGrid
    n_scenarios: int
    seed: int
    model: ItoModel
    calibrate: bool
    bump_asset: Optional[int]
    bump_delta: float
    maturities: np.ndarray
    ts_output: str


def _read_config(path: str) -> configparser.ConfigParser:
    if not os.path.isfile(path):
        raise InputError(f"config file not found: {path}")
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except configparser.Error as exc:
        raise InputError(f"malformed config: {exc}")
    for section in cp.sections():
        if section.startswith("asset."):
            allowed = _ASSET_KEYS
        elif section in _SECTION_KEYS:
            allowed = _SECTION_KEYS[section]
        else:
            raise InputError(f"unknown config section [{section}]")
        for key in cp[section]:
            if key not in allowed:
                raise InputError(f"unknown key {key!r} in section [{section}]")
    return cp


def _getf(cp, section, key, default=None) -> float:
    try:
        if default is not None and not cp.has_option(section, key):
            return default
        return cp.getfloat(section, key)
    except (configparser.Error, ValueError):
        raise InputError(f"invalid or missing number {section}.{key}")


def _geti(cp, section, key, default=None) -> int:
    v = _getf(cp, section, key, default)
    if v != int(v):
        raise InputError(f"{section}.{key} must be an integer")
    return int(v)


def _vector(cp, section, key) -> np.ndarray:
    try:
        return np.array([float(tok) for tok in cp.get(section, key).split()])
    except (configparser.Error, ValueError):
        raise InputError(f"invalid or missing vector {section}.{key}")


def parse_run_config(path: str) -> RunConfig:
    cp = _read_config(path)
    for required in ("grid", "mc", "assets"):
        if not cp.has_section(required):
            raise InputError(f"config is missing the [{required}] section")
    t0, t1, dt = (_getf(cp, "grid", k) for k in ("t0", "t1", "dt"))
    if not (t1 > t0 and dt > 0):
        raise InputError("grid must satisfy t1 > t0 and dt > 0")
    n_steps = round((t1 - t0) / dt)
    if abs(n_steps * dt - (t1 - t0)) > 1e-9:
        raise InputError("dt must divide t1 - t0")
    grid = TimeGrid(t0 + dt * np.arange(n_steps + 1))
    count = _geti(cp, "assets", "count")
    if count < 1:
        raise InputError("assets.count must be >= 1")
    rows = {k: [] for k in _ASSET_KEYS}
    for j in range(1, count + 1):
        sec = f"asset.{j}"
        if not cp.has_section(sec):
            raise InputError(f"missing section [{sec}]")
        for k in ("alpha", "a", "s0", "r0"):
            rows[k].append(_getf(cp, sec, k))
        for k in ("sigma", "b"):
            rows[k].append(_vector(cp, sec, k))
    try:
        model = ItoModel(alpha=np.array(rows["alpha"]),
                         sigma=np.array(rows["sigma"]),
                         a=np.array(rows["a"]), b=np.array(rows["b"]),
                         s0=np.array(rows["s0"]), r0=np.array(rows["r0"]))
    except ValueError as exc:
        raise InputError(str(exc))
    calibrate = cp.getboolean("calibration", "enabled", fallback=False)
    bump_asset, bump_delta = None, 0.0
    if cp.has_section("bump"):
        bump_asset = _geti(cp, "bump", "asset") - 1
        bump_delta = _getf(cp, "bump", "delta")
        if not (0 <= bump_asset < count):
            raise InputError("bump.asset out of range (1-based)")
    h_max = _getf(cp, "maturities", "h_max", 5.0) if cp.has_section("maturities") else 5.0
    dh = _getf(cp, "maturities", "dh", 0.25) if cp.has_section("maturities") else 0.25
    maturities = np.arange(0.0, h_max + dh / 2, dh)
    ts_output = cp.get("output", "term_structure", fallback="first")
    if ts_output not in ("none", "first", "all"):
        raise InputError("output.term_structure must be none|first|all")
    return RunConfig(grid=grid, n_scenarios=_geti(cp, "mc", "n_scenarios"),
                     seed=_geti(cp, "mc", "seed"), model=model,
                     calibrate=calibrate, bump_asset=bump_asset,
                     bump_delta=bump_delta, maturities=maturities,
                     ts_output=ts_output)


def _materialize(cfg: RunConfig, seed: Optional[int] = None):
    """Build (market, beta, calibration) from a run config."""
    seed = cfg.seed if seed is None else seed
    model = cfg.model
    beta = None
    if cfg.calibrate:
        cal = calibrate_arbitrage_free(model, cfg.grid, cfg.n_scenarios, seed,
                                       maturities=cfg.maturities)
        model, beta = cal.model, cal.beta
        if cfg.bump_asset is not None and cfg.bump_delta != 0.0:
            model = inject_arbitrage(model, cfg.bump_asset, cfg.bump_delta)
            market = build_market(model, cfg.grid, cfg.n_scenarios, seed,
                                  maturities=cfg.maturities)
            return market, beta
        return cal.market, beta
    if cfg.bump_asset is not None and cfg.bump_delta != 0.0:
        model = inject_arbitrage(model, cfg.bump_asset, cfg.bump_delta)
    market = build_market(model, cfg.grid, cfg.n_scenarios, seed,
                          maturities=cfg.maturities)
    return market, beta


def _load_market_dir(market_dir: str):
    """Rebuild the market of a previous `simulate` run bit-exactly."""
    cfg_path = os.path.join(market_dir, "config.ini")
    man_path = os.path.join(market_dir, "manifest.json")
    if not (os.path.isfile(cfg_path) and os.path.isfile(man_path)):
        raise InputError(f"{market_dir} is not a simulate output directory "
                         "(missing config.ini or manifest.json)")
    with open(man_path) as fh:
        manifest = json.load(fh)
    cfg = parse_run_config(cfg_path)
    market, beta = _materialize(cfg, seed=manifest.get("seed"))
    return cfg, market, beta


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args) -> int:
    cfg = parse_run_config(args.config)
    seed = args.seed if args.seed is not None else cfg.seed
    market, beta = _materialize(cfg, seed=seed)
    out = args.out
    os.makedirs(out, exist_ok=True)
    files = []
    t = market.grid.times
    D = market.deflators
    path = os.path.join(out, "deflators.csv")
    _write_csv(path, ["scenario", "t", "asset", "value"],
               ((s, _fmt(t[k]), j + 1, _fmt(D[s, k, j]))
                for s in range(market.n_scenarios)
                for k in range(t.size)
                for j in range(market.n_assets)))
    files.append(path)
    path = os.path.join(out, "short_rates.csv")
    _write_csv(path, ["scenario", "t", "asset", "value"],
               ((s, _fmt(t[k]), j + 1, _fmt(market.short_rates[s, k, j]))
                for s in range(market.n_scenarios)
                for k in range(t.size)
                for j in range(market.n_assets)))
    files.append(path)
    if cfg.ts_output != "none":
        ks = [0] if cfg.ts_output == "first" else range(t.size)
        path = os.path.join(out, "term_structure.csv")
        _write_csv(path, ["scenario", "t", "offset", "asset", "value"],
                   ((s, _fmt(t[k]), _fmt(g.offsets[m]), j + 1,
                     _fmt(g.surface[s, k, m]))
                    for j, g in enumerate(market.gauges)
                    for s in range(market.n_scenarios)
                    for k in ks
                    for m in range(g.offsets.size)))
        files.append(path)
    if beta is not None:
        path = os.path.join(out, "beta.csv")
        _write_csv(path, ["scenario", "t", "value"],
                   ((s, _fmt(t[k]), _fmt(beta.paths.values[s, k]))
                    for s in range(market.n_scenarios)
                    for k in range(t.size)))
        files.append(path)
    # keep a verbatim config copy so downstream commands can rebuild
    with open(args.config, "rb") as fh:
        raw = fh.read()
    cfg_copy = os.path.join(out, "config.ini")
    _atomic_write(cfg_copy, lambda f: f.write(raw.decode()))
    files.append(cfg_copy)
    _write_manifest(out, "simulate", args.config, seed, files)
    return EXIT_OK


def cmd_curvature(args) -> int:
    cfg, market, beta = _load_market_dir(args.market)
    betas = (beta,) if beta is not None else ()
    report = nflvr_report(market, beta_candidates=betas,
                          threshold=args.tol, seed=args.seed,
                          n_random=args.n_random)
    out = args.out
    os.makedirs(out, exist_ok=True)
    files = []
    path = os.path.join(out, "curvature.csv")
    xs = report["portfolios"]
    _write_csv(path, ["portfolio", "asset", "mean_rho", "stderr"],
               ((p, j + 1, _fmt(report["per_portfolio_mean"][p, j]),
                 _fmt(report["per_portfolio_stderr"][p, j]))
                for p in range(xs.shape[0])
                for j in range(xs.shape[1])))
    files.append(path)
    path = os.path.join(out, "report.json")
    _write_json(path, {
        "curvature_rms": report["curvature_rms"],
        "stderr": report["stderr"],
        "verdict": report["verdict"],
        "beta_residual": report["beta_residual"],
    })
    files.append(path)
    _write_manifest(out, "curvature", None, args.seed, files)
    return EXIT_OK


def _load_strategy(path: str, grid: TimeGrid, n_assets: int) -> Strategy:
    if not os.path.isfile(path):
        raise InputError(f"strategy file not found: {path}")
    rows = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        need = {"t", "asset", "x"}
        if reader.fieldnames is None or not need.issubset(reader.fieldnames):
            raise InputError("strategy CSV must have columns t, asset, x")
        for rec in reader:
            try:
                rows[(float(rec["t"]), int(rec["asset"]) - 1)] = float(rec["x"])
            except (ValueError, KeyError):
                raise InputError("malformed strategy row")
    x = np.full((grid.n_times, n_assets), np.nan)
    for (tv, j), val in rows.items():
        k = int(round((tv - grid.times[0]) / grid.dt))
        if not (0 <= k < grid.n_times) or abs(grid.times[k] - tv) > 1e-9:
            raise InputError(f"strategy time {tv} is not on the market grid")
        if not (0 <= j < n_assets):
            raise InputError(f"strategy asset index {j + 1} out of range "
                             "(asset indices are 1-based)")
        x[k, j] = val
    if np.any(np.isnan(x)):
        raise InputError("strategy does not cover the full market grid")
    return Strategy(grid, x)


def cmd_action(args) -> int:
    cfg, market, beta = _load_market_dir(args.market)
    strat = _load_strategy(args.strategy, market.grid, market.n_assets)
    try:
        report = arbitrage_action(strat, market, beta)
    except ValueError as exc:
        raise MathError(str(exc))
    out = args.out
    os.makedirs(out, exist_ok=True)
    files = []
    path = os.path.join(out, "action.csv")
    _write_csv(path, ["scenario", "action", "endpoint", "d01"],
               ((s, _fmt(report.action[s]), _fmt(report.endpoint[s]),
                 _fmt(report.d01[s]))
                for s in range(report.action.size)))
    files.append(path)
    path = os.path.join(out, "summary.json")
    _write_json(path, {
        "classification": classify_arbitrage(report, tol=args.tol),
        "quadrature_gap": report.gap,
        "closed": strat.is_closed,
    })
    files.append(path)
    _write_manifest(out, "action", None, None, files)
    return EXIT_OK


def _parse_dynamics(cp) -> dict:
    if not cp.has_section("dynamics"):
        raise InputError("config is missing the [dynamics] section")
    d = {}
    d["branch"] = cp.get("dynamics", "branch", fallback="arbitrage")
    if d["branch"] not in ("arbitrage", "noarb"):
        raise InputError("dynamics.branch must be arbitrage|noarb")
    for k in ("x0", "d0", "r0"):
        d[k] = _vector(cp, "dynamics", k)
    if d["branch"] == "arbitrage":
        d["d0_prime"] = _vector(cp, "dynamics", "d0_prime")
    t0 = _getf(cp, "dynamics", "t0", 0.0)
    t1 = _getf(cp, "dynamics", "t1", 2.0)
    dt = _getf(cp, "dynamics", "dt", 0.01)
    n_steps = round((t1 - t0) / dt)
    d["grid"] = TimeGrid(t0 + dt * np.arange(n_steps + 1))
    d["n_scenarios"] = _geti(cp, "dynamics", "n_scenarios", 1)
    d["seed"] = _geti(cp, "dynamics", "seed", 0)
    d["spec"] = PerturbationSpec(
        scale_x=_getf(cp, "dynamics", "scale_x", 0.0),
        scale_deflator=_getf(cp, "dynamics", "scale_deflator", 0.0),
        scale_rate=_getf(cp, "dynamics", "scale_rate", 0.0),
        mode=cp.get("dynamics", "mode", fallback="cond"))
    return d


def _solve_from_config(args):
    cp = _read_config(args.config)
    d = _parse_dynamics(cp)
    try:
        if d["branch"] == "arbitrage":
            sol = solve_arbitrage_dynamics(
                d["x0"], d["d0"], d["d0_prime"], d["r0"], d["grid"],
                perturbation=d["spec"], n_scenarios=d["n_scenarios"],
                seed=d["seed"])
        else:
            sol = solve_noarb_dynamics(
                d["x0"], d["d0"], d["grid"], perturbation=d["spec"],
                rate0=d["r0"], n_scenarios=d["n_scenarios"], seed=d["seed"])
    except ValueError as exc:
        raise MathError(str(exc))
    return d, sol


def cmd_dynamics(args) -> int:
    d, sol = _solve_from_config(args)
    out = args.out
    os.makedirs(out, exist_ok=True)
    files = []
    t = sol.grid.times
    blocks = [("x", sol.x_core), ("deflator", sol.deflator_core),
              ("rate", sol.rate_core)]
    path = os.path.join(out, "solution.csv")
    _write_csv(path, ["t", "block", "asset", "value"],
               ((_fmt(t[k]), name, j + 1, _fmt(arr[k, j]))
                for name, arr in blocks
                for k in range(t.size)
                for j in range(arr.shape[1])))
    files.append(path)
    res = euler_lagrange_residual(sol.x_core, sol.deflator_core,
                                  sol.rate_core, sol.grid)
    interior = slice(2, -2)
    path = os.path.join(out, "residuals.json")
    _write_json(path, {
        "deflator_eq_max": float(np.max(np.abs(res["deflator_eq"][interior]))),
        "coupling_eq_max": float(np.max(np.abs(res["coupling_eq"][interior]))),
        "self_financing_max": float(np.max(np.abs(res["self_financing"][interior]))),
    })
    files.append(path)
    _write_manifest(out, "dynamics", args.config, d["seed"], files)
    return EXIT_OK


def cmd_noether(args) -> int:
    d, sol = _solve_from_config(args)
    report = noether_integrals(sol.x, sol.deflator, sol.rate, sol.grid)
    out = args.out
    os.makedirs(out, exist_ok=True)
    payload = {}
    for name, entry in report.entries.items():
        if not entry["defined"]:
            payload[name] = {"defined": False, "note": entry["note"]}
        else:
            payload[name] = {"defined": True, "drift": entry["drift"],
                             "stderr": entry["stderr"],
                             "initial": float(entry["series"][0])}
    path = os.path.join(out, "noether.json")
    _write_json(path, payload)
    _write_manifest(out, "noether", args.config, d["seed"], [path])
    return EXIT_OK


def cmd_ingest(args) -> int:
    if not os.path.isfile(args.data):
        raise InputError(f"data file not found: {args.data}")
    cp = _read_config(args.config) if args.config else None
    window = 20
    tol_factor = 3.0
    if cp is not None and cp.has_section("ingest"):
        window = _geti(cp, "ingest", "window", 20)
        tol_factor = _getf(cp, "ingest", "tolerance_factor", 3.0)
    with open(args.data, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "t" or len(header) < 2:
            raise InputError("data CSV must have a 't' column and at least "
                             "one price column")
        recs = []
        for row in reader:
            try:
                recs.append([float(v) for v in row])
            except ValueError:
                raise InputError(f"malformed data row: {row}")
    data = np.array(recs)
    if data.shape[0] < max(3, window + 1):
        raise InputError("not enough rows for the rolling window")
    times, prices = data[:, 0], data[:, 1:]
    steps = np.diff(times)
    if np.any(steps <= 0) or not np.allclose(steps, steps[0], rtol=1e-6):
        raise InputError("data times must be uniform and increasing")
    if np.any(prices <= 0):
        raise MathError("prices must be strictly positive")
    grid = TimeGrid(times)
    n = prices.shape[1]
    # rolling-window symmetric drift of log prices (single empirical path)
    logp = np.log(prices)
    dlog = np.gradient(logp, grid.dt, axis=0)
    kernel = np.ones(window) / window
    drift = np.column_stack([np.convolve(dlog[:, j], kernel, mode="same")
                             for j in range(n)])
    # equal-weight portfolio curvature proxy: deflator-weighted return spread
    D = prices
    dx_val = D.sum(axis=1)
    wgt = D / dx_val[:, None]
    port_drift = (wgt * drift).sum(axis=1)
    rho = (D / dx_val[:, None]) * (port_drift[:, None] - drift)
    interior = slice(window, -window if window else None)
    mean_rho = rho[interior].mean(axis=0)
    # adjacent rolling-window drifts share window-1 observations, so the
    # effective number of independent readings is ~ interior length / window
    neff = max(rho[interior].shape[0] // window, 2)
    stderr = rho[interior].std(axis=0, ddof=1) / np.sqrt(neff)
    rms = float(np.sqrt(np.mean(mean_rho ** 2)))
    err = float(np.sqrt(np.mean(stderr ** 2)))
    verdict = "arbitrage" if rms > tol_factor * err else "no-arbitrage"
    out = args.out
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, "report.json")
    _write_json(path, {
        "flag": "empirical (single path)",
        "n_observations": int(times.size),
        "window": window,
        "curvature_rms": rms,
        "stderr": err,
        "tolerance_factor": tol_factor,
        "verdict": verdict,
        "per_asset_mean": [float(v) for v in mean_rho],
    })
    _write_manifest(out, "ingest", args.config, None, [path])
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="curvlab",
                                description="market-geometry toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="simulate a market and write artifacts")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=None)
    sp.set_defaults(fn=cmd_simulate)

    sp = sub.add_parser("curvature", help="no-arbitrage verdict for a market")
    sp.add_argument("--market", required=True,
                    help="output directory of a previous simulate run")
    sp.add_argument("--out", required=True)
    sp.add_argument("--tol", type=float, default=5.0,
                    help="detection threshold in standard errors")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--n-random", type=int, default=16)
    sp.set_defaults(fn=cmd_curvature)

    sp = sub.add_parser("action", help="action of a strategy on a market")
    sp.add_argument("--market", required=True)
    sp.add_argument("--strategy", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--tol", type=float, default=1e-6)
    sp.set_defaults(fn=cmd_action)

    sp = sub.add_parser("dynamics", help="closed-form extremal flow")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_dynamics)

    sp = sub.add_parser("noether", help="first integrals of an extremal flow")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_noether)

    sp = sub.add_parser("ingest", help="empirical single-path diagnostics")
    sp.add_argument("--data", required=True)
    sp.add_argument("--config", default=None)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_ingest)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except MathError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MATH
    except Exception as exc:   # pragma: no cover - defensive
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
