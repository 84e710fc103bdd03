"""Command line entry point: ``parachute <subcommand> [--config FILE] [--set key=value ...]``.

Every run writes CSV and/or JSON under the output directory and prints the
JSON summary on stdout. Exit codes: 0 success, 2 bad configuration, 3
numerical failure. Errors are reported as one JSON object on stderr.
"""
import argparse
import copy
import json
import math
import os
import sys
import time
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, NumericalError
from .facelift import Facelift
from .firstbest import FirstBest
from .model import F, ModelParams, classify_regime
from .montecarlo import SimConfig, aggregates, simulate, summary as sim_summary
from .secondbest import SolverConfig, solve

SCHEMA_VERSION = 1
OUTPUT_ENV = "PARACHUTE_OUTPUT_DIR"
COMMANDS = ("facelift", "first-best", "second-best", "simulate", "table1")

DEFAULTS = {
    "model": {},
    "solver": {},
    "sim": {},
    "grid": {"y_max": 10.0, "n_points": 1001},
    "table1": {"m_values": [0.1, 0.2, 0.3]},
    "output_dir": "parachute-out",
    "emit": ["csv", "json"],
}
_MODEL_KEYS = {f.name for f in fields(ModelParams) if f.init} | {"delta"}
_SECTION_KEYS = {
    "model": _MODEL_KEYS,
    "solver": {f.name for f in fields(SolverConfig)},
    "sim": {f.name for f in fields(SimConfig)},
    "grid": {"y_max", "n_points"},
    "table1": {"m_values"},
}


def _merge(base, extra, where=""):
    for key, val in extra.items():
        path = f"{where}{key}"
        if key not in base and not (where == "" and key in _SECTION_KEYS):
            raise ConfigError(f"unknown config key {path!r}")
        if isinstance(base.get(key), dict):
            if not isinstance(val, dict):
                raise ConfigError(f"{path!r} must be an object")
            allowed = _SECTION_KEYS[key]
            bad = sorted(set(val) - allowed)
            if bad:
                raise ConfigError(f"unknown config key {path}.{bad[0]}")
            base[key].update(val)
        else:
            base[key] = val


def _parse_set(item):
    key, sep, raw = item.partition("=")
    if not sep or not key:
        raise ConfigError(f"--set expects key=value, got {item!r}")
    try:
        val = json.loads(raw)
    except json.JSONDecodeError:
        val = raw
    out = val
    for part in reversed(key.split(".")):
        out = {part: out}
    return out


def load_config(path=None, overrides=()):
    """Merge defaults, an optional JSON file and ``--set`` overrides, then validate."""
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        _merge(cfg, data)
    for item in overrides:
        _merge(cfg, _parse_set(item))
    env = os.environ.get(OUTPUT_ENV)
    if env:
        cfg["output_dir"] = env
    emit = cfg["emit"]
    if not isinstance(emit, list) or not set(emit) <= {"csv", "json"}:
        raise ConfigError("emit must be a subset of ['csv', 'json']")
    # every section is checked up front, whichever subcommand runs
    build_params(cfg["model"])
    _build(SolverConfig, cfg["solver"])
    _build(SimConfig, cfg["sim"])
    _grid(cfg)
    _m_values(cfg)
    return cfg


def build_params(model):
    model = dict(model)
    delta = model.pop("delta", None)
    try:
        if delta is not None:
            if not isinstance(delta, (int, float)) or not delta > 0:
                raise ConfigError("delta must be a positive number")
            r = model.get("r", ModelParams.r)
            if "rho" in model and not math.isclose(r / model["rho"], delta, rel_tol=1e-12):
                raise ConfigError("model.delta conflicts with model.r / model.rho")
            model["rho"] = r / delta
        return ModelParams(**model)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def _build(cls, section):
    try:
        return cls(**section)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def resolved(cfg, params=None, solver=None, sim=None):
    out = copy.deepcopy(cfg)
    if params is not None:
        out["model"] = params.to_dict()
    if solver is not None:
        out["solver"] = solver.to_dict()
    if sim is not None:
        out["sim"] = sim.to_dict()
    return out


# -- output helpers ----------------------------------------------------------------


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def write_csv(path, columns):
    """Header row plus 17-significant-digit rows; byte-stable for equal inputs."""
    names = list(columns)
    data = np.column_stack([np.asarray(columns[k], dtype=float) for k in names])
    with open(path, "w", newline="") as fh:
        fh.write(",".join(names) + "\n")
        for row in data:
            fh.write(",".join("nan" if math.isnan(x) else "%.17g" % x for x in row) + "\n")


class _Out:
    def __init__(self, cfg, stem):
        self.dir = Path(cfg["output_dir"])
        self.emit = set(cfg["emit"])
        self.stem = stem
        self.written = []
        if self.emit:
            self.dir.mkdir(parents=True, exist_ok=True)

    def csv(self, suffix, columns):
        if "csv" in self.emit:
            path = self.dir / f"{self.stem}{suffix}.csv"
            write_csv(path, columns)
            self.written.append(str(path))

    def json(self, doc):
        doc = _clean(doc)
        if "json" in self.emit:
            path = self.dir / f"{self.stem}.json"
            self.written.append(str(path))
            doc["files"] = list(self.written)
            path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        else:
            doc["files"] = list(self.written)
        return doc


def _envelope(command, cfg, result):
    return {"schema_version": SCHEMA_VERSION, "version": __version__, "command": command,
            "config": cfg, "result": result}


# -- subcommands -------------------------------------------------------------------


def _grid(cfg):
    g = cfg["grid"]
    y_max, n = g["y_max"], g["n_points"]
    if not isinstance(n, int) or n < 2 or not y_max > 0:
        raise ConfigError("grid needs n_points >= 2 and y_max > 0")
    return np.linspace(0.0, float(y_max), n)


def cmd_facelift(cfg):
    params = build_params(cfg["model"])
    fl = Facelift(params)
    y = _grid(cfg)
    fbar = fl(y)
    out = _Out(cfg, "facelift")
    out.csv("", {"y": y, "F": F(y, params), "Fbar": fbar, "Fbar_prime": fl.prime(y)})
    res = fl.hj_residual(y, kink_band=1e-6)
    result = {"regime": fl.regime.value, "thresholds": fl.thresholds, "kinks": fl.kinks,
              "hj_residual_max": float(np.nanmax(np.abs(res))) if np.any(np.isfinite(res)) else None}
    return out.json(_envelope("facelift", resolved(cfg, params), result))


def cmd_first_best(cfg):
    params = build_params(cfg["model"])
    fb = FirstBest(params)
    y = _grid(cfg)
    v = fb(y)
    out = _Out(cfg, "first_best")
    out.csv("", {"y": y, "v_fb": v, "Fbar": fb.facelift(y)})
    return out.json(_envelope("first-best", resolved(cfg, params), fb.summary()))


def _second_best_columns(sol):
    val, pol = sol.value, sol.policy
    return {"y": val.grid, "v": val.v, "Fbar": val.barrier, "a": pol.a, "b": pol.b, "z": pol.z,
            "U": pol.U, "eta": pol.eta, "stop": pol.stop.astype(float)}


def cmd_second_best(cfg):
    params = build_params(cfg["model"])
    solver = _build(SolverConfig, cfg["solver"])
    t0 = time.perf_counter()
    sol = solve(params, solver)
    result = dict(sol.summary(), regime=classify_regime(params).value,
                  seconds=time.perf_counter() - t0)
    out = _Out(cfg, "second_best")
    out.csv("", _second_best_columns(sol))
    return out.json(_envelope("second-best", resolved(cfg, params, sol.config), result))


def cmd_simulate(cfg):
    params = build_params(cfg["model"])
    solver = _build(SolverConfig, cfg["solver"])
    sim = _build(SimConfig, cfg["sim"])
    sol = solve(params, solver)
    t0 = time.perf_counter()
    batch = simulate(sol.value, sol.policy, params, sim)
    result = sim_summary(batch, params)
    result["seconds"] = time.perf_counter() - t0
    result["value_summary"] = sol.summary()
    out = _Out(cfg, "simulate")
    n_rec, n_t = batch.records.shape[:2]
    path_id = np.repeat(np.arange(n_rec), n_t)
    rec = batch.records.reshape(-1, 4)
    out.csv("_paths", {"path": path_id, "t": np.tile(batch.t_record, n_rec), "X": rec[:, 0],
                       "Y": rec[:, 1], "a": rec[:, 2], "b": rec[:, 3]})
    agg = aggregates(batch)
    out.csv("_mean", {"t": agg["t"], "mean_X": agg["mean_X"], "mean_X_alive": agg["mean_X_alive"],
                      "alive": batch.alive_count})
    out.csv("_tau", {"path": np.arange(batch.tau.size), "tau": batch.tau,
                     "status": batch.status, "X_tau": batch.X_tau, "Y_tau": batch.Y_tau,
                     "xi": batch.xi, "jumps": batch.n_jumps})
    return out.json(_envelope("simulate", resolved(cfg, params, sol.config, sim), result))


def table1(params, solver, m_values=(0.1, 0.2, 0.3)):
    """Maximum of v^SB without accidents and for each m, plus the relative loss."""
    free = solve(params, solver.replace(mode="accident-free")).summary()
    rows = [dict(free, case="accident-free", m=None, relative_loss=0.0)]
    for m in m_values:
        p = params.replace(m=float(m), eps_m=min(params.eps_m, float(m)))
        s = solve(p, solver.replace(mode="with-accidents")).summary()
        rows.append(dict(s, case=f"m={m:g}", m=float(m), relative_loss=1.0 - s["v_max"] / free["v_max"]))
    return rows


def _m_values(cfg):
    ms = cfg["table1"]["m_values"]
    if not isinstance(ms, list) or not ms or not all(isinstance(m, (int, float)) and m > 0 for m in ms):
        raise ConfigError("table1.m_values must be a non-empty list of positive numbers")
    return ms


def cmd_table1(cfg):
    params = build_params(cfg["model"])
    solver = _build(SolverConfig, cfg["solver"])
    ms = _m_values(cfg)
    rows = table1(params, solver, ms)
    out = _Out(cfg, "table1")
    out.csv("", {"m": [np.nan if r["m"] is None else r["m"] for r in rows],
                 "v_max": [r["v_max"] for r in rows], "y_argmax": [r["y_argmax"] for r in rows],
                 "relative_loss": [r["relative_loss"] for r in rows]})
    return out.json(_envelope("table1", resolved(cfg, params, solver), {"rows": rows}))


HANDLERS = {"facelift": cmd_facelift, "first-best": cmd_first_best, "second-best": cmd_second_best,
            "simulate": cmd_simulate, "table1": cmd_table1}


def _parser():
    ap = argparse.ArgumentParser(prog="parachute", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="JSON config file")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                    help="override a config entry by dotted path, e.g. model.m=0.2")
    return ap


def _fail(kind, exc, code):
    print(json.dumps({"error": kind, "type": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
    return code


def run(argv=None):
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.set)
        doc = HANDLERS[args.command](cfg)
    except ConfigError as exc:
        return _fail("config", exc, 2)
    except NumericalError as exc:
        return _fail("numerical", exc, 3)
    print(json.dumps(doc, indent=2, sort_keys=True))
    return 0


def main():
    sys.exit(run())
