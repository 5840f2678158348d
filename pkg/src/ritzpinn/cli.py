"""Command-line entry point: ``ritzpinn {approx-check,train,rate-sweep,verify}``.

Every command takes a JSON config (``--config``), optional ``--set key=value``
overrides, ``--seed``, ``--jobs`` and ``--out``.  Exit codes: 0 success,
1 a check failed, 2 configuration error.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import replace

import jsonschema

from .analysis import suites
from .analysis.errors import h1_error, relative_h1_error
from .analysis.sweeps import make_batch, rate_sweep
from .constructor import CORPUS, build_interpolant_relu, certify_h1_error, corpus_curve, h1_certificate
from .domain import sample, spawn_seeds
from .losses import PinnBatch, energy_excess, kind_for
from .problems import parse_problem
from .trainer import DivergenceError, TrainConfig, train_erm, width_rule

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


class ConfigError(Exception):
    pass


_TRAIN_PROPS = {
    "steps": {"type": "integer", "minimum": 1},
    "optimizer": {"enum": ["adam", "plain_gd"]},
    "step_size": {"type": "number", "minimum": 0},
    "schedule": {"enum": ["constant", "cosine"]},
    "beta1": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
    "beta2": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
    "project_every": {"type": "integer", "minimum": 1},
    "refit_every": {"type": "integer", "minimum": 0},
    "kink_bandwidth": {"type": "number", "minimum": 0},
    "backtrack": {"type": "boolean"},
    "order": {"enum": [1, 2, None]},
    "budget": {"type": ["number", "null"], "exclusiveMinimum": 0},
}

SCHEMAS = {
    "approx-check": {
        "type": "object",
        "additionalProperties": False,
        "properties": {
            "curves": {"type": "array", "minItems": 1, "items": {"enum": list(CORPUS)}},
            "widths": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 1}},
            "ratio_range": {"type": "array", "minItems": 2, "maxItems": 2, "items": {"type": "number"}},
            "seed": {"type": "integer", "minimum": 0},
        },
    },
    "train": {
        "type": "object",
        "additionalProperties": False,
        "required": ["problem"],
        "properties": {
            "problem": {"type": "string"},
            "n": {"type": "integer", "minimum": 1},
            "n_boundary": {"type": ["integer", "null"], "minimum": 1},
            "m": {"type": ["integer", "null"], "minimum": 1},
            "seed": {"type": "integer", "minimum": 0},
            **_TRAIN_PROPS,
        },
    },
    "rate-sweep": {
        "type": "object",
        "additionalProperties": False,
        "required": ["problem", "n_grid"],
        "properties": {
            "problem": {"type": "string"},
            "n_grid": {"type": "array", "minItems": 2, "items": {"type": "integer", "minimum": 1}},
            "repeats": {"type": "integer", "minimum": 3},
            "require_decrease": {"type": "boolean"},
            "seed": {"type": "integer", "minimum": 0},
            **_TRAIN_PROPS,
        },
    },
    "verify": {
        "type": "object",
        "additionalProperties": False,
        "properties": {
            "suites": {"type": "array", "minItems": 1,
                       "items": {"enum": ["sandwich", "gradients", "rademacher", "concentration"]}},
            "sandwich_nets": {"type": "integer", "minimum": 1},
            "gradient_cases": {"type": "integer", "minimum": 1},
            "concentration_trials": {"type": "integer", "minimum": 1},
            "concentration_x": {"type": "array", "minItems": 1, "items": {"type": "number", "exclusiveMinimum": 0}},
            "seed": {"type": "integer", "minimum": 0},
        },
    },
}

DEFAULTS = {
    "approx-check": {"curves": list(CORPUS), "widths": [4, 8, 16, 32, 64], "ratio_range": [1.6, 2.4],
                     "seed": 0},
    "train": {"n": 1024, "n_boundary": None, "m": None, "seed": 0, "steps": 2000, "optimizer": "adam",
              "step_size": 1e-2, "schedule": "constant", "beta1": 0.9, "beta2": 0.999,
              "project_every": 1, "refit_every": 50, "kink_bandwidth": 0.02, "backtrack": False,
              "order": None, "budget": None},
    "rate-sweep": {"repeats": 5, "require_decrease": False, "seed": 0, "steps": 2000,
                   "optimizer": "adam", "step_size": 1e-2, "schedule": "constant", "beta1": 0.9,
                   "beta2": 0.999, "project_every": 1, "refit_every": 50, "kink_bandwidth": 0.02,
                   "backtrack": False, "order": None, "budget": None},
    "verify": {"suites": ["sandwich", "gradients", "rademacher", "concentration"], "sandwich_nets": 50,
               "gradient_cases": 50, "concentration_trials": 2000, "concentration_x": [1, 2, 3],
               "seed": 0},
}


# --- config handling ------------------------------------------------------------

def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: malformed JSON: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return doc


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(cfg: dict, pairs) -> dict:
    cfg = dict(cfg)
    for item in pairs or ():
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        cfg[key.strip()] = _parse_value(value)
    return cfg


def resolve_config(command: str, args) -> dict:
    cfg = apply_overrides(load_config(args.config), args.set)
    if args.seed is not None:
        cfg["seed"] = args.seed
    try:
        jsonschema.validate(cfg, SCHEMAS[command])
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {where}: {exc.message}") from exc
    full = dict(DEFAULTS[command])
    full.update(cfg)
    return full


# --- output helpers ------------------------------------------------------------

def fmt(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def write_csv(path: str, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def write_json(path: str, doc) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if hasattr(o, "tolist"):
        return o.tolist()
    if hasattr(o, "item"):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


# --- commands ------------------------------------------------------------------

def cmd_approx_check(cfg: dict, out: str, jobs: int) -> int:
    lo, hi = cfg["ratio_range"]
    widths = sorted(set(cfg["widths"]))
    rows, ok = [], True
    for name in cfg["curves"]:
        curve = corpus_curve(name)
        prev, prev_m = None, None
        for m in widths:
            net = build_interpolant_relu(curve, m)
            bound = h1_certificate(curve.sup_bound, m)
            measured = certify_h1_error(net, curve)
            ratio = prev / measured if prev is not None and measured > 0 else math.nan
            passed = measured <= bound and net.is_feasible()
            if prev is not None and m == 2 * prev_m:
                passed = passed and lo <= ratio <= hi
            ok &= passed
            rows.append([name, m, bound, measured, passed, ratio])
            prev, prev_m = measured, m
    write_csv(os.path.join(out, "approx_check.csv"),
              ["curve", "m", "bound", "measured", "pass", "ratio"], rows)
    return EXIT_OK if ok else EXIT_FAIL


def _problem(cfg):
    try:
        return parse_problem(cfg["problem"])
    except ValueError as exc:
        raise ConfigError(f"bad problem id {cfg['problem']!r}: {exc}") from exc


def _template(cfg, problem, m=1) -> TrainConfig:
    kind = kind_for(problem)
    order = cfg["order"] or (2 if kind.value == "pinn" else 1)
    budget = cfg["budget"] or float(problem.barron_norm)
    try:
        return TrainConfig(m=m, budget=budget, steps=cfg["steps"], optimizer=cfg["optimizer"],
                           step_size=cfg["step_size"], schedule=cfg["schedule"], beta1=cfg["beta1"],
                           beta2=cfg["beta2"], project_every=cfg["project_every"],
                           refit_every=cfg["refit_every"], kink_bandwidth=cfg["kink_bandwidth"],
                           backtrack=cfg["backtrack"], order=order, seed=cfg["seed"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_train(cfg: dict, out: str, jobs: int) -> int:
    problem = _problem(cfg)
    kind = kind_for(problem)
    m = cfg["m"] or width_rule(cfg["n"], problem.dim)
    tmpl = _template(cfg, problem, m)
    batch_seed, init_seed = spawn_seeds(cfg["seed"], 2)
    if kind.value == "pinn" and cfg["n_boundary"]:
        si, sb = spawn_seeds(batch_seed, 2)
        batch = PinnBatch(sample(problem.cube, cfg["n"], si), sample(problem.cube, cfg["n_boundary"], sb, "boundary"))
    else:
        batch = make_batch(kind, problem, cfg["n"], batch_seed)
    try:
        rep = train_erm(kind, problem, batch, replace(tmpl, seed=init_seed))
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    net = rep.final_net
    rep.extra = {"problem": cfg["problem"], "kind": kind.value, "n": cfg["n"], "m": m,
                 "energy_excess": float(energy_excess(net, problem)),
                 "h1_error": float(h1_error(net, problem)),
                 "relative_h1_error": float(relative_h1_error(net, problem))}
    write_json(os.path.join(out, "train_report.json"), rep.to_dict())
    with open(os.path.join(out, "loss_trace.csv"), "w", encoding="utf-8") as fh:
        fh.write(rep.trace_csv())
    return EXIT_OK


def cmd_rate_sweep(cfg: dict, out: str, jobs: int) -> int:
    problem = _problem(cfg)
    n_grid = cfg["n_grid"]
    if any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise ConfigError("n_grid must be strictly increasing")
    rep = rate_sweep(kind_for(problem), problem, n_grid, cfg["repeats"], _template(cfg, problem),
                     cfg["seed"], jobs, cfg["problem"])
    write_json(os.path.join(out, "rate_report.json"), rep.to_dict())
    with open(os.path.join(out, "rate_cells.csv"), "w", encoding="utf-8") as fh:
        fh.write(rep.cells_csv())
    if cfg["require_decrease"] and not (rep.strictly_decreasing and rep.fitted_slope < 0 and rep.pvalue < 0.05):
        return EXIT_FAIL
    return EXIT_OK


def cmd_verify(cfg: dict, out: str, jobs: int) -> int:
    seeds = dict(zip(["sandwich", "gradients", "rademacher", "concentration"], spawn_seeds(cfg["seed"], 4)))
    report = {}
    for name in cfg["suites"]:
        if name == "sandwich":
            report[name] = suites.sandwich_suite(nets=cfg["sandwich_nets"], seed=seeds[name])
        elif name == "gradients":
            report[name] = suites.gradient_suite(cfg["gradient_cases"], seed=seeds[name])
        elif name == "rademacher":
            report[name] = suites.rademacher_suite(seed=seeds[name])
        else:
            report[name] = suites.concentration_suite(tuple(cfg["concentration_x"]),
                                                      trials=cfg["concentration_trials"], seed=seeds[name])
    ok = all(r["ok"] for r in report.values())
    report["ok"] = ok
    write_json(os.path.join(out, "verify_report.json"), report)
    write_csv(os.path.join(out, "verify_summary.csv"), ["suite", "pass"],
              [[k, v["ok"]] for k, v in report.items() if isinstance(v, dict)])
    return EXIT_OK if ok else EXIT_FAIL


COMMANDS = {"approx-check": cmd_approx_check, "train": cmd_train,
            "rate-sweep": cmd_rate_sweep, "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ritzpinn", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--set", action="append", metavar="K=V", help="override a config key (repeatable)")
        p.add_argument("--seed", type=int, help="master seed (overrides the config)")
        p.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="parallel workers for sweeps")
        p.add_argument("--out", default="out", help="output directory")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        if args.seed is not None and not 0 <= args.seed < 2 ** 64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        cfg = resolve_config(args.command, args)
        os.makedirs(args.out, exist_ok=True)
        return COMMANDS[args.command](cfg, args.out, args.jobs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
