"""Batch experiment harness.

Usage::

    povmsim covering --config run.json --n-list 4,6,8 --trials 20 --out cover.csv

A config is a single JSON object::

    {
      "instance_id": "zero-plus",
      "seed": 0,
      "trials": 20,
      "n_list": [4, 6, 8],
      "delta": 0.25,
      "budget_entries": 67108864,
      "params": {"R": 0.9},
      "instance": {"pmf": [0.5, 0.5], "states": [<matrix>, <matrix>]}
    }

Matrices use ``{"dim": d, "re": [[...]], "im": [[...]]}``.  Command-line flags
override the corresponding config fields.  Per-row seeds are derived by
hashing ``(seed, command, instance_id, n, trial)`` so adding rows never
perturbs existing ones.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import platform
import sys
import time
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from . import linalg as la
from .codebooks import exponent_for_rate
from .covering import COVERING_COLUMNS, CoveringInstance, covering_experiment, covering_row, t123_experiment
from .errors import BudgetExceeded, ConfigError, NumericalFailure, PovmsimError, SchemaError
from .protocol import (
    SIMULATE_COLUMNS,
    CompatibleTriple,
    check_compatibility,
    simulate_end_to_end,
    structured_simulate,
)
from .qstates import ClassicalChannel, Povm, check_density, validate_povm
from .sampling import hashed_seed
from .typicality import DEFAULT_DELTA, Pmf

COMMANDS = ("validate", "covering", "coset-covering", "simulate", "structured-simulate", "t123")

T123_COLUMNS = ("instance_id", "n", "R", "delta", "trial", "T1", "T2", "T3", "distance", "holds", "t2_bound", "seed")
VALIDATE_COLUMNS = ("instance_id", "object", "check", "value", "passed")

EXIT_OK = 0
EXIT_FAILED_CHECK = 1
EXIT_CONFIG = 2
EXIT_BUDGET = 3
EXIT_NUMERICAL = 4


# --------------------------------------------------------------------------
# instance loading


def _ptr(base: str, *parts) -> str:
    out = base
    for p in parts:
        out += "/" + str(p).replace("~", "~0").replace("/", "~1")
    return out


def _need(obj, key: str, ptr: str):
    if not isinstance(obj, dict):
        raise SchemaError(ptr, "expected an object")
    if key not in obj:
        raise SchemaError(_ptr(ptr, key), "required field is missing")
    return obj[key]


def parse_matrix(obj, ptr: str) -> np.ndarray:
    try:
        return la.matrix_from_json(obj)
    except (ValueError, TypeError) as exc:
        raise SchemaError(ptr, str(exc)) from None


def parse_state(obj, ptr: str) -> np.ndarray:
    m = parse_matrix(obj, ptr)
    try:
        return check_density(m)
    except (PovmsimError, ValueError) as exc:
        raise SchemaError(ptr, f"not a density operator: {exc}") from None


def _label(x):
    return tuple(_label(v) for v in x) if isinstance(x, list) else x


def parse_povm(obj, ptr: str, check: bool = True) -> Povm:
    elems = _need(obj, "elements", ptr)
    if not isinstance(elems, list) or not elems:
        raise SchemaError(_ptr(ptr, "elements"), "expected a non-empty list of matrices")
    mats = [parse_matrix(e, _ptr(ptr, "elements", i)) for i, e in enumerate(elems)]
    labels = obj.get("labels", list(range(len(mats))))
    if not isinstance(labels, list) or len(labels) != len(mats):
        raise SchemaError(_ptr(ptr, "labels"), "need one label per element")
    try:
        p = Povm(tuple(_label(l) for l in labels), tuple(mats))
    except (PovmsimError, ValueError) as exc:
        raise SchemaError(ptr, str(exc)) from None
    if check:
        rep = validate_povm(p)
        if not rep.passed:
            raise SchemaError(ptr, f"not a POVM ({rep})")
    return p


def parse_pmf(obj, ptr: str) -> Pmf:
    try:
        return Pmf(np.asarray(obj, dtype=float))
    except (ValueError, TypeError) as exc:
        raise SchemaError(ptr, str(exc)) from None


def parse_channel(obj, ptr: str, inputs: Sequence, outputs: Sequence | None) -> ClassicalChannel:
    probs = _need(obj, "probabilities", ptr)
    outs = obj.get("outputs", list(outputs) if outputs is not None else None)
    try:
        arr = np.asarray(probs, dtype=float)
        if outs is None:
            outs = list(range(arr.shape[1]))
        return ClassicalChannel(tuple(inputs), tuple(_label(o) for o in outs), arr)
    except (PovmsimError, ValueError, TypeError, IndexError) as exc:
        raise SchemaError(_ptr(ptr, "probabilities"), str(exc)) from None


def load_instance(obj: Any, kind: str, ptr: str = "/instance") -> dict:
    """Validate an instance object for ``kind`` ('ensemble', 'protocol' or 'any')."""
    if not isinstance(obj, dict):
        raise SchemaError(ptr, "instance must be an object")
    out: dict = {}
    if kind in ("ensemble", "any") and ("pmf" in obj or kind == "ensemble"):
        pmf = parse_pmf(_need(obj, "pmf", ptr), _ptr(ptr, "pmf"))
        states = _need(obj, "states", ptr)
        if not isinstance(states, list) or len(states) != len(pmf):
            raise SchemaError(_ptr(ptr, "states"), "need one state per pmf entry")
        out["pmf"] = pmf
        out["states"] = tuple(parse_state(s, _ptr(ptr, "states", i)) for i, s in enumerate(states))
        if len({s.shape for s in out["states"]}) != 1:
            raise SchemaError(_ptr(ptr, "states"), "states must share a dimension")
    if kind in ("protocol", "any") and ("rho" in obj or kind == "protocol"):
        rho = parse_state(_need(obj, "rho", ptr), _ptr(ptr, "rho"))
        lam = parse_povm(_need(obj, "lambda", ptr), _ptr(ptr, "lambda"))
        mu = parse_povm(obj["mu"], _ptr(ptr, "mu")) if "mu" in obj else lam
        if "channel" in obj:
            ch = parse_channel(obj["channel"], _ptr(ptr, "channel"), mu.labels, lam.labels)
        elif "mu" in obj:
            raise SchemaError(_ptr(ptr, "channel"), "a channel is required when mu is given")
        else:
            ch = ClassicalChannel.identity(lam.labels)
        for name, p in (("lambda", lam), ("mu", mu)):
            if p.dim != rho.shape[0]:
                raise SchemaError(_ptr(ptr, name), f"acts on dimension {p.dim}, state has {rho.shape[0]}")
        out.update(rho=rho, lam=lam, triple=CompatibleTriple(mu, ch))
    if kind == "any":
        if "povm" in obj:
            out["povm"] = parse_povm(obj["povm"], _ptr(ptr, "povm"), check=False)
        if "state" in obj:
            out["state_matrix"] = parse_matrix(obj["state"], _ptr(ptr, "state"))
        if not out:
            raise SchemaError(ptr, "nothing to validate (expected pmf/states, rho/lambda, povm or state)")
    return out


# --------------------------------------------------------------------------
# configuration


def _parse_n_list(text: str) -> list[int]:
    try:
        vals = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"--n-list must be comma-separated integers, got {text!r}") from None
    if not vals:
        raise ConfigError("--n-list is empty")
    return vals


def build_config(args: argparse.Namespace) -> dict:
    cfg: dict = {}
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError(f"config file {path} does not exist")
        try:
            cfg = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(cfg, dict):
            raise SchemaError("", "config must be a JSON object")
        base = path.parent
        inst = cfg.get("instance")
        if isinstance(inst, str):
            ipath = (base / inst) if not Path(inst).is_absolute() else Path(inst)
            if not ipath.is_file():
                raise ConfigError(f"instance file {ipath} does not exist")
            try:
                cfg["instance"] = json.loads(ipath.read_text())
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{ipath}: invalid JSON ({exc})") from None
    for key, val in (("seed", args.seed), ("trials", args.trials), ("delta", args.delta),
                     ("budget_entries", args.budget_entries), ("output", args.out)):
        if val is not None:
            cfg[key] = val
    if args.n_list is not None:
        cfg["n_list"] = _parse_n_list(args.n_list)
    cfg.setdefault("instance_id", "instance")
    cfg.setdefault("seed", 0)
    cfg.setdefault("trials", 1)
    cfg.setdefault("delta", DEFAULT_DELTA)
    cfg.setdefault("budget_entries", la.DEFAULT_BUDGET_ENTRIES)
    cfg.setdefault("params", {})
    _check_config(cfg)
    return cfg


def _check_config(cfg: dict) -> None:
    def positive_int(key):
        v = cfg[key]
        if not isinstance(v, int) or isinstance(v, bool) or v < 1:
            raise SchemaError("/" + key, "must be a positive integer")

    positive_int("trials")
    positive_int("budget_entries")
    if not isinstance(cfg["seed"], int) or isinstance(cfg["seed"], bool) or cfg["seed"] < 0:
        raise SchemaError("/seed", "must be a nonnegative integer")
    if not isinstance(cfg["delta"], (int, float)) or not cfg["delta"] > 0:
        raise SchemaError("/delta", "must be a positive number")
    if not isinstance(cfg["params"], dict):
        raise SchemaError("/params", "must be an object")
    if "n_list" in cfg:
        nl = cfg["n_list"]
        if not isinstance(nl, list) or not nl or not all(isinstance(n, int) and n >= 1 for n in nl):
            raise SchemaError("/n_list", "must be a non-empty list of positive integers")
    if "instance" not in cfg:
        raise SchemaError("/instance", "required field is missing")


def _rate(cfg: dict, key: str, default: float | None = None) -> float:
    params = cfg["params"]
    if key not in params:
        if default is None:
            raise SchemaError(_ptr("/params", key), "required field is missing")
        return default
    v = params[key]
    if not isinstance(v, (int, float)) or isinstance(v, bool) or v < 0 or not math.isfinite(v):
        raise SchemaError(_ptr("/params", key), "must be a finite nonnegative number")
    return float(v)


def _n_list(cfg: dict) -> list[int]:
    if "n_list" not in cfg:
        raise SchemaError("/n_list", "required field is missing")
    return cfg["n_list"]


def row_seed(cfg: dict, command: str, n: int, trial: int) -> int:
    return hashed_seed(cfg["seed"], command, cfg["instance_id"], n, trial)


# --------------------------------------------------------------------------
# commands


def run_validate(cfg: dict) -> tuple[list[dict], int]:
    inst = load_instance(cfg["instance"], "any")
    iid = cfg["instance_id"]
    rows = []

    def add(obj, check, value, passed):
        rows.append({"instance_id": iid, "object": obj, "check": check, "value": float(value), "passed": passed})

    if "povm" in inst:
        rep = validate_povm(inst["povm"])
        add("povm", "min_eigenvalue", rep.min_eigenvalue, rep.min_eigenvalue >= -la.TOL_PSD)
        add("povm", "completeness_error", rep.completeness_error, rep.completeness_error <= 1e-8)
    if "state_matrix" in inst:
        m = inst["state_matrix"]
        herm = la.hermiticity_error(m)
        add("state", "hermiticity_error", herm, herm <= la.TOL_HERM)
        tr = float(np.trace(m).real)
        add("state", "trace", tr, abs(tr - 1.0) <= 1e-9)
        if herm <= la.TOL_HERM:
            low = la.min_eigenvalue(m)
            add("state", "min_eigenvalue", low, low >= -la.TOL_PSD)
    if "states" in inst:
        add("ensemble", "states_valid", 1.0, True)
    if "triple" in inst:
        rep = check_compatibility(inst["rho"], inst["lam"], inst["triple"])
        add("triple", "compatibility_error", rep.max_deviation, rep.passed)
    status = all(r["passed"] for r in rows)
    return rows, EXIT_OK if status else EXIT_FAILED_CHECK


def run_covering(cfg: dict, command: str) -> list[dict]:
    inst = load_instance(cfg["instance"], "ensemble")
    mode = "iid" if command == "covering" else "coset"
    rate = _rate(cfg, "R")
    rows = []
    for n in _n_list(cfg):
        try:
            ci = CoveringInstance(inst["pmf"], inst["states"], n, rate, mode, cfg["delta"])
        except PovmsimError:
            raise
        except ValueError as exc:
            raise SchemaError("/instance", str(exc)) from None
        seeds = [row_seed(cfg, command, n, t) for t in range(cfg["trials"])]
        res = covering_experiment(ci, cfg["trials"], cfg["seed"], seeds=seeds)
        rows.append(covering_row(cfg["instance_id"], res))
    return rows


def run_t123(cfg: dict) -> list[dict]:
    inst = load_instance(cfg["instance"], "ensemble")
    rate = _rate(cfg, "R")
    cd = cfg["params"].get("classical_delta")
    rows = []
    for n in _n_list(cfg):
        ci = CoveringInstance(inst["pmf"], inst["states"], n, rate, "iid", cfg["delta"])
        seeds = [row_seed(cfg, "t123", n, t) for t in range(cfg["trials"])]
        results = t123_experiment(ci, cfg["trials"], cfg["seed"], classical_delta=cd, seeds=seeds)
        for t, r in enumerate(results):
            rows.append({
                "instance_id": cfg["instance_id"], "n": n, "R": rate, "delta": float(cfg["delta"]),
                "trial": t, "T1": r.t1, "T2": r.t2, "T3": r.t3, "distance": r.distance,
                "holds": r.holds, "t2_bound": r.t2_bound, "seed": seeds[t],
            })
    return rows


def run_simulate(cfg: dict) -> list[dict]:
    inst = load_instance(cfg["instance"], "protocol")
    C = _rate(cfg, "C", 0.0)
    R = _rate(cfg, "R")
    rows = []
    for n in _n_list(cfg):
        for t in range(cfg["trials"]):
            seed = row_seed(cfg, "simulate", n, t)
            rep = simulate_end_to_end(inst["rho"], inst["lam"], inst["triple"], n, seed, C=C, R=R, exact=False)
            rows.append(rep.row(cfg["instance_id"]))
    return rows


def _exps_for(cfg: dict, n: int, q: int) -> tuple[int, int, int]:
    params = cfg["params"]
    if "exps" in params:
        e = params["exps"]
        if not isinstance(e, list) or len(e) != 3 or not all(isinstance(x, int) and x >= 0 for x in e):
            raise SchemaError("/params/exps", "must be three nonnegative integers")
        return tuple(e)
    return (
        exponent_for_rate(_rate(cfg, "C", 0.0), n, q),
        exponent_for_rate(_rate(cfg, "R"), n, q),
        int(math.floor(n * _rate(cfg, "beta", 0.0) / math.log2(q) + 1e-12)),
    )


def run_structured(cfg: dict) -> list[dict]:
    inst = load_instance(cfg["instance"], "protocol")
    q = len(inst["triple"].w_labels)
    rows = []
    for n in _n_list(cfg):
        exps = _exps_for(cfg, n, q)
        for t in range(cfg["trials"]):
            seed = row_seed(cfg, "structured-simulate", n, t)
            rep = structured_simulate(inst["rho"], inst["lam"], inst["triple"], n, exps, seed,
                                      delta=cfg["delta"], exact=False)
            rows.append(rep.row(cfg["instance_id"]))
    return rows


# --------------------------------------------------------------------------
# output


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        f = float(v)
        if not math.isfinite(f):
            raise NumericalFailure(f"non-finite value {f!r} in output")
        return repr(f)
    return str(v)


def render_csv(rows: list[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([format_value(r[c]) for c in columns])
    return buf.getvalue()


COLUMNS = {
    "validate": VALIDATE_COLUMNS,
    "covering": COVERING_COLUMNS,
    "coset-covering": COVERING_COLUMNS,
    "simulate": SIMULATE_COLUMNS,
    "structured-simulate": SIMULATE_COLUMNS,
    "t123": T123_COLUMNS,
}


def execute(command: str, cfg: dict) -> tuple[str, int]:
    """Run a command on a validated config; returns (csv text, exit status)."""
    status = EXIT_OK
    with la.memory_budget(cfg["budget_entries"]):
        if command == "validate":
            rows, status = run_validate(cfg)
        elif command in ("covering", "coset-covering"):
            rows = run_covering(cfg, command)
        elif command == "t123":
            rows = run_t123(cfg)
        elif command == "simulate":
            rows = run_simulate(cfg)
        elif command == "structured-simulate":
            rows = run_structured(cfg)
        else:
            raise ConfigError(f"unknown command {command!r}")
    return render_csv(rows, COLUMNS[command]), status


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="povmsim", description=__doc__.split("\n")[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="JSON config file")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--trials", type=int)
    ap.add_argument("--n-list", dest="n_list", help="comma-separated block lengths, e.g. 4,6,8")
    ap.add_argument("--delta", type=float)
    ap.add_argument("--budget-entries", dest="budget_entries", type=int)
    ap.add_argument("--out", help="CSV output path (default: stdout)")
    ap.add_argument("--manifest", help="JSON manifest path (default: <out>.manifest.json)")
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    started = time.perf_counter()
    try:
        cfg = build_config(args)
        text, status = execute(args.command, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except PovmsimError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = cfg.get("output")
    if out:
        Path(out).write_text(text)
        manifest_path = Path(args.manifest) if args.manifest else Path(str(out) + ".manifest.json")
    else:
        sys.stdout.write(text)
        manifest_path = Path(args.manifest) if args.manifest else None
    if manifest_path is not None:
        manifest = {
            "command": args.command,
            "config": cfg,
            "versions": {"povmsim": __version__, "numpy": np.__version__, "python": platform.python_version()},
            "wall_time_s": time.perf_counter() - started,
            "rows": text.count("\n") - 1,
            "output": out,
            "exit_status": status,
        }
        manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")
    if args.command == "validate":
        print("pass" if status == EXIT_OK else "fail", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
