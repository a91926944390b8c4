"""Declarative verification suites: config validation, job execution, reports."""

from __future__ import annotations

import csv
import json
import math
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np

from .errors import ConfigError, SublevelError
from .functionals import FAMILIES, make_instance, make_log_power_f
from .inequalities import (
    JensenInstance,
    all_passed,
    jensen_sweep,
    naive_comparison_sweep,
    validate_jensen_hypotheses,
)
from .measure import REPORT_SCHEMA_VERSION, OracleConfig, Tolerances, WeightedMeasureSpace, verify_identity
from .pde1d import verify_cubic_energy_bound, verify_sup_identity
from .scalarize import SearchConfig

JOB_KINDS = ("identity", "counterexample", "jensen", "hypotheses", "pde-corollary2", "pde-identity14")

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_grid = {"type": "array", "items": _num, "minItems": 1}
_pos_grid = {"type": "array", "items": _pos, "minItems": 1}
_tols = {
    "type": "object",
    "properties": {"abs": _pos, "rel": _pos, "margin": _pos},
    "additionalProperties": False,
}
_space = {
    "type": "object",
    "properties": {
        "weights": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
        "gamma": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
        "uniform": {
            "type": "object",
            "properties": {"n": {"type": "integer", "minimum": 1}, "length": _pos},
            "required": ["n"],
            "additionalProperties": False,
        },
        "sequence": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
        "atoms": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "properties": {"label": {"type": "string"}, "mu": {"type": "number", "minimum": 0}, "gamma": {"type": "number", "minimum": 0}},
                "required": ["label", "mu"],
                "additionalProperties": False,
            },
        },
    },
    "minProperties": 1,
    "additionalProperties": False,
}
_f_spec = {
    "type": "object",
    "properties": {
        "family": {"enum": ["log-power", "even-power"]},
        "a0": {"type": "number", "minimum": 0},
        "coeffs": {"type": "array", "items": _num},
        "exponents": {"type": "array", "items": _num},
        "p": _pos,
        "s": _pos,
    },
    "required": ["family"],
    "additionalProperties": False,
}
_common = {
    "name": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
    "kind": {"enum": list(JOB_KINDS)},
    "exploratory": {"type": "boolean"},
    "seed": {"type": "integer", "minimum": 0},
    "tolerances": _tols,
}

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "schema_version": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
        "tolerances": _tols,
        "jobs": {"type": "array", "items": {"$ref": "#/definitions/job"}},
    },
    "required": ["jobs"],
    "additionalProperties": False,
    "definitions": {
        "job": {
            "type": "object",
            "required": ["name", "kind"],
            "properties": {"kind": {"enum": list(JOB_KINDS)}},
            "allOf": [
                {"if": {"properties": {"kind": {"enum": ["identity", "counterexample"]}}},
                 "then": {
                     "properties": {
                         **_common,
                         "family": {"enum": sorted(FAMILIES)},
                         "params": {"type": "object"},
                         "space": _space,
                         "r": _grid,
                         "search": {"type": "object"},
                         "oracle": {"type": "object"},
                     },
                     "required": ["family", "space", "r"],
                     "additionalProperties": False,
                 }},
                {"if": {"properties": {"kind": {"const": "jensen"}}},
                 "then": {
                     "properties": {
                         **_common,
                         "samples": {"type": "integer", "minimum": 1},
                         "naive_samples": {"type": "integer", "minimum": 0},
                         "p_range": {"type": "array", "items": _pos, "minItems": 2, "maxItems": 2},
                         "per_function": {"type": "integer", "minimum": 1},
                         "max_atoms": {"type": "integer", "minimum": 1},
                     },
                     "additionalProperties": False,
                 }},
                {"if": {"properties": {"kind": {"const": "hypotheses"}}},
                 "then": {
                     "properties": {
                         **_common,
                         "f": _f_spec,
                         "p": _pos,
                         "delta": {"type": "number", "minimum": 0},
                         "expect": {"enum": ["pass", "fail"]},
                     },
                     "required": ["f", "p"],
                     "additionalProperties": False,
                 }},
                {"if": {"properties": {"kind": {"const": "pde-corollary2"}}},
                 "then": {
                     "properties": {
                         **_common,
                         "L": _pos,
                         "nu": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0, "maximum": 1}, "minItems": 1},
                         "cells": {"type": "integer", "minimum": 4, "multipleOf": 2},
                         "residual_tol": _pos,
                         "homogeneity_tol": _pos,
                     },
                     "required": ["nu"],
                     "additionalProperties": False,
                 }},
                {"if": {"properties": {"kind": {"const": "pde-identity14"}}},
                 "then": {
                     "properties": {
                         **_common,
                         "L": _pos,
                         "p": {"type": "number", "exclusiveMinimum": 1},
                         "nu": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                         "source": {"type": "object"},
                         "rho": _pos_grid,
                         "atoms": {"type": "integer", "minimum": 1},
                         "search": {"type": "object"},
                     },
                     "required": ["rho"],
                     "additionalProperties": False,
                 }},
            ],
        }
    },
}


def _path(err) -> str:
    out = ""
    for part in err.absolute_path:
        out += f"[{part}]" if isinstance(part, int) else (f".{part}" if out else str(part))
    return out or "<root>"


def _line_of(text: str, path) -> Optional[int]:
    """Best-effort line of the innermost named key along a JSON path."""
    keys = [p for p in path if isinstance(p, str)]
    if not keys:
        return None
    hits = [m.start() for m in re.finditer(r'"%s"\s*:' % re.escape(keys[-1]), text)]
    if not hits:
        return None
    return text.count("\n", 0, hits[0]) + 1 if len(hits) == 1 else None


def parse_config(text: str, source: str = "<config>") -> dict:
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"{source}:{err.lineno}:{err.colno}: {err.msg}") from None
    validator = jsonschema.Draft7Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: [str(x) for x in e.absolute_path])
    if errors:
        lines = []
        for err in errors:
            line = _line_of(text, list(err.absolute_path))
            where = f"{source}:{line}" if line else source
            lines.append(f"{where}: {_path(err)}: {err.message}")
        raise ConfigError("\n".join(lines))
    names = [j["name"] for j in cfg["jobs"]]
    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        raise ConfigError(f"{source}: duplicate job names {dupes}")
    return cfg


def load_config(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise ConfigError(f"{path}: {err.strerror}") from None
    return parse_config(text, str(path))


# --------------------------------------------------------------------------
# jobs


def build_space(spec: dict) -> WeightedMeasureSpace:
    if "atoms" in spec:
        return WeightedMeasureSpace.from_atoms([(a["label"], a["mu"], a.get("gamma", 1.0)) for a in spec["atoms"]])
    if "uniform" in spec:
        u = spec["uniform"]
        return WeightedMeasureSpace.uniform(u["n"], u.get("length", 1.0))
    if "sequence" in spec:
        return WeightedMeasureSpace.sequence(spec["sequence"])
    if "weights" in spec:
        return WeightedMeasureSpace.from_weights(spec["weights"], spec.get("gamma"))
    raise ConfigError("space needs one of weights, uniform, sequence")


def _hypothesis_f(spec: dict):
    if spec["family"] == "log-power":
        return make_log_power_f(spec.get("a0", 0.0), spec.get("coeffs", ()), spec.get("exponents", ()), spec.get("p", 2.0))
    s = float(spec.get("s", 2.0))
    return lambda y: np.abs(np.asarray(y, dtype=float)) ** s


def _tolerances(job: dict, suite: dict) -> Tolerances:
    return Tolerances.from_dict({**suite.get("tolerances", {}), **job.get("tolerances", {})})


def _run_identity(job, suite, seed):
    pair = make_instance(job["family"], **job.get("params", {}))
    space = build_space(job["space"])
    tols = _tolerances(job, suite)
    search = SearchConfig.from_dict({**job.get("search", {}), "seed": seed})
    oracle = OracleConfig.from_dict({**job.get("oracle", {}), "seed": seed})
    expected = "pass" if job["kind"] == "identity" else "counterexample-confirmed"
    rows = []
    for r in job["r"]:
        rep = verify_identity(space, pair, float(r), tols, search, oracle, exploratory=job.get("exploratory", False))
        rows.append({"instance": pair.name, **rep.to_json(), "expected": expected})
    return rows, all(row["verdict"] == expected for row in rows)


def _run_jensen(job, suite, seed):
    sweep = jensen_sweep(
        samples=job.get("samples", 10_000),
        seed=seed,
        p_range=tuple(job.get("p_range", (0.3, 4.0))),
        per_function=job.get("per_function", 50),
        max_atoms=job.get("max_atoms", 8),
    )
    rows = [{"check": "jensen", **sweep.to_json()}]
    ok = sweep.passed
    n_naive = job.get("naive_samples", 1000)
    if n_naive:
        naive = naive_comparison_sweep(n_naive, seed=seed)
        rows.append({"check": "naive-comparison", **naive.to_json()})
        ok = ok and naive.passed
    return rows, ok


def _run_hypotheses(job, suite, seed):
    f = _hypothesis_f(job["f"])
    inst = JensenInstance(f, float(job["p"]), float(job.get("delta", 0.0)), WeightedMeasureSpace.from_weights([1.0]), np.zeros(1))
    checks = validate_jensen_hypotheses(inst)
    verdict = "pass" if all_passed(checks) else "fail"
    rows = [{"check": c.name, "passed": c.passed, "evidence": c.evidence} for c in checks]
    rows.append({"check": "overall", "verdict": verdict, "expected": job.get("expect", "pass")})
    return rows, verdict == job.get("expect", "pass")


def _run_energy_bound(job, suite, seed):
    cells = job.get("cells", 1024)
    res_tol = job.get("residual_tol", 1e-8)
    rows = [verify_cubic_energy_bound(job.get("L", 1.0), float(nu), cells, res_tol) for nu in job["nu"]]
    e = [row["energy_per_nu3"] for row in rows]
    spread = (max(e) - min(e)) / max(e) if e else 0.0
    homog_tol = job.get("homogeneity_tol", 1e-4)
    ok = all(row["verdict"] == "pass" for row in rows) and spread <= homog_tol
    rows.append({"check": "homogeneity", "relative_spread": spread, "tolerance": homog_tol, "verdict": "pass" if spread <= homog_tol else "fail"})
    return rows, ok


def _run_sup_identity(job, suite, seed):
    tols = _tolerances(job, suite)
    search = SearchConfig.from_dict({**job.get("search", {}), "seed": seed})
    rows = [
        verify_sup_identity(job.get("L", 1.0), job.get("p", 3.0), job.get("source"), float(rho),
                          job.get("atoms", 16), job.get("nu", 1.0), tols, search)
        for rho in job["rho"]
    ]
    return rows, all(row["verdict"] == "pass" for row in rows)


RUNNERS = {
    "identity": _run_identity,
    "counterexample": _run_identity,
    "jensen": _run_jensen,
    "hypotheses": _run_hypotheses,
    "pde-corollary2": _run_energy_bound,
    "pde-identity14": _run_sup_identity,
}


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "+inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if hasattr(obj, "to_json"):
        return _clean(obj.to_json())
    return obj


def run_job(job: dict, suite: dict) -> dict:
    seed = job.get("seed", suite.get("seed", 0))
    started = datetime.now(timezone.utc).isoformat()
    t0 = time.perf_counter()
    error = None
    try:
        rows, passed = RUNNERS[job["kind"]](job, suite, seed)
    except (SublevelError, ValueError, ArithmeticError) as err:
        rows, passed, error = [], False, f"{type(err).__name__}: {err}"
    report = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "job": job["name"],
        "kind": job["kind"],
        "exploratory": job.get("exploratory", False),
        "seed": seed,
        "config": job,
        "rows": rows,
        "passed": passed,
        "error": error,
        "timestamp": {"started": started, "elapsed_s": time.perf_counter() - t0},
    }
    return _clean(report)


def dumps_report(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2, allow_nan=False) + "\n"


def strip_timestamp(report: dict) -> dict:
    return {k: v for k, v in report.items() if k != "timestamp"}


_SUMMARY_FIELDS = ["job", "kind", "row", "parameter", "value", "lhs", "rhs", "gap", "verdict"]


def _summary_rows(report):
    out = []
    for i, row in enumerate(report["rows"]):
        param, value = "", ""
        for key in ("r", "rho", "nu", "check"):
            if key in row:
                param, value = key, row[key]
                break
        lhs = next((row[k] for k in ("lhs", "energy", "sup_oracle") if isinstance(row.get(k), (int, float))), "")
        rhs = next((row[k] for k in ("rhs", "bound", "expected") if isinstance(row.get(k), (int, float))), "")
        verdict = row.get("verdict", "pass" if row.get("passed") else "fail")
        gap = row.get("gap", "")
        out.append({"job": report["job"], "kind": report["kind"], "row": i, "parameter": param,
                    "value": value, "lhs": lhs, "rhs": rhs, "gap": gap, "verdict": verdict})
    if not report["rows"]:
        out.append({"job": report["job"], "kind": report["kind"], "row": "", "parameter": "", "value": "",
                    "lhs": "", "rhs": "", "gap": "", "verdict": "error" if report["error"] else ""})
    return out


@dataclass
class SuiteResult:
    reports: list = field(default_factory=list)
    paths: list = field(default_factory=list)

    @property
    def exit_status(self) -> int:
        return 0 if all(r["passed"] or r["exploratory"] for r in self.reports) else 1


def _run_indexed(args):
    job, suite = args
    return run_job(job, suite)


def run_suite(config: dict, out_dir, jobs: int = 1, seed: Optional[int] = None,
              tol_abs: Optional[float] = None, tol_rel: Optional[float] = None) -> SuiteResult:
    """Execute all jobs, write ``<job>.json`` per job and ``summary.csv``."""
    suite = dict(config)
    if seed is not None:
        suite["seed"] = seed
        suite["jobs"] = [{k: v for k, v in j.items() if k != "seed"} for j in suite["jobs"]]
    tols = dict(suite.get("tolerances", {}))
    if tol_abs is not None:
        tols["abs"] = tol_abs
    if tol_rel is not None:
        tols["rel"] = tol_rel
    suite["tolerances"] = tols
    job_list = suite["jobs"]

    if jobs > 1 and len(job_list) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(_run_indexed, [(j, suite) for j in job_list]))
    else:
        reports = [run_job(j, suite) for j in job_list]

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = SuiteResult()
    for rep in reports:
        path = out / f"{rep['job']}.json"
        path.write_text(dumps_report(rep))
        result.reports.append(rep)
        result.paths.append(path)
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=_SUMMARY_FIELDS)
        w.writeheader()
        for rep in reports:
            w.writerows(_summary_rows(rep))
    return result


# --------------------------------------------------------------------------
# explain


def _fmt(x, spec=".6g"):
    if isinstance(x, (int, float)) and not isinstance(x, bool):
        return format(x, spec)
    return "-" if x is None else str(x)


def _table(header, rows) -> list:
    cells = [header] + [[_fmt(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    return ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in cells]


def explain(report: dict) -> str:
    for key in ("schema_version", "job", "kind", "rows", "passed"):
        if key not in report:
            raise ConfigError(f"malformed report: missing {key!r}")
    lines = [f"job {report['job']} ({report['kind']}): {'PASS' if report['passed'] else 'FAIL'}"
             + (" [exploratory]" if report.get("exploratory") else "")]
    if report.get("error"):
        lines.append(f"error: {report['error']}")
    kind, rows = report["kind"], report["rows"]
    if kind in ("identity", "counterexample"):
        lines += _table(["instance", "r", "lambda_r", "lhs", "rhs", "gap", "verdict"],
                        [[r["instance"], r["r"], r["lambda_r"], r["lhs"], r["rhs"], r["gap"], r["verdict"]] for r in rows])
        for r in rows:
            v = r.get("hypothesis_violation")
            if v:
                lam = v.get("lambda")
                near = f" near λ={lam:.3g}" if isinstance(lam, (int, float)) else ""
                lines.append(f"hypothesis violation: {v['kind']}{near} (r={_fmt(r['r'])})")
    elif kind == "pde-corollary2":
        pts = [r for r in rows if "nu" in r]
        lines += _table(["nu", "bound", "energy", "ratio", "residual", "verdict"],
                        [[r["nu"], r["bound"], r["energy"], r["ratio"], r["residual"], r["verdict"]] for r in pts])
        for r in rows:
            if r.get("check") == "homogeneity":
                lines.append(f"energy/nu^3 relative spread {_fmt(r['relative_spread'])} (tol {_fmt(r['tolerance'])}): {r['verdict']}")
    elif kind == "pde-identity14":
        lines += _table(["rho", "sup (oracle)", "sup (scalarized)", "F(rho) L", "verdict"],
                        [[r["rho"], r["sup_oracle"], r["sup_scalarized"], r["expected"], r["verdict"]] for r in rows])
    elif kind == "jensen":
        for r in rows:
            if r["check"] == "jensen":
                lines.append(f"jensen: {r['samples']} samples over {r['functions']} functions, "
                             f"{len(r['violations'])} violations, {r['equality_hits']} near-equality cases, "
                             f"{len(r['equality_violations'])} non-constant equality cases, min margin {_fmt(r['min_margin'])}")
            else:
                lines.append(f"naive comparison: {r['samples']} samples, {len(r['failures'])} failures")
    elif kind == "hypotheses":
        lines += _table(["check", "passed"], [[r["check"], r["passed"]] for r in rows if "passed" in r])
        for r in rows:
            if r["check"] == "overall":
                lines.append(f"overall {r['verdict']} (expected {r['expected']})")
    return "\n".join(lines)
