"""Command-line front end: scenario files in, JSON or CSV tables out."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any

import numpy as np

from .cases import (
    SINGLERAIL_PATTERN,
    UnsuitablePatternError,
    reproduce_table1,
    singlerail_optimum,
    singlerail_spec,
    singlerail_target,
    solve_core,
)
from .extremal import OverdeterminedError, TargetMismatchError
from .gaussian import Configuration, CoreMatrixSpec, HeraldPattern
from .oracle import oracle_check
from .polysolve import SolveOptions, maximize_success, maximize_underdetermined
from .stellar import DegenerateTargetError, TargetSuperposition, rhs_for

log = logging.getLogger(__name__)

EXIT_OK, EXIT_INVALID, EXIT_NO_SOLUTION, EXIT_ORACLE = 0, 2, 3, 4
MODES = ("solve-core", "optimize", "constrained", "oracle-check", "table1", "singlerail-sweep")
CSV_HEADER = ["n1", "n2", "Re_nu", "Im_nu", "Re_s1", "Im_s1", "Re_s2", "Im_s2", "X1", "X2", "p_S"]


class ScenarioError(ValueError):
    """Invalid scenario; ``field`` names the offending entry."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class NoPhysicalSolution(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# scenario parsing
# ---------------------------------------------------------------------------

def _complex(v, field: str) -> complex:
    if not (isinstance(v, (list, tuple)) and len(v) == 2 and all(isinstance(t, (int, float)) for t in v)):
        raise ScenarioError(field, "complex numbers must be [re, im] pairs")
    return complex(v[0], v[1])


@dataclass
class Scenario:
    mode: str
    target: TargetSuperposition | None = None
    pattern: HeraldPattern | None = None
    squeezing_bound_mu2: float | None = None
    mu2_sweep: list[float] | None = None
    solver: SolveOptions = SolveOptions()
    spec: CoreMatrixSpec | None = None
    damping: tuple[float, ...] | None = None
    singlerail: dict | None = None

    @classmethod
    def from_dict(cls, doc: dict) -> "Scenario":
        if not isinstance(doc, dict):
            raise ScenarioError("<root>", "scenario must be a JSON object")
        mode = doc.get("mode")
        if mode not in MODES:
            raise ScenarioError("mode", f"must be one of {MODES}, got {mode!r}")
        sc = cls(mode=mode)
        sc.solver = _solver(doc.get("solver", {}))
        if mode in ("table1", "singlerail-sweep"):
            sc.singlerail = doc.get("singlerail")
            return sc
        if "pattern" not in doc:
            raise ScenarioError("pattern", "required")
        pat = doc["pattern"]
        if not (isinstance(pat, list) and pat and all(isinstance(n, int) and n >= 0 for n in pat)):
            raise ScenarioError("pattern", "must be a non-empty list of non-negative integers")
        sc.pattern = HeraldPattern(tuple(pat))
        sc.target = _target(doc.get("target"), sc.pattern)
        mu2 = doc.get("squeezing_bound_mu2")
        if mu2 is not None:
            if not isinstance(mu2, (int, float)) or not 0 < mu2 < 1:
                raise ScenarioError("squeezing_bound_mu2", "must be a real number in (0, 1)")
            sc.squeezing_bound_mu2 = float(mu2)
        if "mu2_sweep" in doc:
            sc.mu2_sweep = _sweep(doc["mu2_sweep"])
        if mode == "constrained" and sc.mu2_sweep is None and sc.squeezing_bound_mu2 is None:
            raise ScenarioError("mu2_sweep", "constrained mode needs mu2_sweep or squeezing_bound_mu2")
        if "spec" in doc:
            sc.spec = _spec(doc["spec"], sc.pattern)
        if "damping" in doc:
            X = doc["damping"]
            if not (isinstance(X, list) and len(X) == sc.pattern.m and all(isinstance(v, (int, float)) and v > 0 for v in X)):
                raise ScenarioError("damping", f"must list {sc.pattern.m} positive reals")
            sc.damping = tuple(float(v) for v in X)
        return sc


def _solver(doc: dict) -> SolveOptions:
    if not isinstance(doc, dict):
        raise ScenarioError("solver", "must be an object")
    known = {f.name for f in fields(SolveOptions)}
    extra = set(doc) - known
    if extra:
        raise ScenarioError("solver", f"unknown fields {sorted(extra)}")
    kw = dict(doc)
    if kw.get("box") is not None:
        kw["box"] = tuple(tuple(b) for b in kw["box"])
    try:
        return SolveOptions(**kw)
    except (TypeError, ValueError) as exc:
        raise ScenarioError("solver", str(exc)) from exc


def _target(doc, pattern: HeraldPattern) -> TargetSuperposition:
    if not isinstance(doc, dict) or "coefficients" not in doc:
        raise ScenarioError("target.coefficients", "required")
    coeffs = doc["coefficients"]
    if not isinstance(coeffs, list) or not coeffs:
        raise ScenarioError("target.coefficients", "must be a non-empty list of [re, im] pairs")
    c = [_complex(v, "target.coefficients") for v in coeffs]
    r = doc.get("output_squeezing_r", 0.0)
    if not isinstance(r, (int, float)) or not math.isfinite(r):
        raise ScenarioError("target.output_squeezing_r", "must be a finite real")
    try:
        target = TargetSuperposition(tuple(c), float(r))
    except DegenerateTargetError as exc:
        raise ScenarioError("target.parity", str(exc)) from exc
    parity = doc.get("parity")
    if parity is not None and parity != target.parity:
        raise ScenarioError("target.parity", f"declared {parity!r} but the coefficients are {target.parity}")
    if target.N != pattern.N:
        raise ScenarioError("pattern", f"heralds {pattern.N} photons but the target has stellar rank {target.N}")
    return target


def _spec(doc, pattern: HeraldPattern) -> CoreMatrixSpec:
    if not isinstance(doc, dict) or "s" not in doc:
        raise ScenarioError("spec.s", "required")
    s = tuple(_complex(v, "spec.s") for v in doc["s"])
    nu = tuple(_complex(v, "spec.nu") for v in doc.get("nu", []))
    try:
        spec = CoreMatrixSpec(s=s, nu=nu)
    except ValueError as exc:
        raise ScenarioError("spec", str(exc)) from exc
    if spec.m != pattern.m:
        raise ScenarioError("spec.s", f"{spec.m} herald modes but the pattern has {pattern.m}")
    return spec


def _sweep(doc) -> list[float]:
    if isinstance(doc, list):
        grid = doc
    elif isinstance(doc, dict) and {"start", "stop", "steps"} <= set(doc):
        grid = np.linspace(doc["start"], doc["stop"], int(doc["steps"])).tolist()
    else:
        raise ScenarioError("mu2_sweep", "must be a list or an object with start, stop, steps")
    if not grid or any(not isinstance(v, (int, float)) or not 0 < v < 1 for v in grid):
        raise ScenarioError("mu2_sweep", "values must lie in (0, 1)")
    return [float(v) for v in grid]


def load_scenario(path: str | Path) -> Scenario:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError("<file>", f"not valid JSON: {exc}") from exc
    return Scenario.from_dict(doc)


# ---------------------------------------------------------------------------
# serialisation
# ---------------------------------------------------------------------------

def _cjson(z) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


def config_to_dict(cfg: Configuration) -> dict:
    spec = cfg.spec
    return {
        "s": [_cjson(v) for v in spec.s],
        "nu": [_cjson(v) for v in spec.nu],
        "b00": spec.b00,
        "X": list(cfg.damping.X),
        "p_S": cfg.p_success,
        "squeezing_singular_values": list(cfg.squeezing_singular_values),
        "physicality_margin": cfg.physicality_margin,
    }


def table1_rows(rows: list[dict]) -> list[list[float]]:
    out = []
    for r in rows:
        out.append([
            r["n1"], r["n2"], r["nu"].real, r["nu"].imag, r["s1"].real, r["s1"].imag,
            r["s2"].real, r["s2"].imag, r["X1"], r["X2"], r["p_S"],
        ])
    return out


def to_csv(header: list[str], rows: list[list[float]]) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for row in rows:
        wr.writerow([v if isinstance(v, int) else f"{v:.6g}" for v in row])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# pipelines
# ---------------------------------------------------------------------------

def _core_candidates(sc: Scenario) -> list[CoreMatrixSpec]:
    if sc.spec is not None:
        return [sc.spec]
    if sc.pattern.m != 2:
        return []
    configs = solve_core(sc.pattern, rhs_for(sc.target), sc.solver)
    return [c.to_spec() for c in configs]


def _optimize(sc: Scenario, mu2: float | None) -> list[Configuration]:
    specs = _core_candidates(sc)
    if specs:
        res = maximize_success(specs, sc.pattern, sc.target, mu2, sc.solver)
        return res.ranked
    m = sc.pattern.m
    template = CoreMatrixSpec(s=(0.0,) * m, nu=(0.0,) * (m * (m - 1) // 2))
    res = maximize_underdetermined(template, sc.pattern, sc.target, opts=sc.solver)
    if mu2 is not None:
        return [c for c in res.diagnostics[0] if c.squeezing_singular_values[0] ** 2 <= mu2 + 1e-9][:1]
    return [res.best] if res.best else []


def run_solve_core(sc: Scenario) -> dict:
    if sc.pattern.m != 2:
        raise ScenarioError("pattern", "solve-core handles two herald modes")
    configs = solve_core(sc.pattern, rhs_for(sc.target), sc.solver)
    if not configs:
        raise NoPhysicalSolution("no core configuration reproduces the target")
    return {
        "mode": "solve-core",
        "pattern": list(sc.pattern.counts),
        "solutions": [{"nu": _cjson(c.nu), "s1": _cjson(c.s1), "s2": _cjson(c.s2)} for c in configs],
    }


def run_optimize(sc: Scenario) -> dict:
    ranked = _optimize(sc, sc.squeezing_bound_mu2)
    if not ranked:
        raise NoPhysicalSolution("no physical configuration found")
    return {"mode": "optimize", "pattern": list(sc.pattern.counts), "configurations": [config_to_dict(c) for c in ranked]}


def run_constrained(sc: Scenario) -> dict:
    grid = sc.mu2_sweep or [sc.squeezing_bound_mu2]
    specs = _core_candidates(sc)
    if not specs:
        raise ScenarioError("pattern", "constrained mode needs a two-mode pattern or an explicit spec")
    table = []
    for mu2 in grid:
        res = maximize_success(specs, sc.pattern, sc.target, mu2, sc.solver)
        best = res.best
        table.append({
            "mu2": mu2,
            "p_S": best.p_success if best else None,
            "X": list(best.damping.X) if best else None,
            "max_eigenvalue": best.squeezing_singular_values[0] ** 2 if best else None,
        })
    if all(row["p_S"] is None for row in table):
        raise NoPhysicalSolution("no physical configuration under any bound")
    return {"mode": "constrained", "pattern": list(sc.pattern.counts), "curve": table}


def run_oracle_check(sc: Scenario, cutoff: int = 30) -> tuple[dict, bool]:
    if sc.spec is not None and sc.damping is not None:
        cases = [(sc.spec, sc.damping)]
    else:
        cases = [(c.spec, c.damping.X) for c in _optimize(sc, sc.squeezing_bound_mu2)]
        if not cases:
            raise NoPhysicalSolution("nothing to check")
    reports = []
    for spec, X in cases:
        rep = oracle_check(replace(spec, b00=0.0), sc.pattern, X, sc.target, cutoff=cutoff)
        reports.append({"X": list(X), **rep.to_dict()})
    ok = all(r["status"] == "pass" for r in reports)
    return {"mode": "oracle-check", "pattern": list(sc.pattern.counts), "reports": reports}, ok


def run_singlerail(w_min: float = 0.0, w_max: float = 5.0, steps: int = 51, opts: SolveOptions | None = None) -> dict:
    rows = []
    for w in np.linspace(w_min, w_max, steps):
        X, p = singlerail_optimum(float(w))
        row = {"w": float(w), "X": X, "p_S": p}
        if opts is not None:
            res = maximize_underdetermined(
                singlerail_spec(float(w)), SINGLERAIL_PATTERN, singlerail_target(float(w)), free=["s1", "s2"], opts=opts
            )
            row["p_S_solver"] = res.best.p_success if res.best else None
        rows.append(row)
    return {"mode": "singlerail-sweep", "rows": rows}


def run_table1(opts: SolveOptions = SolveOptions()) -> dict:
    rows = reproduce_table1(opts)
    return {"mode": "table1", "header": CSV_HEADER, "rows": table1_rows(rows)}


def run(sc: Scenario, cutoff: int = 30) -> tuple[dict, int]:
    """Execute a scenario; returns the result document and the exit status."""
    if sc.mode == "table1":
        return run_table1(sc.solver), EXIT_OK
    if sc.mode == "singlerail-sweep":
        cfg = sc.singlerail or {}
        return run_singlerail(cfg.get("w_min", 0.0), cfg.get("w_max", 5.0), int(cfg.get("steps", 51))), EXIT_OK
    if sc.mode == "solve-core":
        return run_solve_core(sc), EXIT_OK
    if sc.mode == "optimize":
        return run_optimize(sc), EXIT_OK
    if sc.mode == "constrained":
        return run_constrained(sc), EXIT_OK
    doc, ok = run_oracle_check(sc, cutoff)
    return doc, EXIT_OK if ok else EXIT_ORACLE


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _dump(doc: Any) -> str:
    return json.dumps(doc, indent=2) + "\n"


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="herald-opt", description="Design heralded Gaussian state sources.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute a scenario file")
    p.add_argument("scenario")
    p.add_argument("--out")
    p.add_argument("--cutoff", type=int, default=30)

    p = sub.add_parser("table1", help="all core configurations of the balanced six- and seven-photon targets")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", help="output path; 'csv' or 'json' selects the format on stdout")

    p = sub.add_parser("singlerail", help="optimal damping and p_S for |11> + w|00>")
    p.add_argument("--w-min", type=float, default=0.0)
    p.add_argument("--w-max", type=float, default=5.0)
    p.add_argument("--steps", type=int, default=51)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--verify", action="store_true", help="also run the generic solver at each w")
    p.add_argument("--out")

    p = sub.add_parser("oracle-check", help="compare analytic results with the Fock-space oracle")
    p.add_argument("scenario")
    p.add_argument("--cutoff", type=int, default=30)
    p.add_argument("--out")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "table1":
            fmt, out = args.format, args.out
            if out in ("csv", "json"):
                fmt, out = out, None
            doc = run_table1()
            _emit(to_csv(CSV_HEADER, doc["rows"]) if fmt == "csv" else _dump(doc), out)
            return EXIT_OK
        if args.command == "singlerail":
            if args.steps < 1 or args.w_min < 0 or args.w_max < args.w_min:
                raise ScenarioError("w-range", "need 0 <= w-min <= w-max and steps >= 1")
            doc = run_singlerail(args.w_min, args.w_max, args.steps, SolveOptions() if args.verify else None)
            if args.format == "csv":
                keys = list(doc["rows"][0])
                text = to_csv(keys, [[r[k] if r[k] is not None else float("nan") for k in keys] for r in doc["rows"]])
            else:
                text = _dump(doc)
            _emit(text, args.out)
            return EXIT_OK
        sc = load_scenario(args.scenario)
        if args.command == "oracle-check":
            sc.mode = "oracle-check"
        doc, code = run(sc, args.cutoff)
        _emit(_dump(doc), args.out)
        return code
    except (ScenarioError, TargetMismatchError, OverdeterminedError, UnsuitablePatternError, FileNotFoundError) as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NoPhysicalSolution as exc:
        print(f"no physical solution: {exc}", file=sys.stderr)
        return EXIT_NO_SOLUTION


if __name__ == "__main__":
    sys.exit(main())
