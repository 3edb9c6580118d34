"""
Config-driven batch runner.

A scenario file has four sections (TOML, or the same structure as JSON)::

    [metric]
    kind = "conformal"            # "flat" or "conformal"
    f = [[0, 1, 0.0, 0.03]]       # rows [kx, ky, a, b]

    [field]
    c1 = 0.3
    c2 = 0.0
    U = []

    [run]
    kind = "periodic"             # orbit | lyapunov | periodic | cone | domination
                                  # | surgery | franks | cslab
    T = 10.0
    h = 1e-3

    [output]
    dir = "out"
    prefix = "run"

Unknown keys are rejected.  Exit codes: 0 success, 1 configuration error,
2 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import re
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np
import tomli

from . import cs_linalg
from .analysis import (
    Section,
    beta_surgery,
    classify_periodic,
    cone_fd_check,
    cone_invariance_test,
    domination_estimator,
    find_periodic,
    lyapunov_spectrum,
)
from .cocycle import (
    BumpProfile,
    FranksPerturbation,
    constant_path,
    franks_lower_bound,
    franks_tangent,
    generator_samples,
    integrate_cocycle,
)
from .errors import ConfigError, NumericalFailure, ParseError, ThermolabError, ValidationError
from .flow import integrate_orbit, unit_state, write_csv
from .geometry import ClosedFormField, ConformalMetric, Scenario, TrigPolynomial

log = logging.getLogger("thermolab")

SCHEMA = "thermolab.report/1"
KINDS = ("orbit", "lyapunov", "periodic", "cone", "domination", "surgery", "franks", "cslab")
EMITS = ("csv", "json", "both")

_COMMON = {"kind": "orbit", "T": 10.0, "h": 1e-3, "x": 0.0, "y": 0.0, "angle": 0.0, "seed": 0}
_PERIODIC = {"section_axis": 1, "section_value": 0.0, "section_direction": 1, "max_iter": 20,
             "tol": 1e-10, "max_time": 50.0}
RUN_KEYS = {
    "orbit": {"renormalize": False, "cocycle": True},
    "lyapunov": {"block": 1.0},
    "periodic": dict(_PERIODIC),
    "cone": {"k": [0.1], "stride": 10},
    "domination": {"l_max": 6, "window": 20, "nsamples": 20, "norbits": 1, "block": 1.0},
    "surgery": {"alpha": 0.2, **_PERIODIC},
    "franks": {"q": 0.0, "sigma": 0.0, "draws": 100, "nsteps": 500, "radius": 0.2,
               "windows": [], "rho": 0.1},
    "cslab": {"letters": [], "successor": [], "identity_transitions": True, "eps": 1e-6,
              "max_len": 8, "max_points": 2, "require_strict": False, "alpha": 0.1,
              "grid": 1e-3, "split_F": [], "split_G": [], "l": 1},
}
SECTION_KEYS = {
    "metric": {"kind": "flat", "f": []},
    "field": {"c1": 0.0, "c2": 0.0, "U": []},
    "run": None,
    "output": {"dir": "out", "prefix": "run", "emit": "both"},
}
_INT_KEYS = {"seed", "section_axis", "section_direction", "max_iter", "stride", "l_max", "window",
             "nsamples", "norbits", "draws", "nsteps", "max_len", "max_points", "l"}
_BOOL_KEYS = {"renormalize", "cocycle", "identity_transitions", "require_strict"}
_STR_KEYS = {"kind", "dir", "prefix", "emit"}


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: Scenario
    run: dict
    output: dict

    @property
    def kind(self) -> str:
        return self.run["kind"]


@dataclass
class RunReport:
    scenario_hash: str
    kind: str
    status: str
    result: dict
    outputs: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    diagnostics: list = field(default_factory=list)
    exit_code: int = 0


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------


def _key_line(text: str, key: str, section: Optional[str] = None) -> Optional[int]:
    """Best-effort line number of ``key`` (inside ``section`` when given)."""
    lines = text.splitlines()
    start = 0
    if section is not None:
        pat = re.compile(r'^\s*(\[\s*%s\s*\]|"%s"\s*:)' % (re.escape(section), re.escape(section)))
        for i, ln in enumerate(lines):
            if pat.search(ln):
                start = i
                break
    pat = re.compile(r'^\s*"?%s"?\s*[=:]|[{,]\s*"%s"\s*:' % (re.escape(key), re.escape(key)))
    for i in range(start, len(lines)):
        if pat.search(lines[i]):
            return i + 1
    return None


def _load(text: str) -> dict:
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", exc.lineno, exc.colno) from None
        if not isinstance(data, dict):
            raise ParseError("top level must be an object", 1, 1)
        return data
    try:
        return tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        msg = str(exc)
        m = re.search(r"line (\d+), column (\d+)", msg)
        line, col = (int(m.group(1)), int(m.group(2))) if m else (None, None)
        msg = re.sub(r"\s*\(at line \d+, column \d+\)", "", msg)
        raise ParseError(f"invalid TOML: {msg}", line, col) from None


def _number(name, value, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(name, f"expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ValidationError(name, "must be finite")
    if integer:
        if float(value) != int(value):
            raise ValidationError(name, "must be an integer")
        return int(value)
    return float(value)


def _coefficients(name, rows):
    if not isinstance(rows, list):
        raise ValidationError(name, "expected a list of [kx, ky, a, b] rows")
    out = []
    for i, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != 4:
            raise ValidationError(f"{name}[{i}]", "expected [kx, ky, a, b]")
        kx = _number(f"{name}[{i}].kx", row[0], integer=True)
        ky = _number(f"{name}[{i}].ky", row[1], integer=True)
        a = _number(f"{name}[{i}].a", row[2])
        b = _number(f"{name}[{i}].b", row[3])
        out.append([kx, ky, a, b])
    return TrigPolynomial(out)


def _check_value(section, key, value, default):
    name = f"{section}.{key}"
    if key in _BOOL_KEYS:
        if not isinstance(value, bool):
            raise ValidationError(name, "expected true or false")
        return value
    if key in _STR_KEYS:
        if not isinstance(value, str):
            raise ValidationError(name, "expected a string")
        return value
    if key in _INT_KEYS:
        return _number(name, value, integer=True)
    if isinstance(default, float):
        return _number(name, value)
    return value


def parse_scenario(text: str) -> ScenarioConfig:
    """Strictly parse a TOML (or JSON) scenario; defaults are filled in."""
    data = _load(text)
    for sec in data:
        if sec not in SECTION_KEYS:
            raise ParseError(f"unknown section {sec!r}", _key_line(text, sec) or _section_line(text, sec))
        if not isinstance(data[sec], dict):
            raise ValidationError(sec, "expected a table of key/value pairs")
    run_in = data.get("run", {})
    kind = run_in.get("kind", "orbit")
    if kind not in KINDS:
        raise ValidationError("run.kind", f"unknown kind {kind!r}; expected one of {', '.join(KINDS)}")
    allowed = {"run": {**_COMMON, **RUN_KEYS[kind]}}
    resolved = {}
    for sec, defaults in SECTION_KEYS.items():
        defaults = allowed.get(sec, defaults)
        given = data.get(sec, {})
        out = dict(defaults)
        for key, value in given.items():
            if key not in defaults:
                raise ParseError(f"unknown key {key!r} in [{sec}]", _key_line(text, key, sec))
            out[key] = _check_value(sec, key, value, defaults[key])
        resolved[sec] = out
    m = resolved["metric"]
    if m["kind"] not in ("flat", "conformal"):
        raise ValidationError("metric.kind", "expected 'flat' or 'conformal'")
    f = _coefficients("metric.f", m["f"])
    if m["kind"] == "flat" and not f.is_zero:
        raise ValidationError("metric.f", "a flat metric takes no coefficients")
    fl = resolved["field"]
    fld = ClosedFormField(_number("field.c1", fl["c1"]), _number("field.c2", fl["c2"]),
                          _coefficients("field.U", fl["U"]))
    run = resolved["run"]
    for key in ("T", "h"):
        run[key] = _number(f"run.{key}", run[key])
    if run["h"] <= 0:
        raise ValidationError("run.h", "must be positive")
    if resolved["output"]["emit"] not in EMITS:
        raise ValidationError("output.emit", f"expected one of {', '.join(EMITS)}")
    if kind == "cone":
        ks = run["k"] if isinstance(run["k"], list) else [run["k"]]
        run["k"] = [_number("run.k", k) for k in ks]
    name = resolved["output"]["prefix"]
    scenario = Scenario(ConformalMetric(f), fld, name)
    return ScenarioConfig(scenario, run, resolved["output"])


def _section_line(text, sec):
    for i, ln in enumerate(text.splitlines()):
        if re.match(r"^\s*\[\s*%s\s*\]" % re.escape(sec), ln):
            return i + 1
    return None


# ---------------------------------------------------------------------------
# execution
# ---------------------------------------------------------------------------


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return _float(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return [_float(obj.real), _float(obj.imag)]
    if isinstance(obj, float):
        return _float(obj)
    return obj


def _float(x):
    if math.isnan(x):
        return None
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


class _Writer:
    def __init__(self, out_dir: Path, prefix: str, emit: str):
        self.dir = out_dir
        self.prefix = prefix
        self.emit = emit
        self.outputs = {}

    def csv(self, name, header, rows):
        if self.emit == "json":
            return
        self.dir.mkdir(parents=True, exist_ok=True)
        path = self.dir / f"{self.prefix}_{name}.csv"
        write_csv(path, header, rows)
        self.outputs[name] = path.name

    def json(self, payload):
        if self.emit == "csv":
            return
        self.dir.mkdir(parents=True, exist_ok=True)
        path = self.dir / f"{self.prefix}_report.json"
        payload = dict(payload)
        payload["artifacts"] = sorted(self.outputs.values()) + [path.name]
        text = json.dumps(_jsonable(payload), sort_keys=True, indent=2) + "\n"
        path.write_text(text, encoding="utf-8")
        self.outputs["report"] = path.name


def _section(run) -> Section:
    return Section(run["section_axis"], run["section_value"], run["section_direction"])


def _run_orbit(sc, run, rng, w):
    st = unit_state(sc, run["x"], run["y"], run["angle"])
    orbit = integrate_orbit(sc, st, run["T"], run["h"], renormalize=run["renormalize"])
    header, rows = orbit.to_rows()
    w.csv("orbit", header, rows)
    result = {"drift": orbit.drift, "winding": list(orbit.winding()), "nsamples": len(orbit),
              "end": orbit.states[-1]}
    if run["cocycle"]:
        coc = integrate_cocycle(sc, orbit)
        header, rows = coc.to_rows()
        w.csv("cocycle", header, rows)
        result.update(
            T_final=coc.final,
            s_final=float(coc.s[-1]),
            conformal_residual=float(np.max(coc.conformal_residuals())),
            det_residual=float(np.max(coc.det_residuals())),
        )
    return result


def _run_lyapunov(sc, run, rng, w):
    st = unit_state(sc, run["x"], run["y"], run["angle"])
    rep = lyapunov_spectrum(sc, st, run["T"], run["h"], block=run["block"])
    return rep.to_dict()


def _periodic(sc, run):
    st = unit_state(sc, run["x"], run["y"], run["angle"])
    return find_periodic(sc, st, _section(run), max_iter=run["max_iter"], h=run["h"],
                         tol=run["tol"], max_time=run["max_time"])


def _run_periodic(sc, run, rng, w):
    po = _periodic(sc, run)
    header, rows = po.orbit.to_rows()
    w.csv("periodic_orbit", header, rows)
    out = po.to_dict()
    out["classification"] = classify_periodic(po).to_dict()
    return out


def _run_cone(sc, run, rng, w):
    st = unit_state(sc, run["x"], run["y"], run["angle"])
    orbit = integrate_orbit(sc, st, run["T"], run["h"])
    reports = []
    rows = []
    for k in run["k"]:
        rep = cone_invariance_test(sc, orbit, k, run["stride"])
        fine = cone_invariance_test(sc, orbit, k, max(1, run["stride"] // 2))
        d = rep.to_dict()
        d["refined_min_margin"] = fine.min_margin
        d["refined_verdict"] = fine.verdict
        reports.append(d)
        rows.append(np.column_stack([np.full(len(rep.samples), k), rep.samples]))
    xi0 = rng.standard_normal(2)
    w.csv("cone_samples", ("k", "t", "theta", "margin"), np.vstack(rows))
    return {"cones": reports, "fd_gap": cone_fd_check(sc, orbit, xi0 / np.linalg.norm(xi0))}


def _run_domination(sc, run, rng, w):
    states = [unit_state(sc, run["x"], run["y"], run["angle"])]
    for _ in range(run["norbits"] - 1):
        x, y, a = rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 2 * math.pi)
        states.append(unit_state(sc, x, y, a))
    est = domination_estimator(sc, states, run["l_max"], run["window"], run["nsamples"],
                               run["block"], run["h"])
    w.csv("bundles", ("cu1", "cu2", "cs1", "cs2"), np.column_stack([est.cu, est.cs]))
    return est.to_dict()


def _run_surgery(sc, run, rng, w):
    po = _periodic(sc, run)
    res = beta_surgery(sc, po, run["alpha"], h=run["h"])
    out = res.to_dict()
    out["orbit_before"] = po.to_dict()
    return out


def _run_franks(sc, run, rng, w):
    A = np.array([[0.0, 1.0], [run["q"], run["sigma"]]])
    windows = tuple(tuple(_number("run.windows", v) for v in win) for win in run["windows"])
    bumps = BumpProfile(radius=run["radius"], windows=windows, rho=run["rho"])
    path = constant_path(A)
    norms = []
    for _ in range(run["draws"]):
        z = rng.standard_normal(4)
        z /= np.linalg.norm(z)
        Z, _ = franks_tangent(path, FranksPerturbation.from_vector(z), bumps, run["nsteps"])
        norms.append(float(np.linalg.norm(Z)))
    bound = franks_lower_bound(path, bumps, None, 0, run["nsteps"])
    return {"k": bound["k"], "singular_values": bound["singular_values"],
            "k_sampled": min(norms) if norms else None, "draws": run["draws"]}


def _run_cslab(sc, run, rng, w):
    if not run["letters"]:
        raise ValidationError("run.letters", "at least one letter is required")
    letters = []
    for i, L in enumerate(run["letters"]):
        try:
            letters.append(cs_linalg.validate_cs(np.array(L, dtype=float), tol=1e-9))
        except (ValueError, TypeError) as exc:
            raise ValidationError(f"run.letters[{i}]", str(exc)) from None
    npts = len(letters)
    succ = tuple(run["successor"]) if run["successor"] else tuple(range(npts))
    trans = None
    if run["identity_transitions"]:
        I = cs_linalg.CSMatrix.identity(letters[0].n)
        trans = {(i, j): [I] for i in range(npts) for j in range(npts)}
    system = cs_linalg.PeriodicLinearSystem(tuple(range(npts)), tuple(letters), succ, trans)
    found = cs_linalg.homothety_search(system, run["eps"], run["max_len"], run["max_points"],
                                       run["require_strict"])
    out = {"letters": [
        {"mu": L.mu, "pairs": list(cs_linalg.eigen_pairing(L).pairs),
         "hyperbolic": cs_linalg.eigen_pairing(L).hyperbolic} for L in letters
    ]}
    out["homothety"] = None if found is None else {
        "word": [list(p) for p in found.word], "description": found.describe(),
        "scale": found.scale, "kind": found.kind, "product": found.product.entries,
    }
    if letters[0].dim == 2:
        out["complexify"] = [cs_linalg.mane_complexify(L, run["alpha"], run["grid"]) for L in letters]
    if run["split_F"] and run["split_G"]:
        ok, ratio = cs_linalg.l_domination_test(
            system, cs_linalg.SplitSpec(run["split_F"], run["split_G"]), run["l"])
        out["domination"] = {"l": run["l"], "dominated": ok, "worst_ratio": ratio}
    return out


RUNNERS = {
    "orbit": _run_orbit,
    "lyapunov": _run_lyapunov,
    "periodic": _run_periodic,
    "cone": _run_cone,
    "domination": _run_domination,
    "surgery": _run_surgery,
    "franks": _run_franks,
    "cslab": _run_cslab,
}


def run(config: ScenarioConfig, out_dir=None, seed: Optional[int] = None,
        emit: Optional[str] = None) -> RunReport:
    """Execute ``config``; artifacts go to ``out_dir`` (default: the config's output dir)."""
    out_dir = Path(out_dir if out_dir is not None else config.output["dir"])
    emit = emit or config.output["emit"]
    seed = int(config.run["seed"] if seed is None else seed)
    if seed < 0:
        raise ValidationError("seed", "must be a non-negative integer")
    rng = np.random.default_rng(seed)
    sc = config.scenario
    w = _Writer(out_dir, config.output["prefix"], emit)
    payload = {
        "schema": SCHEMA,
        "kind": config.kind,
        "scenario": sc.to_dict(),
        "scenario_hash": sc.digest(),
        "parameters": dict(config.run),
        "seed": seed,
    }
    t0 = time.perf_counter()
    try:
        result = RUNNERS[config.kind](sc, config.run, rng, w)
    except NumericalFailure as exc:
        payload.update(status="failed", error={"type": type(exc).__name__, "message": str(exc)})
        w.json(payload)
        return RunReport(sc.digest(), config.kind, "failed", {}, dict(w.outputs),
                         {"run": time.perf_counter() - t0}, [f"{type(exc).__name__}: {exc}"], 2)
    payload.update(status="ok", result=result)
    w.json(payload)
    return RunReport(sc.digest(), config.kind, "ok", _jsonable(result), dict(w.outputs),
                     {"run": time.perf_counter() - t0})


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="thermolab", description="Run a thermostat-flow scenario.")
    p.add_argument("--scenario", required=True, help="scenario file (TOML or JSON)")
    p.add_argument("--out", default=None, help="output directory (overrides [output] dir)")
    p.add_argument("--seed", type=int, default=None, help="seed for sampling grids and random draws")
    p.add_argument("--quiet", action="store_true", help="suppress the summary line")
    p.add_argument("--emit", choices=EMITS, default=None, help="artifact formats to write")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s")
    try:
        text = Path(args.scenario).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        print(f"error: cannot read scenario: {exc}", file=sys.stderr)
        return 1
    try:
        cfg = parse_scenario(text)
        report = run(cfg, args.out, args.seed, args.emit)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except NumericalFailure as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except ThermolabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    for d in report.diagnostics:
        print(f"numerical failure: {d}", file=sys.stderr)
    if not args.quiet:
        print(f"{report.kind} [{report.scenario_hash}] {report.status} in "
              f"{report.timings['run']:.2f}s -> {', '.join(sorted(report.outputs.values()))}")
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
