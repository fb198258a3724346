"""Scenario files: loading, validation, execution and golden-file comparison.

A scenario is a TOML document naming a game, a market (demand coefficients
``a, b, c`` or utility parameters ``alpha, beta, mu``, never both), capacities
and the optional sweep / dynamics / type-II sections.  Numbers may carry unit
suffixes such as ``"15 MHz"``; the suffix is documentation only.  ``"inf"``
marks an unlimited capacity.
"""
from __future__ import annotations

import copy
import csv
import hashlib
import io
import json
import math
import re
import sys
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import __version__
from .analysis import (
    SweepSpec,
    attractor_capture,
    bifurcation_sweep,
    write_attractor_csv,
    write_bifurcation_csv,
    write_lyapunov_csv,
)
from .dynamics import LearningRates, strict_best_run, strict_br_run
from .errors import MarketError, MissingGoldenError, ParseError, ValidationError
from .market import CapacitySpec, DemandModel, MarketParameters, derive_demand_model, params_from_demand_model
from .stackelberg import stackelberg_ne
from .type1 import duopoly_ne, oligopoly_ne_search, write_trace_jsonl
from .type2 import Type2Config, qosbest_run, type2_oligopoly_ne

GAMES = ("type1_static", "type1_stackelberg", "type1_dynamic_best", "type1_dynamic_br",
         "type2_static", "type2_dynamic")
STATIC_GAMES = ("type1_static", "type1_stackelberg", "type2_static")
DYNAMIC_GAMES = ("type1_dynamic_best", "type1_dynamic_br", "type2_dynamic")
SWEEP_KINDS = ("capacity", "capacity_grid", "theta", "gamma")
DEFAULT_TOL = 1e-9

_NUMBER = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?|[-+]?inf)\s*([A-Za-z/$%]*)\s*$")


def parse_quantity(value: Any, where: str) -> float:
    """Number from a TOML value; strings may carry a unit suffix (``"15 MHz"``)."""
    if isinstance(value, bool):
        raise ValueError(f"{where}: expected a number, got a boolean")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        m = _NUMBER.match(value)
        if m:
            return float(m.group(1))
    raise ValueError(f"{where}: cannot read {value!r} as a number")


def _vector(value, where, errors, length=None):
    if not isinstance(value, list):
        errors.append(f"{where}: expected a list")
        return None
    out = []
    for k, v in enumerate(value):
        try:
            out.append(parse_quantity(v, f"{where}[{k}]"))
        except ValueError as exc:
            errors.append(str(exc))
            return None
    if length is not None and len(out) != length:
        errors.append(f"{where}: expected {length} entries, got {len(out)}")
        return None
    return np.array(out)


def _scalar(table, key, where, errors, default=None, required=False):
    if key not in table:
        if required:
            errors.append(f"{where}.{key}: missing")
        return default
    try:
        return parse_quantity(table[key], f"{where}.{key}")
    except ValueError as exc:
        errors.append(str(exc))
        return default


def _int(table, key, where, errors, default=None, minimum=None):
    if key not in table:
        return default
    v = table[key]
    if isinstance(v, bool) or not isinstance(v, int):
        errors.append(f"{where}.{key}: expected an integer")
        return default
    if minimum is not None and v < minimum:
        errors.append(f"{where}.{key}: must be >= {minimum}")
        return default
    return v


@dataclass
class Variant:
    label: str
    caps: CapacitySpec
    rates: LearningRates | None = None


@dataclass
class ScenarioConfig:
    name: str
    game: str
    model: DemandModel
    params: MarketParameters | None
    caps: CapacitySpec
    raw: dict
    description: str = ""
    sweep: dict | None = None
    dynamics: dict = field(default_factory=dict)
    theta: float | None = None
    variants: list = field(default_factory=list)
    output_format: str = "csv"
    tolerances: dict = field(default_factory=dict)
    budget_seconds: float | None = None
    source: str | None = None

    @property
    def scenario_hash(self) -> str:
        canonical = json.dumps(self.raw, sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(canonical.encode()).hexdigest()

    def with_overrides(self, seed: int | None = None, tol: float | None = None) -> "ScenarioConfig":
        if seed is None and tol is None:
            return self
        cfg = copy.copy(self)
        cfg.raw = copy.deepcopy(self.raw)
        cfg.dynamics = dict(self.dynamics)
        dyn = cfg.raw.setdefault("dynamics", {})
        if seed is not None:
            cfg.dynamics["seed"] = int(seed)
            dyn["seed"] = int(seed)
        if tol is not None:
            cfg.dynamics["tol"] = float(tol)
            dyn["tol"] = float(tol)
        return cfg


# -- loading ------------------------------------------------------------------

def bundled_dir() -> Path:
    return Path(str(resources.files("spectrum_market") / "scenarios"))


def bundled_names() -> list[str]:
    return sorted(p.stem for p in bundled_dir().glob("fig*.toml"))


def resolve_scenario_path(name_or_path) -> Path:
    """Path to a scenario file, accepting bundled names with or without zero padding."""
    p = Path(name_or_path)
    if p.suffix == ".toml" and p.exists():
        return p
    stem = p.stem if p.suffix == ".toml" else str(name_or_path)
    m = re.match(r"^fig0*(\d+)(_.*)?$", stem)
    if m:
        wanted_num = int(m.group(1))
        for cand in bundled_names():
            cm = re.match(r"^fig0*(\d+)(_.*)?$", cand)
            if cm and int(cm.group(1)) == wanted_num and (m.group(2) in (None, cm.group(2))):
                return bundled_dir() / f"{cand}.toml"
    cand = bundled_dir() / f"{stem}.toml"
    if cand.exists():
        return cand
    raise ParseError(f"no scenario file or bundled scenario named {name_or_path!r}")


def load_scenario(path) -> ScenarioConfig:
    src = resolve_scenario_path(path)
    try:
        raw = tomllib.loads(src.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(f"{src}: {exc}") from exc
    cfg = scenario_from_dict(raw, default_name=src.stem)
    cfg.source = str(src)
    return cfg


def _market(raw, errors):
    table = raw.get("market")
    if not isinstance(table, dict):
        errors.append("market: missing section")
        return None, None
    demand_keys = {"a", "b", "c"} & table.keys()
    utility_keys = {"alpha", "beta", "mu"} & table.keys()
    if demand_keys and utility_keys:
        errors.append("market: give either demand coefficients (a, b, c) or utility parameters "
                      "(alpha, beta, mu), not both")
        return None, None
    if demand_keys:
        a = _vector(table.get("a"), "market.a", errors)
        b = _vector(table.get("b"), "market.b", errors)
        c = table.get("c")
        if a is None or b is None or c is None:
            if c is None:
                errors.append("market.c: missing")
            return None, None
        try:
            if isinstance(c, list):
                cm = np.array([[parse_quantity(x, "market.c") for x in row] for row in c])
            else:
                cm = parse_quantity(c, "market.c")
            if np.ndim(cm) == 0:
                model = DemandModel(a, b, np.where(np.eye(a.size, dtype=bool), 0.0, cm))
            else:
                model = DemandModel(a, b, cm)
        except (ValueError, MarketError) as exc:
            errors.append(f"market: {exc}")
            return None, None
        params = None
        try:
            params = params_from_demand_model(model, strict=False)
        except MarketError:
            params = None
        return model, params
    if utility_keys:
        strict = table.get("strict", True)
        alpha = _vector(table.get("alpha"), "market.alpha", errors)
        beta = _vector(table.get("beta"), "market.beta", errors)
        mu = _scalar(table, "mu", "market", errors, required=True)
        if alpha is None or beta is None or mu is None:
            return None, None
        if strict and not (mu > 0 and np.all(beta > mu)):
            errors.append("market.beta: strict validity requires beta_i > mu > 0 for every player "
                          "(positive definiteness of the substitutability matrix)")
            return None, None
        try:
            params = MarketParameters(alpha, beta, mu, strict=bool(strict))
            return derive_demand_model(params), params
        except (ValueError, MarketError) as exc:
            errors.append(f"market: {exc}")
            return None, None
    errors.append("market: no coefficients given")
    return None, None


def _caps(table, n, where, errors):
    if "q_avail" in table:
        q = _vector(table["q_avail"], f"{where}.q_avail", errors, length=n)
        if q is None:
            return None
        try:
            return CapacitySpec(q)
        except MarketError as exc:
            errors.append(f"{where}.q_avail: {exc}")
            return None
    if {"w", "load", "rate"} <= table.keys():
        w = _vector(table["w"], f"{where}.w", errors, length=n)
        load = _vector(table["load"], f"{where}.load", errors, length=n)
        rate = _vector(table["rate"], f"{where}.rate", errors, length=n)
        if w is None or load is None or rate is None:
            return None
        try:
            return CapacitySpec.from_load(w, load, rate)
        except MarketError as exc:
            errors.append(f"{where}: {exc}")
            return None
    errors.append(f"{where}: need q_avail or all of w, load, rate")
    return None


def _rates(value, where, errors):
    vec = _vector(value, where, errors, length=2)
    if vec is None:
        return None
    try:
        return LearningRates(vec)
    except MarketError as exc:
        errors.append(f"{where}: {exc}")
        return None


def scenario_from_dict(raw: dict, default_name: str = "scenario") -> ScenarioConfig:
    """Validate a parsed scenario; every problem is collected before raising."""
    errors: list[str] = []
    name = raw.get("name", default_name)
    game = raw.get("game")
    if game not in GAMES:
        errors.append(f"game: expected one of {', '.join(GAMES)}, got {game!r}")
    model, params = _market(raw, errors)
    n = model.n if model is not None else None
    caps = None
    if n is not None:
        cap_table = raw.get("capacities")
        if not isinstance(cap_table, dict):
            errors.append("capacities: missing section")
        else:
            caps = _caps(cap_table, n, "capacities", errors)

    sweep = None
    if "sweep" in raw:
        sweep = _validate_sweep(raw["sweep"], game, errors)

    dyn_raw = raw.get("dynamics", {})
    dynamics: dict = {}
    if not isinstance(dyn_raw, dict):
        errors.append("dynamics: expected a table")
        dyn_raw = {}
    if "p0" in dyn_raw:
        dynamics["p0"] = _vector(dyn_raw["p0"], "dynamics.p0", errors, length=n)
    if "rates" in dyn_raw:
        dynamics["rates"] = _rates(dyn_raw["rates"], "dynamics.rates", errors)
    for key in ("tol", "eps"):
        if key in dyn_raw:
            val = _scalar(dyn_raw, key, "dynamics", errors)
            if val is not None and (val < 0 or (key == "tol" and val == 0)):
                errors.append(f"dynamics.{key}: must be {'positive' if key == 'tol' else 'nonnegative'}")
            dynamics[key] = val
    for key, minimum in (("max_iter", 1), ("n_steps", 1), ("seed", 0), ("n_points", 1),
                         ("transient", 0), ("lyapunov_steps", 1)):
        val = _int(dyn_raw, key, "dynamics", errors, minimum=minimum)
        if val is not None:
            dynamics[key] = val

    theta = None
    if "type2" in raw:
        theta = _scalar(raw["type2"], "theta", "type2", errors, required=True)
        if theta is not None and not theta > 0:
            errors.append("type2.theta: must be positive")
    elif game in ("type2_static", "type2_dynamic") and not (sweep and sweep.get("kind") == "theta"):
        errors.append("type2.theta: missing for a type-II game")

    variants = []
    for k, var in enumerate(raw.get("variant", [])):
        where = f"variant[{k}]"
        if not isinstance(var, dict) or "label" not in var:
            errors.append(f"{where}: needs a label")
            continue
        vcaps = _caps(var, n, where, errors) if ("q_avail" in var or "w" in var) else caps
        vrates = _rates(var["rates"], f"{where}.rates", errors) if "rates" in var else dynamics.get("rates")
        if not re.match(r"^[A-Za-z0-9_\-]+$", str(var["label"])):
            errors.append(f"{where}.label: use letters, digits, '-' or '_'")
        variants.append(Variant(str(var["label"]), vcaps, vrates))

    out = raw.get("output", {})
    fmt = out.get("format", "csv")
    if fmt not in ("csv", "jsonl"):
        errors.append("output.format: expected csv or jsonl")
    tolerances = {}
    for col, tol in out.get("tolerances", {}).items():
        try:
            tolerances[col] = parse_quantity(tol, f"output.tolerances.{col}")
        except ValueError as exc:
            errors.append(str(exc))
    budget = _scalar(raw, "budget_seconds", "scenario", errors)

    if game == "type1_dynamic_br" and "rates" not in dynamics and not any(v.rates for v in variants) \
            and not (sweep and sweep.get("kind") == "gamma"):
        errors.append("dynamics.rates: required for type1_dynamic_br")
    if game in ("type1_dynamic_best", "type1_dynamic_br", "type2_dynamic") and n is not None and n != 2:
        errors.append("market: price dynamics are defined for two players")
    if game == "type1_stackelberg" and n is not None and n != 2:
        errors.append("market: leader-follower pricing is defined for two players")
    if game in ("type2_static", "type2_dynamic") and caps is not None and not np.all(caps.limited):
        errors.append("capacities.q_avail: type-II games need finite capacities")
    if game in ("type2_static", "type2_dynamic") and model is not None and params is None:
        errors.append("market: demand coefficients do not correspond to a utility model")

    if errors:
        raise ValidationError(errors)
    return ScenarioConfig(
        name=name, game=game, model=model, params=params, caps=caps, raw=raw,
        description=raw.get("description", ""), sweep=sweep, dynamics=dynamics, theta=theta,
        variants=variants, output_format=fmt, tolerances=tolerances, budget_seconds=budget,
    )


def _validate_sweep(table, game, errors):
    if not isinstance(table, dict):
        errors.append("sweep: expected a table")
        return None
    kind = table.get("kind")
    if kind not in SWEEP_KINDS:
        errors.append(f"sweep.kind: expected one of {', '.join(SWEEP_KINDS)}")
        return None
    out = {"kind": kind}
    lo = _scalar(table, "from", "sweep", errors, required=True)
    hi = _scalar(table, "to", "sweep", errors, required=True)
    steps = _int(table, "steps", "sweep", errors, minimum=2)
    if steps is None:
        errors.append("sweep.steps: missing or invalid")
    if lo is not None and hi is not None and not lo < hi:
        errors.append("sweep: 'from' must be below 'to'")
    out.update({"from": lo, "to": hi, "steps": steps})
    if kind == "capacity":
        player = _int(table, "player", "sweep", errors, default=1, minimum=1)
        out["player"] = player
    if kind == "theta":
        spacing = table.get("spacing", "linear")
        if spacing not in ("linear", "log"):
            errors.append("sweep.spacing: expected linear or log")
        out["spacing"] = spacing
    if kind == "gamma":
        param = table.get("parameter")
        if param not in ("gamma1", "gamma2"):
            errors.append("sweep.parameter: expected gamma1 or gamma2")
        out["parameter"] = param
        out["transient"] = _int(table, "transient", "sweep", errors, default=1000, minimum=0)
        out["samples"] = _int(table, "samples", "sweep", errors, default=200, minimum=1)
        out["lyapunov_steps"] = _int(table, "lyapunov_steps", "sweep", errors, default=None, minimum=1)
        if game != "type1_dynamic_br":
            errors.append("sweep.kind: gamma sweeps need game = type1_dynamic_br")
    return out


# -- execution ----------------------------------------------------------------

def fmt_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


class _CsvOut:
    """CSV with a scenario-hash comment line, LF endings and shortest round-trip floats."""

    def __init__(self, scenario_hash: str, header):
        self.buf = io.StringIO()
        self.buf.write(f"# scenario_hash={scenario_hash}\n")
        self.writer = csv.writer(self.buf, lineterminator="\n")
        self.writer.writerow(header)

    def row(self, values):
        self.writer.writerow([fmt_value(v) for v in values])

    def text(self) -> str:
        return self.buf.getvalue()


def _with_hash(scenario_hash: str, body: str) -> str:
    return f"# scenario_hash={scenario_hash}\n" + body


def _sweep_values(sweep) -> np.ndarray:
    if sweep.get("spacing") == "log":
        return np.geomspace(sweep["from"], sweep["to"], sweep["steps"])
    return np.linspace(sweep["from"], sweep["to"], sweep["steps"])


def _capacity_points(cfg: ScenarioConfig):
    """Capacity vectors visited by a capacity sweep (or the single configured one)."""
    sweep = cfg.sweep
    base = np.array(cfg.caps.q_avail, dtype=float)
    if sweep is None:
        return [base]
    if sweep["kind"] == "capacity":
        pts = []
        for v in _sweep_values(sweep):
            q = base.copy()
            q[sweep["player"] - 1] = v
            pts.append(q)
        return pts
    if sweep["kind"] == "capacity_grid":
        vals = _sweep_values(sweep)
        return [np.array([q1, q2]) for q2 in vals for q1 in vals]
    return [base]


def _run_type1_static(cfg, files, records):
    out = _CsvOut(cfg.scenario_hash, ["q1a", "q2a", "case", "p1", "p2", "q1", "q2", "rev1", "rev2", "status"]
                  if cfg.model.n == 2 else ["point", "player", "qa", "p", "q", "rev", "binding", "status"])
    traces = io.StringIO()
    for k, q in enumerate(_capacity_points(cfg)):
        caps = CapacitySpec(q)
        try:
            if cfg.model.n == 2:
                res = duopoly_ne(cfg.model, caps)
                _, trace = oligopoly_ne_search(cfg.model, caps)
            else:
                res, trace = oligopoly_ne_search(cfg.model, caps)
            status = "ok"
        except MarketError as exc:
            res, trace, status = None, [], type(exc).__name__
        write_trace_jsonl(trace, traces)
        if cfg.model.n == 2:
            if res is None:
                out.row([q[0], q[1], "", *[math.nan] * 6, status])
            else:
                out.row([q[0], q[1], res.case_label.value, *res.prices, *res.demands, *res.payoffs, status])
        else:
            for i in range(cfg.model.n):
                if res is None:
                    out.row([k, i + 1, q[i], math.nan, math.nan, math.nan, "", status])
                else:
                    out.row([k, i + 1, q[i], res.prices[i], res.demands[i], res.payoffs[i],
                             int(res.binding[i]), status])
        if res is not None:
            records.append({"point": k, "q_avail": [fmt_value(x) for x in q], **res.as_record()})
    files["equilibria.csv"] = out.text()
    files["search_trace.jsonl"] = traces.getvalue()


def _run_stackelberg(cfg, files, records):
    out = _CsvOut(cfg.scenario_hash, ["q1a", "q2a", "leader", "case", "p1", "p2", "q1", "q2", "rev1", "rev2", "status"])
    for q in _capacity_points(cfg):
        caps = CapacitySpec(q)
        rows = []
        try:
            st = duopoly_ne(cfg.model, caps)
            rows.append(("static", st.case_label.value, st.prices, st.demands, st.payoffs))
            for leader in (0, 1):
                r = stackelberg_ne(cfg.model, caps, leader)
                rows.append((str(leader + 1), r.case_label.value, r.prices, r.demands, r.payoffs))
                records.append({"q_avail": [fmt_value(x) for x in q], **r.as_record()})
            status = "ok"
        except MarketError as exc:
            status = type(exc).__name__
        if status != "ok":
            out.row([q[0], q[1], "", "", *[math.nan] * 6, status])
        for leader, case, p, d, r in rows:
            out.row([q[0], q[1], leader, case, *p, *d, *r, status])
    files["stackelberg.csv"] = out.text()


def _run_type2_static(cfg, files, records):
    n = cfg.model.n
    header = ["theta", *[f"q{i + 1}a" for i in range(n)], *[f"p{i + 1}" for i in range(n)],
              *[f"q{i + 1}" for i in range(n)], *[f"u{i + 1}" for i in range(n)], "z_star", "residual", "status"]
    out = _CsvOut(cfg.scenario_hash, header)
    if cfg.sweep and cfg.sweep["kind"] == "theta":
        points = [(float(th), cfg.caps.q_avail) for th in _sweep_values(cfg.sweep)]
    else:
        points = [(cfg.theta, q) for q in _capacity_points(cfg)]
    for theta, q in points:
        try:
            t2 = Type2Config(theta, CapacitySpec(q))
            res, solve = type2_oligopoly_ne(cfg.model, cfg.params, t2)
            out.row([theta, *q, *res.prices, *res.demands, *res.payoffs, solve.z_star, solve.residual, "ok"])
            records.append({"theta": theta, "q_avail": [fmt_value(x) for x in q], **res.as_record(),
                            **solve.as_record()})
        except MarketError as exc:
            out.row([theta, *q, *[math.nan] * (3 * n + 2), type(exc).__name__])
    files["type2_equilibria.csv"] = out.text()


def _variants(cfg):
    if cfg.variants:
        return cfg.variants
    return [Variant("base", cfg.caps, cfg.dynamics.get("rates"))]


def _orbit_text(cfg, rec, tags=None) -> str:
    buf = io.StringIO()
    if tags is None:
        rec.write_csv(buf)
    else:
        buf.write("t,p1,p2,branch1,branch2\n")
        for t, row in enumerate(rec.trajectory):
            tg = ("initial", "initial") if t == 0 else tuple(tags[int(x)] for x in rec.rule_taken[t - 1])
            buf.write(f"{t},{fmt_value(row[0])},{fmt_value(row[1])},{tg[0]},{tg[1]}\n")
    return _with_hash(cfg.scenario_hash, buf.getvalue())


def _run_dynamic(cfg, files, records):
    dyn = cfg.dynamics
    p0 = dyn.get("p0", np.array([5.0, 5.0]))
    seed = dyn.get("seed", 0)
    if cfg.game == "type1_dynamic_br" and cfg.sweep and cfg.sweep["kind"] == "gamma":
        return _run_gamma_sweep(cfg, files, records)
    for var in _variants(cfg):
        if cfg.game == "type1_dynamic_best":
            rec = strict_best_run(cfg.model, var.caps, p0, tol=dyn.get("tol", 1e-6), max_iter=dyn.get("max_iter", 1000))
            files[f"orbit_{var.label}.csv"] = _orbit_text(cfg, rec)
        elif cfg.game == "type1_dynamic_br":
            if dyn.get("n_points"):
                pts = attractor_capture(cfg.model, var.caps, var.rates, p0, dyn["n_points"],
                                        dyn.get("transient", 1000), seed=seed, eps=dyn.get("eps", 0.01))
                buf = io.StringIO()
                write_attractor_csv(pts, buf)
                files[f"attractor_{var.label}.csv"] = _with_hash(cfg.scenario_hash, buf.getvalue())
                records.append({"variant": var.label, "points": len(pts),
                                "p1_range": [float(pts[:, 0].min()), float(pts[:, 0].max())],
                                "p2_range": [float(pts[:, 1].min()), float(pts[:, 1].max())]})
                continue
            rec = strict_br_run(cfg.model, var.caps, var.rates, p0, dyn.get("n_steps", 500), seed=seed,
                                eps=dyn.get("eps", 0.01), tol=dyn.get("tol", 1e-9))
            files[f"orbit_{var.label}.csv"] = _orbit_text(cfg, rec)
        else:
            t2 = Type2Config(cfg.theta, var.caps)
            rec = qosbest_run(cfg.model, t2, p0, tol=dyn.get("tol", 1e-10), max_iter=dyn.get("max_iter", 1000),
                              params=cfg.params)
            files[f"orbit_{var.label}.csv"] = _orbit_text(cfg, rec, tags={0: "root_plus", 1: "root_minus"})
        records.append({"variant": var.label, "iterations": rec.iterations, "converged": rec.converged,
                        "limit": None if rec.limit is None else [float(x) for x in rec.limit],
                        "ne_gap": rec.ne_gap})


def _run_gamma_sweep(cfg, files, records):
    sw, dyn = cfg.sweep, cfg.dynamics
    spec = SweepSpec(sw["parameter"], sw["from"], sw["to"], sw["steps"], sw["transient"], sw["samples"],
                     tuple(dyn.get("p0", (5.0, 5.0))))
    rates = dyn.get("rates") or LearningRates([0.01, 0.01])
    report = bifurcation_sweep(cfg.model, cfg.caps, spec, rates, seed=dyn.get("seed", 0),
                               eps=dyn.get("eps", 0.01), lyapunov_steps=sw.get("lyapunov_steps"))
    if report.lyapunov is not None:
        buf = io.StringIO()
        write_lyapunov_csv(report, buf)
        files["lyapunov.csv"] = _with_hash(cfg.scenario_hash, buf.getvalue())
    else:
        buf = io.StringIO()
        write_bifurcation_csv(report, buf)
        files["bifurcation.csv"] = _with_hash(cfg.scenario_hash, buf.getvalue())
    records.append({
        "parameter": spec.parameter,
        "first_doubling": report.first_doubling(player=spec.index),
        "first_positive_lyapunov": report.first_positive_lyapunov(),
        "diverged_points": int(np.sum(report.diverged)),
    })


_RUNNERS = {
    "type1_static": _run_type1_static,
    "type1_stackelberg": _run_stackelberg,
    "type2_static": _run_type2_static,
    "type1_dynamic_best": _run_dynamic,
    "type1_dynamic_br": _run_dynamic,
    "type2_dynamic": _run_dynamic,
}


@dataclass
class ExperimentManifest:
    scenario: str
    scenario_hash: str
    version: str
    files: dict
    timings: dict
    out_dir: str | None = None
    budget_seconds: float | None = None
    texts: dict = field(default_factory=dict, repr=False)  # file contents, for in-memory golden checks

    @property
    def within_budget(self) -> bool:
        return self.budget_seconds is None or self.timings.get("total", 0.0) <= self.budget_seconds

    def as_dict(self) -> dict:
        return {"scenario": self.scenario, "scenario_hash": self.scenario_hash, "version": self.version,
                "files": self.files, "timings": self.timings, "budget_seconds": self.budget_seconds}


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def run_scenario(cfg: ScenarioConfig, out_dir=None, seed: int | None = None, tol: float | None = None) -> ExperimentManifest:
    """Execute a scenario, write its files (when ``out_dir`` is given) and return the manifest."""
    cfg = cfg.with_overrides(seed, tol)
    files: dict[str, str] = {}
    records: list = []
    start = time.perf_counter()
    _RUNNERS[cfg.game](cfg, files, records)
    files["records.jsonl"] = "".join(json.dumps(r, sort_keys=True, default=_json_default) + "\n" for r in records)
    elapsed = time.perf_counter() - start
    manifest = ExperimentManifest(cfg.name, cfg.scenario_hash, __version__,
                                  {name: sha256_text(text) for name, text in sorted(files.items())},
                                  {"total": elapsed}, budget_seconds=cfg.budget_seconds)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            with open(out / name, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        with open(out / "manifest.json", "w", encoding="utf-8", newline="\n") as fh:
            json.dump(manifest.as_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        manifest.out_dir = str(out)
    manifest.texts = files
    return manifest


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


# -- golden files ---------------------------------------------------------------

def golden_root() -> Path:
    return bundled_dir() / "golden"


def write_golden(manifest: ExperimentManifest, golden_dir) -> None:
    gd = Path(golden_dir)
    gd.mkdir(parents=True, exist_ok=True)
    for name, text in manifest.texts.items():
        with open(gd / name, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    with open(gd / "checksums.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump({"scenario_hash": manifest.scenario_hash, "files": manifest.files}, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_table(text: str):
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    return (rows[0], rows[1:]) if rows else ([], [])


def _as_float(s: str):
    try:
        return float(s)
    except ValueError:
        return None


@dataclass
class GoldenReport:
    passed: bool
    max_deviation: dict
    failures: list
    checksums_match: bool

    def lines(self) -> list[str]:
        out = [f"golden comparison: {'PASS' if self.passed else 'FAIL'} "
               f"(checksums {'identical' if self.checksums_match else 'differ'})"]
        for fname, cols in sorted(self.max_deviation.items()):
            for col, dev in sorted(cols.items()):
                out.append(f"  {fname}:{col} max deviation {dev:.3g}")
        out.extend(f"  FAIL {f}" for f in self.failures)
        return out


def verify_golden(manifest: ExperimentManifest, golden_dir, tolerances: dict | None = None,
                  tol_override: float | None = None) -> GoldenReport:
    """Compare a run against committed golden files column by column."""
    gd = Path(golden_dir)
    sums_path = gd / "checksums.json"
    if not sums_path.exists():
        raise MissingGoldenError(f"no golden files under {gd}")
    golden_sums = json.loads(sums_path.read_text(encoding="utf-8"))["files"]
    tolerances = dict(tolerances or {})
    failures = []
    max_dev: dict = {}
    texts = manifest.texts or {
        name: (Path(manifest.out_dir) / name).read_text(encoding="utf-8") for name in manifest.files}
    if set(golden_sums) != set(manifest.files):
        failures.append(f"file set differs: golden {sorted(golden_sums)} vs run {sorted(manifest.files)}")
    for name in sorted(set(golden_sums) & set(manifest.files)):
        if not name.endswith(".csv"):
            if golden_sums[name] != manifest.files[name]:
                gold_text = (gd / name).read_text(encoding="utf-8")
                if gold_text != texts[name] and not _jsonl_close(gold_text, texts[name], tol_override or DEFAULT_TOL):
                    failures.append(f"{name}: content differs")
            continue
        gpath = gd / name
        if not gpath.exists():
            raise MissingGoldenError(f"golden file {gpath} missing")
        g_head, g_rows = _read_table(gpath.read_text(encoding="utf-8"))
        r_head, r_rows = _read_table(texts[name])
        if g_head != r_head:
            failures.append(f"{name}: header {r_head} differs from golden {g_head}")
            continue
        if len(g_rows) != len(r_rows):
            failures.append(f"{name}: {len(r_rows)} rows, golden has {len(g_rows)}")
            continue
        devs = max_dev.setdefault(name, {})
        for j, col in enumerate(g_head):
            tol = tol_override if tol_override is not None else tolerances.get(col, tolerances.get("default", DEFAULT_TOL))
            worst = 0.0
            for gr, rr in zip(g_rows, r_rows):
                gv, rv = _as_float(gr[j]), _as_float(rr[j])
                if gv is None or rv is None:
                    if gr[j] != rr[j]:
                        failures.append(f"{name}:{col} text value {rr[j]!r} != golden {gr[j]!r}")
                        break
                    continue
                if math.isnan(gv) and math.isnan(rv):
                    continue
                if gv == rv:
                    continue
                dev = abs(gv - rv)
                worst = max(worst, dev if math.isfinite(dev) else math.inf)
            devs[col] = worst
            if worst > tol:
                failures.append(f"{name}:{col} deviates by {worst:.3g} > {tol:g}")
    # hash the golden files on disk, so an edited golden cannot hide behind its checksums.json
    on_disk = {name: sha256_text((gd / name).read_text(encoding="utf-8"))
               for name in golden_sums if (gd / name).exists()}
    checks = on_disk == manifest.files
    return GoldenReport(not failures, max_dev, failures, checks)


def _jsonl_close(a: str, b: str, tol: float) -> bool:
    la, lb = a.splitlines(), b.splitlines()
    if len(la) != len(lb):
        return False
    for x, y in zip(la, lb):
        if not _close(json.loads(x), json.loads(y), tol):
            return False
    return True


def _close(x, y, tol) -> bool:
    if isinstance(x, dict) and isinstance(y, dict):
        return x.keys() == y.keys() and all(_close(x[k], y[k], tol) for k in x)
    if isinstance(x, list) and isinstance(y, list):
        return len(x) == len(y) and all(_close(u, v, tol) for u, v in zip(x, y))
    if isinstance(x, float) or isinstance(y, float):
        try:
            return abs(float(x) - float(y)) <= tol or (math.isnan(float(x)) and math.isnan(float(y)))
        except (TypeError, ValueError):
            return False
    return x == y


def validate_or_errors(path) -> list[str]:
    """Field-level errors of a scenario file, empty when it is valid."""
    try:
        load_scenario(path)
    except ValidationError as exc:
        return exc.errors
    except ParseError as exc:
        return [str(exc)]
    return []
