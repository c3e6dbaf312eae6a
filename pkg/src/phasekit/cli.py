"""Config-driven command line for the oscillatory-integral toolkit.

A run is described by one JSON document with a top-level "mode":

    oracle       brute-force quadrature of the configured integral
    eval         stationary-phase value (1-d window, or a full reduction)
    compare      both at once, with a verdict per row
    inert-check  sampled derivative-bound certificate for a weight family
    example-ci   the built-in 3-variable reduction, end to end

Expressions are strings in the core grammar.  Phases are written in
whole-oscillation units, "f" meaning exp(2*pi*i*f); they are multiplied by
2*pi once at load so everything downstream runs in radians.  Weights are
taken literally.

`parse_config` returns a fully validated RunConfig or raises with every
located problem; it never accepts a config partially.  `render_config`
emits the canonical JSON form, and parse(render(cfg)) == cfg.

Reports land in --out as report.csv and report.txt, both with header rows.
A parameter sweep also writes sweep.csv with (parameter, |I|, arg I) rows,
where I is the oracle value when one was computed and the asymptotic value
otherwise.  Exit codes: 0 every verdict passed, 1 a verdict failed, 2 bad
usage or config, 3 the numerics gave up (quadrature budget, unusable
window, lost root).  PHASEKIT_THREADS caps worker threads.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import expr as ex
from . import kernel
from .errors import ExprParseError, PhasekitError, SchemaError
from .expansion import sp_expand
from .inert import FamilySpec, check_inert
from .oracle import IntegralSpec, quad1d, quad_nd
from .pipeline import Ambient, PipelineSpec, ci_example, ci_oracle_spec, run
from .stationary import NonStationary, SPContext, classify

MODES = ("oracle", "eval", "compare", "inert-check", "example-ci")

ABS_FLOOR = 1e-12          # verdicts never demand agreement below this
VERDICT_SLACK = 5.0        # allowed |diff| per unit of truncation budget
NS_MAGNITUDE_SLACK = 1e3   # allowance over Z*R^-3 for non-stationary rows
SCALE_GRID = 257           # nodes used to size the phase on a window
_TWO_PI = 2.0 * math.pi

_COMMON_KEYS = {"mode", "n_max", "tol", "seed", "abs_floor"}
_MODE_KEYS = {
    "oracle": {"integral", "sweep"},
    "eval": {"integral", "window", "scales", "sweep", "reduction"},
    "compare": {"integral", "window", "scales", "sweep", "reduction"},
    "inert-check": {"family", "max_order", "n_param_samples", "n_point_samples"},
    "example-ci": {"example"},
}


# ---------------------------------------------------------------------------
# configuration objects


@dataclass(frozen=True)
class SweepSpec:
    """One parameter swept over explicit values, one report row each."""

    param: str
    values: tuple[float, ...]


@dataclass(frozen=True)
class Scales:
    """Window scales for 1-d runs; None means sized from the phase."""

    y: float | None = None
    x: float | None = None
    r: float | None = None


@dataclass(frozen=True)
class FamilyConfig:
    family: FamilySpec
    max_order: int
    n_param_samples: int
    n_point_samples: int


@dataclass(frozen=True)
class ExampleConfig:
    P: float
    ratios: tuple[float, float, float]
    q: float
    delta: float


@dataclass(frozen=True)
class RunConfig:
    """A parsed, validated run; `canonical` is its normalized JSON text."""

    mode: str
    n_max: int
    tol: float
    seed: int
    abs_floor: float
    integral: IntegralSpec | None = None
    window: tuple[float, float] | None = None
    scales: Scales | None = None
    sweep: SweepSpec | None = None
    reduction: PipelineSpec | None = None
    family: FamilyConfig | None = None
    example: ExampleConfig | None = None
    canonical: str = ""


def render_config(cfg: RunConfig) -> str:
    """Canonical JSON for a parsed config; parse_config inverts it."""
    return cfg.canonical


# ---------------------------------------------------------------------------
# parsing and validation


class _Errors:
    def __init__(self):
        self.items: list[tuple[str, str]] = []

    def add(self, path: str, msg: str) -> None:
        self.items.append((path, msg))

    def raise_if_any(self) -> None:
        if not self.items:
            return
        if len(self.items) == 1:
            path, msg = self.items[0]
            raise SchemaError(msg, path)
        text = "; ".join(f"{p}: {m}" for p, m in self.items)
        raise SchemaError(text, self.items[0][0])


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _get_pos(doc: dict, key: str, errs: _Errors, default: float) -> float:
    v = doc.get(key, default)
    if not _is_num(v) or not v > 0:
        errs.add(key, "must be a positive number")
        return default
    return float(v)


def _get_int(doc: dict, key: str, errs: _Errors, default: int,
             lo: int = 0, hi: int | None = None) -> int:
    v = doc.get(key, default)
    if isinstance(v, bool) or not isinstance(v, int):
        errs.add(key, "must be an integer")
        return default
    if v < lo or (hi is not None and v > hi):
        top = f"..{hi}" if hi is not None else " or more"
        errs.add(key, f"must be {lo}{top}")
        return default
    return v


def _get_expr(obj: dict, key: str, path: str, errs: _Errors) -> ex.Expr | None:
    v = obj.get(key)
    if not isinstance(v, str) or not v.strip():
        errs.add(f"{path}.{key}", "must be a nonempty expression string")
        return None
    return ex.parse(v)


def _get_interval(v, path: str, errs: _Errors) -> tuple[float, float] | None:
    if (not isinstance(v, list) or len(v) != 2 or not all(_is_num(u) for u in v)
            or not v[0] < v[1]):
        errs.add(path, "must be a pair [lo, hi] with lo < hi")
        return None
    return (float(v[0]), float(v[1]))


def _parse_integral(obj, path: str, errs: _Errors, sweep_names: set[str]):
    """Returns (spec, normalized dict) or (None, None)."""
    if not isinstance(obj, dict):
        errs.add(path, "must be an object")
        return None, None
    start = len(errs.items)
    for k in sorted(obj):
        if k not in {"dimension", "phase", "weight", "box", "params"}:
            errs.add(f"{path}.{k}", "unknown key")
    d = obj.get("dimension")
    if isinstance(d, bool) or not isinstance(d, int) or not 1 <= d <= 3:
        errs.add(f"{path}.dimension", "must be an integer in 1..3")
        return None, None

    phase = _get_expr(obj, "phase", path, errs)
    weight = _get_expr(obj, "weight", path, errs)

    box_raw = obj.get("box")
    pairs = []
    if isinstance(box_raw, list) and d == 1 and len(box_raw) == 2 and _is_num(box_raw[0]):
        box_raw = [box_raw]  # accept a flat pair in one dimension
    if not isinstance(box_raw, list) or len(box_raw) != d:
        errs.add(f"{path}.box", f"must list one [lo, hi] interval per variable ({d})")
    else:
        for i, pair in enumerate(box_raw):
            iv = _get_interval(pair, f"{path}.box[{i}]", errs)
            if iv is not None:
                pairs.append(iv)

    params_raw = obj.get("params", {})
    params = {}
    if not isinstance(params_raw, dict):
        errs.add(f"{path}.params", "must be an object of name: number")
    else:
        for name in sorted(params_raw):
            if not _is_num(params_raw[name]):
                errs.add(f"{path}.params.{name}", "must be a finite number")
            else:
                params[name] = float(params_raw[name])

    if phase is not None and weight is not None:
        bad_vars = {v for e in (phase, weight) for v in ex.free_vars(e) if v >= d}
        for v in sorted(bad_vars):
            errs.add(f"{path}", f"x{v + 1} is beyond dimension {d}")
        unbound = (ex.free_params(phase) | ex.free_params(weight)) \
            - set(params) - sweep_names
        for name in sorted(unbound):
            errs.add(f"{path}.params", f"parameter {name} is not bound")

    if len(errs.items) > start or phase is None or weight is None or len(pairs) != d:
        return None, None
    spec = IntegralSpec(
        dimension=d,
        phase=ex.Mul(ex.Const(_TWO_PI), phase),
        weight=weight,
        box=tuple(pairs),
        params=params,
    )
    norm = {
        "dimension": d,
        "phase": obj["phase"],
        "weight": obj["weight"],
        "box": [[a, b] for a, b in pairs],
        "params": params,
    }
    return spec, norm


def _parse_sweep(obj, errs: _Errors):
    if not isinstance(obj, dict):
        errs.add("sweep", "must be an object {param, values}")
        return None, None
    for k in sorted(obj):
        if k not in {"param", "values"}:
            errs.add(f"sweep.{k}", "unknown key")
    name = obj.get("param")
    vals = obj.get("values")
    if not isinstance(name, str) or not name:
        errs.add("sweep.param", "must be a parameter name")
        return None, None
    if not isinstance(vals, list) or not vals or not all(_is_num(v) for v in vals):
        errs.add("sweep.values", "must be a nonempty list of numbers")
        return None, None
    sw = SweepSpec(name, tuple(float(v) for v in vals))
    return sw, {"param": name, "values": list(sw.values)}


def _parse_scales(obj, errs: _Errors):
    if not isinstance(obj, dict):
        errs.add("scales", "must be an object with optional y, x, r")
        return None, None
    got = {}
    for k in sorted(obj):
        if k not in {"y", "x", "r"}:
            errs.add(f"scales.{k}", "unknown key")
        elif not _is_num(obj[k]) or not obj[k] > 0:
            errs.add(f"scales.{k}", "must be a positive number")
        else:
            got[k] = float(obj[k])
    return Scales(got.get("y"), got.get("x"), got.get("r")), got


def _parse_reduction(obj, integral: IntegralSpec | None, errs: _Errors):
    if not isinstance(obj, dict) or integral is None:
        errs.add("reduction", "must be an object (and needs a valid integral)")
        return None, None
    for k in sorted(obj):
        if k not in {"order", "windows", "ambient", "x_inert", "predicted"}:
            errs.add(f"reduction.{k}", "unknown key")
    d = integral.dimension
    order = obj.get("order")
    if (not isinstance(order, list) or len(order) != d
            or any(isinstance(v, bool) or not isinstance(v, int) for v in order)):
        errs.add("reduction.order", f"must list {d} variable indices")
        return None, None
    windows = []
    wraw = obj.get("windows")
    if not isinstance(wraw, list) or len(wraw) != d:
        errs.add("reduction.windows", f"must list one [lo, hi] window per variable ({d})")
        return None, None
    for i, pair in enumerate(wraw):
        iv = _get_interval(pair, f"reduction.windows[{i}]", errs)
        if iv is None:
            return None, None
        windows.append(iv)

    amb = obj.get("ambient")
    if not isinstance(amb, dict):
        errs.add("reduction.ambient", "must be an object {q, delta, t, lams, x_scales}")
        return None, None
    for k in sorted(amb):
        if k not in {"q", "delta", "t", "lams", "x_scales"}:
            errs.add(f"reduction.ambient.{k}", "unknown key")
    lams = amb.get("lams")
    xsc = amb.get("x_scales", [1.0] * d)
    for key, seq in (("lams", lams), ("x_scales", xsc)):
        if not isinstance(seq, list) or len(seq) != d or not all(_is_num(v) for v in seq):
            errs.add(f"reduction.ambient.{key}", f"must list {d} numbers")
            return None, None

    x_inert = obj.get("x_inert", 1.0)
    if not _is_num(x_inert) or not x_inert > 0:
        errs.add("reduction.x_inert", "must be a positive number")
        return None, None
    predicted = obj.get("predicted")
    pred_c = None
    if predicted is not None:
        if (not isinstance(predicted, list) or len(predicted) != 2
                or not all(_is_num(v) for v in predicted)):
            errs.add("reduction.predicted", "must be a pair [re, im]")
            return None, None
        pred_c = complex(float(predicted[0]), float(predicted[1]))

    try:
        ambient = Ambient(
            q=float(amb.get("q", 0.0)), delta=float(amb.get("delta", 0.0)),
            t=float(amb.get("t", 0.0)), lams=tuple(float(v) for v in lams),
            x_scales=tuple(float(v) for v in xsc),
        )
        spec = PipelineSpec(
            integral=integral, order=tuple(order), windows=tuple(windows),
            ambient=ambient, x_inert=float(x_inert), predicted=pred_c,
        )
    except PhasekitError as e:
        errs.add("reduction", str(e))
        return None, None
    norm = {
        "order": list(order),
        "windows": [[a, b] for a, b in windows],
        "ambient": {"q": ambient.q, "delta": ambient.delta, "t": ambient.t,
                    "lams": list(ambient.lams), "x_scales": list(ambient.x_scales)},
        "x_inert": float(x_inert),
    }
    if pred_c is not None:
        norm["predicted"] = [pred_c.real, pred_c.imag]
    return spec, norm


def _parse_family(doc: dict, errs: _Errors):
    obj = doc.get("family")
    if not isinstance(obj, dict):
        errs.add("family", "must be an object")
        return None, None
    start = len(errs.items)
    for k in sorted(obj):
        if k not in {"dimension", "weight", "x_scales", "scale", "param_ranges"}:
            errs.add(f"family.{k}", "unknown key")
    d = obj.get("dimension")
    if isinstance(d, bool) or not isinstance(d, int) or not 1 <= d <= 3:
        errs.add("family.dimension", "must be an integer in 1..3")
        return None, None
    weight = _get_expr(obj, "weight", "family", errs)

    def scale_entry(v, path):
        if _is_num(v) and v > 0:
            return float(v)
        if isinstance(v, str) and v.strip():
            return ex.parse(v)
        errs.add(path, "must be a positive number or an expression string")
        return None

    xs_raw = obj.get("x_scales")
    if not isinstance(xs_raw, list) or len(xs_raw) != d:
        errs.add("family.x_scales", f"must list {d} entries")
        return None, None
    xs = [scale_entry(v, f"family.x_scales[{i}]") for i, v in enumerate(xs_raw)]
    sc = scale_entry(obj.get("scale"), "family.scale")

    ranges_raw = obj.get("param_ranges", {})
    ranges = {}
    if not isinstance(ranges_raw, dict):
        errs.add("family.param_ranges", "must be an object of name: [lo, hi]")
    else:
        for name in sorted(ranges_raw):
            iv = _get_interval(ranges_raw[name], f"family.param_ranges.{name}", errs)
            if iv is not None:
                ranges[name] = iv

    max_order = _get_int(doc, "max_order", errs, default=3, lo=1, hi=8)
    n_param = _get_int(doc, "n_param_samples", errs, default=8, lo=1)
    n_point = _get_int(doc, "n_point_samples", errs, default=125, lo=1)

    if len(errs.items) > start or weight is None or sc is None or any(v is None for v in xs):
        return None, None
    fam = FamilySpec(dimension=d, weight=weight, x_scales=tuple(xs),
                     scale=sc, param_ranges=ranges)
    norm_doc = {
        "family": {
            "dimension": d, "weight": obj["weight"],
            "x_scales": list(xs_raw), "scale": obj["scale"],
            "param_ranges": {k: [a, b] for k, (a, b) in ranges.items()},
        },
        "max_order": max_order,
        "n_param_samples": n_param,
        "n_point_samples": n_point,
    }
    return FamilyConfig(fam, max_order, n_param, n_point), norm_doc


def _parse_example(obj, errs: _Errors):
    if not isinstance(obj, dict):
        errs.add("example", "must be an object {P, ratios, q, delta}")
        return None, None
    for k in sorted(obj):
        if k not in {"P", "ratios", "q", "delta"}:
            errs.add(f"example.{k}", "unknown key")
    P = obj.get("P")
    if not _is_num(P) or not P >= 50:
        errs.add("example.P", "must be a number >= 50")
        return None, None
    ratios_raw = obj.get("ratios", [1.0, 1.0, 1.0])
    if (not isinstance(ratios_raw, list) or len(ratios_raw) != 3
            or not all(_is_num(v) and v > 0 for v in ratios_raw)):
        errs.add("example.ratios", "must list 3 positive numbers")
        return None, None
    q = obj.get("q", 1e3)
    delta = obj.get("delta", 0.1)
    if not _is_num(q) or not q > 1:
        errs.add("example.q", "must be a number > 1")
        return None, None
    if not _is_num(delta) or not 0 < delta < 1:
        errs.add("example.delta", "must lie strictly between 0 and 1")
        return None, None
    ecfg = ExampleConfig(float(P), tuple(float(v) for v in ratios_raw),
                         float(q), float(delta))
    norm = {"P": ecfg.P, "ratios": list(ecfg.ratios), "q": ecfg.q, "delta": ecfg.delta}
    return ecfg, norm


def parse_config(text: str) -> RunConfig:
    """Validate a JSON config completely; raises rather than accept parts.

    Schema problems raise SchemaError carrying the offending path (all of
    them listed when there are several); malformed expressions raise
    ExprParseError with the position inside the expression string.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError(f"not valid JSON: {e.msg}",
                          f"line {e.lineno} col {e.colno}") from None
    if not isinstance(doc, dict):
        raise SchemaError("top level must be a JSON object")
    mode = doc.get("mode")
    if mode not in MODES:
        raise SchemaError(f"must be one of {', '.join(MODES)}, got {mode!r}", "mode")

    errs = _Errors()
    allowed = _COMMON_KEYS | _MODE_KEYS[mode]
    for k in sorted(doc):
        if k not in allowed:
            errs.add(k, f"unknown key for mode {mode}")

    n_max = _get_int(doc, "n_max", errs, default=3, lo=0, hi=8)
    tol = _get_pos(doc, "tol", errs, default=1e-8)
    seed = _get_int(doc, "seed", errs, default=0)
    abs_floor = _get_pos(doc, "abs_floor", errs, default=ABS_FLOOR)
    norm: dict = {"mode": mode, "n_max": n_max, "tol": tol,
                  "seed": seed, "abs_floor": abs_floor}

    integral = window = scales = sweep = reduction = family = example = None

    if mode in ("oracle", "eval", "compare"):
        sweep_names: set[str] = set()
        if "sweep" in doc:
            sweep, sweep_norm = _parse_sweep(doc["sweep"], errs)
            if sweep is not None:
                sweep_names = {sweep.param}
                norm["sweep"] = sweep_norm
        if "integral" not in doc:
            errs.add("integral", "missing required key")
        else:
            integral, integral_norm = _parse_integral(
                doc["integral"], "integral", errs, sweep_names)
            if integral is not None:
                norm["integral"] = integral_norm
        if integral is not None and mode in ("eval", "compare"):
            if integral.dimension == 1:
                if "reduction" in doc:
                    errs.add("reduction", "only applies to several variables")
                wraw = doc.get("window")
                window = (_get_interval(wraw, "window", errs) if wraw is not None
                          else integral.box[0])
                if window is not None and not 0.0 < window[0] < window[1]:
                    errs.add("window", "needs 0 < lo < hi; give one explicitly")
                    window = None
                if window is not None:
                    norm["window"] = [window[0], window[1]]
                if "scales" in doc:
                    scales, scales_norm = _parse_scales(doc["scales"], errs)
                    if not scales_norm:
                        scales = None  # an empty object adds nothing
                    else:
                        norm["scales"] = scales_norm
            else:
                for key in ("window", "scales"):
                    if key in doc:
                        errs.add(key, "only applies to one variable")
                if sweep is not None:
                    errs.add("sweep", "only applies to one variable")
                if "reduction" not in doc:
                    errs.add("reduction", "required for a several-variable integral")
                else:
                    reduction, red_norm = _parse_reduction(
                        doc["reduction"], integral, errs)
                    if reduction is not None:
                        norm["reduction"] = red_norm
    elif mode == "inert-check":
        if "family" not in doc:
            errs.add("family", "missing required key")
        else:
            family, fam_norm = _parse_family(doc, errs)
            if family is not None:
                norm.update(fam_norm)
    else:  # example-ci
        if "example" not in doc:
            errs.add("example", "missing required key")
        else:
            example, ex_norm = _parse_example(doc["example"], errs)
            if example is not None:
                norm["example"] = ex_norm

    errs.raise_if_any()
    canonical = json.dumps(norm, sort_keys=True, indent=2) + "\n"
    return RunConfig(
        mode=mode, n_max=n_max, tol=tol, seed=seed, abs_floor=abs_floor,
        integral=integral, window=window, scales=scales, sweep=sweep,
        reduction=reduction, family=family, example=example, canonical=canonical,
    )


# ---------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class Report:
    """Rows of pre-formatted cells; CSV and aligned text share them."""

    columns: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...]
    passed: bool

    def to_csv(self) -> str:
        lines = [",".join(self.columns)]
        lines.extend(",".join(r) for r in self.rows)
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        table = [list(self.columns)] + [list(r) for r in self.rows]
        widths = [max(len(row[i]) for row in table) for i in range(len(self.columns))]
        out = []
        for k, row in enumerate(table):
            cells = [row[0].ljust(widths[0])]
            cells += [row[i].rjust(widths[i]) for i in range(1, len(row))]
            out.append("  ".join(cells).rstrip())
            if k == 0:
                out.append("  ".join("-" * w for w in widths))
        return "\n".join(out) + "\n"


@dataclass(frozen=True)
class RunOutput:
    report: Report
    sweep: tuple[tuple[float, float, float], ...] | None = None


def _e(x) -> str:
    return format(float(x), ".12e")


def _g(x) -> str:
    return format(float(x), ".6g")


_COMPARE_COLUMNS = ("case", "R_or_P", "oracle_re", "oracle_im", "main_re",
                    "main_im", "abs_diff", "trunc_budget", "note", "verdict")


def _verdict(ok: bool) -> str:
    return "pass" if ok else "FAIL"


# ---------------------------------------------------------------------------
# mode runners


def _require_mode(cfg: RunConfig, *modes: str) -> None:
    if cfg.mode not in modes:
        raise ValueError(f"runner expects mode in {modes}, got {cfg.mode}")


def _case_list(cfg: RunConfig) -> list[tuple[str, dict]]:
    """(label, params) per report row; one row when there is no sweep."""
    base = dict(cfg.integral.params)
    if cfg.sweep is None:
        return [("value", base)]
    return [(f"{cfg.sweep.param}={_g(v)}", {**base, cfg.sweep.param: v})
            for v in cfg.sweep.values]


def _window_scales(cfg: RunConfig, params: dict) -> tuple[float, float, float]:
    """Resolve (y, x, r) for the 1-d window, sizing y from the phase."""
    sc = cfg.scales or Scales()
    x = sc.x if sc.x is not None else 1.0
    y = sc.y
    if y is None:
        prog = kernel.compile_expr(cfg.integral.phase, (0,), params)
        grid = np.linspace(cfg.window[0], cfg.window[1], SCALE_GRID)
        vals = kernel.eval_on_grid(prog, np.zeros(1), 0, grid)
        y = max(1.0, float(np.max(np.abs(vals))))
    r = sc.r if sc.r is not None else max(1.0, y / x**2)
    return y, x, r


def _ctx_for(cfg: RunConfig, params: dict) -> SPContext:
    y, x, r = _window_scales(cfg, params)
    return SPContext(
        phase=cfg.integral.phase, var=0, n_vars=1, interval=cfg.window,
        y_scale=y, x_scale=x, spectator_scales=(), r_scale=r, params=params,
    )


def run_oracle(cfg: RunConfig) -> RunOutput:
    """Brute-force values only; rows always pass."""
    _require_mode(cfg, "oracle")
    quad = quad1d if cfg.integral.dimension == 1 else quad_nd
    rows, sweep_rows = [], []
    for label, params in _case_list(cfg):
        spec = dataclasses.replace(cfg.integral, params=params)
        res = quad(spec, cfg.tol)
        rows.append((label, _e(res.value.real), _e(res.value.imag),
                     _e(abs(res.value)), _e(res.error_estimate),
                     str(res.panels_used), str(res.n_evals)))
        sweep_rows.append((params.get(cfg.sweep.param) if cfg.sweep else 0.0,
                           abs(res.value), math.atan2(res.value.imag, res.value.real)))
    report = Report(
        columns=("case", "value_re", "value_im", "abs_value",
                 "err_estimate", "panels", "n_evals"),
        rows=tuple(rows), passed=True,
    )
    return RunOutput(report, tuple(sweep_rows) if cfg.sweep else None)


def _eval_one(cfg: RunConfig, params: dict):
    """(R, value, truncation, note) for one 1-d case; value None when the
    window is non-stationary (note then carries the magnitude bound)."""
    ctx = _ctx_for(cfg, params)
    res = classify(ctx)
    if isinstance(res, NonStationary):
        bound = ctx.interval[0] * ctx.r_scale ** -3 * NS_MAGNITUDE_SLACK
        return ctx.r_scale, None, bound, "NonStationary"
    # concave windows fold inside sp_expand; anything else raises there
    out = sp_expand(ctx, cfg.integral.weight, (), cfg.n_max)
    note = "folded" if out.conjugated else ""
    return ctx.r_scale, out.main_value, out.truncation_estimate, note


def run_eval(cfg: RunConfig) -> RunOutput:
    """Asymptotic values only; no verdicts, so the report always passes."""
    _require_mode(cfg, "eval")
    columns = ("case", "R_or_P", "value_re", "value_im", "abs_value",
               "trunc_budget", "note")
    rows, sweep_rows = [], []
    if cfg.integral.dimension > 1:
        res = run(cfg.reduction, n_max=cfg.n_max)
        if res.pruned:
            rows.append(("reduction", _g(cfg.reduction.ambient.P), "", "", "",
                         "", f"pruned: {res.prune_reason}"))
        else:
            rows.append(("reduction", _g(cfg.reduction.ambient.P),
                         _e(res.value.real), _e(res.value.imag),
                         _e(abs(res.value)), _e(res.truncation_estimate), ""))
    else:
        for label, params in _case_list(cfg):
            r, value, trunc, note = _eval_one(cfg, params)
            if value is None:
                rows.append((label, _g(r), "", "", "", _e(trunc), note))
            else:
                rows.append((label, _g(r), _e(value.real), _e(value.imag),
                             _e(abs(value)), _e(trunc), note))
                sweep_rows.append((params.get(cfg.sweep.param) if cfg.sweep else 0.0,
                                   abs(value), math.atan2(value.imag, value.real)))
    report = Report(columns=columns, rows=tuple(rows), passed=True)
    return RunOutput(report, tuple(sweep_rows) if cfg.sweep else None)


def _compare_rows_1d(cfg: RunConfig):
    rows, sweep_rows, all_ok = [], [], True
    for label, params in _case_list(cfg):
        spec = dataclasses.replace(cfg.integral, params=params)
        orc = quad1d(spec, cfg.tol).value
        r, value, trunc, note = _eval_one(cfg, params)
        if value is None:
            ok = abs(orc) <= trunc  # trunc carries the Z*R^-3 bound here
            rows.append((label, _g(r), _e(orc.real), _e(orc.imag), "", "",
                         "", _e(trunc), note, _verdict(ok)))
        else:
            diff = abs(orc - value)
            ok = diff <= max(VERDICT_SLACK * trunc, cfg.abs_floor)
            rows.append((label, _g(r), _e(orc.real), _e(orc.imag),
                         _e(value.real), _e(value.imag), _e(diff),
                         _e(trunc), note, _verdict(ok)))
        all_ok = all_ok and ok
        sweep_rows.append((params.get(cfg.sweep.param) if cfg.sweep else 0.0,
                           abs(orc), math.atan2(orc.imag, orc.real)))
    return rows, sweep_rows, all_ok


def _compare_row_reduction(spec: PipelineSpec, oracle_spec: IntegralSpec,
                           label: str, tol: float, n_max: int, abs_floor: float):
    res = run(spec, n_max=n_max)
    if res.pruned:
        row = (label, _g(spec.ambient.P), "", "", "", "", "", "",
               f"pruned: {res.prune_reason}", "pass")
        return row, True
    orc = quad_nd(oracle_spec, tol).value
    diff = abs(orc - res.value)
    ok = diff <= max(VERDICT_SLACK * res.truncation_estimate, abs_floor)
    row = (label, _g(spec.ambient.P), _e(orc.real), _e(orc.imag),
           _e(res.value.real), _e(res.value.imag), _e(diff),
           _e(res.truncation_estimate), "", _verdict(ok))
    return row, ok


def run_compare(cfg: RunConfig) -> RunOutput:
    """Oracle and asymptotic values side by side, one verdict per row.

    A row passes when |oracle - main| <= max(5 * truncation budget,
    abs_floor); rows whose window has no stationary point instead check the
    oracle magnitude against Z * R^-3 * 1000 and are marked NonStationary.
    """
    _require_mode(cfg, "compare")
    if cfg.integral.dimension > 1:
        row, ok = _compare_row_reduction(
            cfg.reduction, cfg.integral, "reduction",
            cfg.tol, cfg.n_max, cfg.abs_floor)
        return RunOutput(Report(_COMPARE_COLUMNS, (row,), ok), None)
    rows, sweep_rows, all_ok = _compare_rows_1d(cfg)
    report = Report(_COMPARE_COLUMNS, tuple(rows), all_ok)
    return RunOutput(report, tuple(sweep_rows) if cfg.sweep else None)


def run_inert_check(cfg: RunConfig) -> RunOutput:
    """Derivative-bound certificate; one row per multi-index."""
    _require_mode(cfg, "inert-check")
    fc = cfg.family
    rep = check_inert(
        fc.family, max_order=fc.max_order, n_param_samples=fc.n_param_samples,
        n_point_samples=fc.n_point_samples, seed=cfg.seed,
    )
    rows = []
    for r in rep.rows:
        jtxt = "(" + " ".join(str(k) for k in r.j) + ")"
        ptxt = " ".join(f"{k}={v:.6g}" for k, v in sorted(r.worst_params.items()))
        xtxt = " ".join(f"{v:.6g}" for v in r.worst_point)
        rows.append((jtxt, _e(r.c_hat), _e(r.limit), ptxt, xtxt,
                     _verdict(r.passed)))
    report = Report(
        columns=("j", "c_hat", "limit", "worst_params", "worst_point", "verdict"),
        rows=tuple(rows), passed=rep.verdict,
    )
    return RunOutput(report)


def run_example_ci(cfg: RunConfig) -> RunOutput:
    """The built-in 3-variable reduction against its direct quadrature."""
    _require_mode(cfg, "example-ci")
    e = cfg.example
    spec = ci_example(e.P, e.ratios, q=e.q, delta=e.delta)
    oracle_spec = ci_oracle_spec(e.P, e.ratios)
    row, ok = _compare_row_reduction(
        spec, oracle_spec, "example", cfg.tol, cfg.n_max, cfg.abs_floor)
    return RunOutput(Report(_COMPARE_COLUMNS, (row,), ok))


_RUNNERS = {
    "oracle": run_oracle,
    "eval": run_eval,
    "compare": run_compare,
    "inert-check": run_inert_check,
    "example-ci": run_example_ci,
}


# ---------------------------------------------------------------------------
# entry point


def _write_outputs(out_dir: Path, result: RunOutput) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.csv").write_text(result.report.to_csv())
    (out_dir / "report.txt").write_text(result.report.to_text())
    if result.sweep is not None:
        lines = ["parameter,abs_value,arg_value"]
        lines.extend(f"{_g(p)},{_e(a)},{_e(t)}" for p, a, t in result.sweep)
        (out_dir / "sweep.csv").write_text("\n".join(lines) + "\n")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="phasekit",
        description="Oscillatory integrals: quadrature oracle, "
                    "stationary-phase values, and their comparison.",
    )
    parser.add_argument("mode", choices=MODES)
    parser.add_argument("--config", required=True, help="JSON run description")
    parser.add_argument("--out", default=".", help="directory for report files")
    parser.add_argument("--nmax", type=int, default=None,
                        help="override the config's correction order")
    parser.add_argument("--tol", type=float, default=None,
                        help="override the config's oracle tolerance")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config's sampling seed")
    args = parser.parse_args(argv)

    try:
        text = Path(args.config).read_text()
    except OSError as e:
        print(f"phasekit: cannot read config: {e}", file=sys.stderr)
        return 2
    try:
        cfg = parse_config(text)
    except (SchemaError, ExprParseError) as e:
        print(f"phasekit: bad config: {e}", file=sys.stderr)
        return 2
    if cfg.mode != args.mode:
        print(f"phasekit: config has mode {cfg.mode!r}, command line says "
              f"{args.mode!r}", file=sys.stderr)
        return 2
    overrides = {}
    if args.nmax is not None:
        if not 0 <= args.nmax <= 8:
            print("phasekit: --nmax must be 0..8", file=sys.stderr)
            return 2
        overrides["n_max"] = args.nmax
    if args.tol is not None:
        if not args.tol > 0:
            print("phasekit: --tol must be positive", file=sys.stderr)
            return 2
        overrides["tol"] = args.tol
    if args.seed is not None:
        overrides["seed"] = args.seed
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)

    try:
        result = _RUNNERS[cfg.mode](cfg)
    except PhasekitError as e:
        print(f"phasekit: numerical failure: {e}", file=sys.stderr)
        return 3

    _write_outputs(Path(args.out), result)
    sys.stdout.write(result.report.to_text())
    return 0 if result.report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
