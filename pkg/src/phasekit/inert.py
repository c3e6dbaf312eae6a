"""Empirical certification of weight families: uniform derivative bounds.

A family is a weight w(x; T) over a box ``prod [X_i, 2X_i]`` whose shape
parameters T range over declared intervals or finite lists. The certifier
samples parameters (low-discrepancy) and points (grid over the support) and
accumulates, for every multi-index j up to a requested order,

    C_hat(j) = max over samples of  scale(T)^{-|j|} * |x^j * d^j w(x; T)|.

The family passes when each C_hat(j) stays within a per-order ceiling
calibrated by the same quantity for the canonical bump atom b(2x-3) on the
unit dyadic interval [1, 2]; a flat ceiling would be meaningless because the
atom's own derivative sups grow super-factorially in |j|.

Certification is sampled, not proved: the report carries the worst observed
parameter tuple and point for each j so a failure is reproducible.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product as _iter_product
from typing import Callable, Mapping, Sequence

import numpy as np

from . import expr as ex
from . import jets, oracle
from .errors import DomainViolation, NameCollision, SupportViolation

# weight forms: real expression, (re, im) expression pair, or a numeric rule
# point, params, order -> complex MJet (used for synthesized weights)
WeightRule = Callable[[Sequence[float], Mapping[str, float], int], jets.MJet]
SUPPORT_TOL = 1e-12
DEFAULT_CEILING = 10.0

_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def halton(index: int, base: int) -> float:
    """Deterministic low-discrepancy sequence member in (0, 1)."""
    f = 1.0
    r = 0.0
    i = index
    while i > 0:
        f /= base
        r += f * (i % base)
        i //= base
    return r


@dataclass(frozen=True)
class FamilySpec:
    """A parameterized weight family with its claimed inertness scale."""

    dimension: int
    weight: object  # Expr | (Expr, Expr) | WeightRule
    x_scales: tuple  # per-axis support scale: real, param name, or Expr
    scale: object  # claimed inertness scale: real, param name, Expr, or callable
    param_ranges: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be at least 1")
        if len(self.x_scales) != self.dimension:
            raise ValueError("one support scale per dimension required")


@dataclass(frozen=True)
class InertRow:
    j: tuple
    c_hat: float
    limit: float
    passed: bool
    worst_params: dict
    worst_point: tuple


@dataclass(frozen=True)
class InertReport:
    rows: tuple
    verdict: bool
    max_order: int
    n_param_samples: int
    n_point_samples: int
    ceiling: float

    def row(self, j) -> InertRow:
        for r in self.rows:
            if r.j == tuple(j):
                return r
        raise KeyError(f"no row for multi-index {j}")

    def to_csv(self) -> str:
        lines = ["j,c_hat,limit,verdict,worst_params,worst_point"]
        for r in self.rows:
            jtxt = "(" + " ".join(str(k) for k in r.j) + ")"
            ptxt = " ".join(f"{k}={v:.9g}" for k, v in sorted(r.worst_params.items()))
            xtxt = " ".join(f"{v:.9g}" for v in r.worst_point)
            lines.append(
                f"{jtxt},{r.c_hat:.12e},{r.limit:.12e},"
                f"{'pass' if r.passed else 'FAIL'},{ptxt},{xtxt}"
            )
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        head = (
            f"inertness check: order <= {self.max_order}, "
            f"{self.n_param_samples} parameter samples x {self.n_point_samples} points, "
            f"ceiling {self.ceiling:g}"
        )
        lines = [head, ""]
        lines.append(f"{'j':<14} {'C_hat(j)':>14} {'limit':>14}  verdict  worst sample")
        for r in self.rows:
            jtxt = "(" + ",".join(str(k) for k in r.j) + ")"
            ptxt = " ".join(f"{k}={v:.4g}" for k, v in sorted(r.worst_params.items()))
            xtxt = "(" + ",".join(f"{v:.4g}" for v in r.worst_point) + ")"
            lines.append(
                f"{jtxt:<14} {r.c_hat:>14.6e} {r.limit:>14.6e}  "
                f"{'pass' if r.passed else 'FAIL':<7}  T: {ptxt}  x: {xtxt}"
            )
        lines.append("")
        lines.append(f"overall: {'pass' if self.verdict else 'FAIL'}")
        return "\n".join(lines) + "\n"


# --- family plumbing ---------------------------------------------------------


def _as_param_expr(spec) -> ex.Expr:
    if isinstance(spec, ex.Expr):
        return spec
    if isinstance(spec, str):
        return ex.Param(spec)
    if isinstance(spec, (int, float)):
        return ex.Const(float(spec))
    raise TypeError(f"cannot interpret {spec!r} as a parameter-valued quantity")


def _param_value(spec, params: Mapping[str, float]) -> float:
    if callable(spec) and not isinstance(spec, ex.Expr):
        return float(spec(params))
    v = ex.evaluate(_as_param_expr(spec), (), params)
    return float(v.real)


def scale_value(family: FamilySpec, params: Mapping[str, float]) -> float:
    return _param_value(family.scale, params)


def x_scale_values(family: FamilySpec, params: Mapping[str, float]) -> tuple[float, ...]:
    return tuple(_param_value(s, params) for s in family.x_scales)


def _is_weight_rule(w) -> bool:
    return callable(w) and not isinstance(w, ex.Expr)


def weight_mjet(family: FamilySpec, point: Sequence[float],
                params: Mapping[str, float], order: int) -> jets.MJet:
    """Complex derivative jet of the weight at one point."""
    w = family.weight
    if _is_weight_rule(w):
        return w(point, params, order)
    active = tuple(range(family.dimension))
    if isinstance(w, tuple):
        re_part = jets.mjet_of(w[0], active, point, params, order)
        im_part = jets.mjet_of(w[1], active, point, params, order)
        return re_part + 1j * im_part
    return jets.mjet_of(w, active, point, params, order)


def weight_value(family: FamilySpec, point: Sequence[float],
                 params: Mapping[str, float]) -> complex:
    return weight_mjet(family, point, params, 0).value()


def sample_params(family: FamilySpec, n: int, seed: int = 0) -> list[dict]:
    """Deterministic low-discrepancy parameter tuples over the ranges.

    Positive intervals spanning two or more decades are sampled uniformly in
    log scale, since support scales are scale parameters.
    """
    names = sorted(family.param_ranges)
    out = []
    for k in range(n):
        idx = seed * max(n, 16) + k + 1
        t = {}
        for dim, name in enumerate(names):
            rng = family.param_ranges[name]
            u = halton(idx, _PRIMES[dim % len(_PRIMES)])
            if isinstance(rng, tuple) and len(rng) == 2:
                lo, hi = float(rng[0]), float(rng[1])
                if lo > 0 and hi / lo >= 100.0:
                    t[name] = math.exp(math.log(lo) + u * (math.log(hi) - math.log(lo)))
                else:
                    t[name] = lo + u * (hi - lo)
            elif isinstance(rng, (list, tuple)):
                t[name] = float(rng[min(int(u * len(rng)), len(rng) - 1)])
            else:
                t[name] = float(rng)
        out.append(t)
    return out if out else [{}]


# --- yardstick: the canonical bump atom's own constants -----------------------


@lru_cache(maxsize=None)
def _atom_constants(max_order: int) -> tuple[float, ...]:
    """sup over [1,2] of |x^k d^k b(2x-3)| for k = 0..max_order."""
    atom = ex.parse("bump(2*x1 - 3)")
    grid = np.linspace(1.0, 2.0, 2001)
    sups = [0.0] * (max_order + 1)
    for x in grid:
        jet = jets.jet_of(atom, 0, (float(x),), {}, max_order)
        for k in range(max_order + 1):
            v = abs(jet.deriv(k)) * abs(x) ** k
            if v > sups[k]:
                sups[k] = v
    return tuple(sups)


def order_yardstick(j: Sequence[int]) -> float:
    """Product over axes of the canonical atom constant at each order."""
    consts = _atom_constants(max(j) if len(j) else 0)
    out = 1.0
    for k in j:
        out *= consts[k]
    return out


# --- certification ------------------------------------------------------------


def _multi_indices(d: int, max_order: int) -> list[tuple]:
    idx = [j for j in _iter_product(range(max_order + 1), repeat=d) if sum(j) <= max_order]
    idx.sort(key=lambda j: (sum(j), j))
    return idx


def _support_points(xs: tuple[float, ...], per_axis: int) -> list[tuple]:
    axes = []
    for X in xs:
        # interior offsets keep nodes strictly inside the dyadic interval
        axes.append([X * (1.0 + (k + 0.5) / per_axis) for k in range(per_axis)])
    return list(_iter_product(*axes))


def _check_support(family: FamilySpec, params, xs) -> None:
    """Weight must vanish (to tolerance) outside the declared dyadic box."""
    d = family.dimension
    centers = [1.5 * X for X in xs]
    for axis in range(d):
        X = xs[axis]
        outside = [0.25 * X, 0.5 * X, 0.999999 * X, 2.000001 * X, 2.5 * X, 3.0 * X]
        for v in outside:
            pt = list(centers)
            pt[axis] = v
            wv = weight_value(family, tuple(pt), params)
            if abs(wv) > SUPPORT_TOL:
                raise SupportViolation(
                    f"weight is {abs(wv):.3e} at x{axis + 1} = {v:.6g}, outside "
                    f"[{X:.6g}, {2 * X:.6g}] for parameters {params}"
                )


def check_inert(family: FamilySpec, max_order: int = 3, n_param_samples: int = 8,
                n_point_samples: int = 125, ceiling: float = DEFAULT_CEILING,
                seed: int = 0, check_support: bool = True) -> InertReport:
    """Sampled certificate that the family's derivative bounds are uniform.

    For each multi-index j with |j| <= max_order the observed constant is
    compared against ceiling times the canonical atom's own constant at j
    (never below ceiling itself), so the verdict measures uniformity across
    the family rather than the atom's intrinsic derivative growth.
    """
    if max_order > 8:
        raise ValueError("max_order above 8 is outside jet feasibility")
    if n_param_samples < 1 or n_point_samples < 1:
        raise ValueError("sample counts must be at least 1")
    d = family.dimension
    per_axis = max(3, round(n_point_samples ** (1.0 / d)))
    indices = _multi_indices(d, max_order)
    best = {j: (-1.0, {}, ()) for j in indices}

    for params in sample_params(family, n_param_samples, seed):
        xs = x_scale_values(family, params)
        if any(not (X > 0) for X in xs):
            raise DomainViolation(f"support scales must be positive, got {xs}")
        x_t = scale_value(family, params)
        if not x_t >= 1.0:
            raise DomainViolation(
                f"claimed inertness scale must be at least 1, got {x_t:.6g} at {params}"
            )
        if check_support:
            _check_support(family, params, xs)
        for pt in _support_points(xs, per_axis):
            mj = weight_mjet(family, pt, params, max_order)
            for j in indices:
                dv = mj.deriv(j)
                if dv == 0:
                    continue
                xpow = 1.0
                for x, k in zip(pt, j):
                    xpow *= x ** k
                val = abs(dv) * abs(xpow) / x_t ** sum(j)
                if val > best[j][0]:
                    best[j] = (val, dict(params), tuple(pt))

    rows = []
    all_pass = True
    for j in indices:
        c_hat, worst_p, worst_x = best[j]
        c_hat = max(c_hat, 0.0)
        limit = ceiling * max(1.0, order_yardstick(j))
        ok = c_hat <= limit
        all_pass = all_pass and ok
        rows.append(InertRow(j, c_hat, limit, ok, worst_p, worst_x))
    return InertReport(
        rows=tuple(rows),
        verdict=all_pass,
        max_order=max_order,
        n_param_samples=n_param_samples,
        n_point_samples=per_axis ** d,
        ceiling=ceiling,
    )


# --- closure operations -------------------------------------------------------


def _weight_pair(w) -> tuple[ex.Expr, ex.Expr]:
    if isinstance(w, tuple):
        return w
    return (w, ex.Const(0.0))


def product_family(f: FamilySpec, g: FamilySpec) -> FamilySpec:
    """Pointwise product family, claimed scale max of the two claims."""
    if f.dimension != g.dimension:
        raise ValueError("factor families must share a dimension")
    shared = set(f.param_ranges) & set(g.param_ranges)
    if shared:
        raise NameCollision(f"parameter names shared between factors: {sorted(shared)}")
    for a, b in zip(f.x_scales, g.x_scales):
        if ex.render(_as_param_expr(a)) != ex.render(_as_param_expr(b)):
            raise ValueError("factor families must share support scales")

    if _is_weight_rule(f.weight) or _is_weight_rule(g.weight):
        fw, gw = f.weight, g.weight

        def rule(point, params, order):
            return weight_mjet(f, point, params, order) * weight_mjet(g, point, params, order)

        weight = rule
    else:
        fr, fi = _weight_pair(f.weight)
        gr, gi = _weight_pair(g.weight)
        re_part = ex.fold(ex.Sub(ex.Mul(fr, gr), ex.Mul(fi, gi)))
        im_part = ex.fold(ex.Add(ex.Mul(fr, gi), ex.Mul(fi, gr)))
        if ex.render(im_part) == "0":
            weight = re_part
        else:
            weight = (re_part, im_part)

    fs, gs = f.scale, g.scale

    def scale(params):
        return max(_param_value(fs, params), _param_value(gs, params))

    ranges = dict(f.param_ranges)
    ranges.update(g.param_ranges)
    return FamilySpec(f.dimension, weight, f.x_scales, scale, ranges)


def specialize_family(family: FamilySpec, curve: ex.Expr) -> FamilySpec:
    """Pin the first variable to X1 * curve(x2/X2, ..., xd/Xd).

    ``curve`` is an expression in variables x1..x(d-1) standing for the
    scaled remaining coordinates. The result is a (d-1)-dimensional family
    over the remaining axes; uniformity of its derivative bounds at the same
    claimed scale is the closure property under test.
    """
    d = family.dimension
    if d < 2:
        raise ValueError("specialization needs at least two dimensions")
    if _is_weight_rule(family.weight):
        raise TypeError("specialization requires an expression weight")
    x1_expr = _as_param_expr(family.x_scales[0])
    # curve's variable i stands for (old axis i+1) / X_{i+2}
    ratio_subs = {
        i: ex.Div(ex.Var(i + 1), _as_param_expr(family.x_scales[i + 1]))
        for i in range(d - 1)
    }
    pinned_x1 = ex.Mul(x1_expr, ex.substitute(curve, ratio_subs))
    reindex = {k: ex.Var(k - 1) for k in range(1, d)}

    def transform(w: ex.Expr) -> ex.Expr:
        return ex.fold(ex.substitute(ex.substitute(w, {0: pinned_x1}), reindex))

    fr, fi = _weight_pair(family.weight)
    new_re = transform(fr)
    new_im = transform(fi)
    weight = new_re if ex.render(new_im) == "0" else (new_re, new_im)
    return FamilySpec(
        dimension=d - 1,
        weight=weight,
        x_scales=family.x_scales[1:],
        scale=family.scale,
        param_ranges=dict(family.param_ranges),
    )


# --- Fourier transform diagnostics --------------------------------------------


@dataclass(frozen=True)
class FourierRow:
    t1: float
    value: complex  # X1^{-1} * w_hat(t1)
    error: float


@dataclass(frozen=True)
class FourierReport:
    rows: tuple
    fitted_exponent: float
    deriv_rows: tuple  # (order k, D_hat(k), limit, pass)
    x_scale: float
    x1: float
    q: float
    a: float
    params: dict
    verdict: bool


def _transform_value(family: FamilySpec, var: int, t1: float, params: dict,
                     xs: tuple, moment: int, tol: float):
    """(-2*pi*i)^moment-free moment integral of w against e(-x*t1).

    Returns the oracle value of int w(x) * x^moment * exp(-2*pi*i*t1*x) dx
    over the support interval of the transformed axis, with other axes pinned
    at their support centers.
    """
    d = family.dimension
    fr, fi = _weight_pair(family.weight)
    pins = {axis: ex.Const(1.5 * xs[axis]) for axis in range(d) if axis != var}

    def reduce_to_1d(w: ex.Expr) -> ex.Expr:
        pinned = ex.substitute(w, pins) if pins else w
        if var != 0:
            pinned = ex.substitute(pinned, {var: ex.Var(0)})
        return ex.fold(pinned)

    phase = ex.parse("0 - twopit * x1")
    interval = (xs[var], 2.0 * xs[var])
    run_params = dict(params)
    run_params["twopit"] = 2.0 * math.pi * t1
    total = 0.0 + 0.0j
    err = 0.0
    for part, factor in ((fr, 1.0), (fi, 1.0j)):
        if ex.render(ex.fold(part)) == "0":
            continue
        w1 = reduce_to_1d(part)
        if moment:
            w1 = ex.Mul(w1, ex.Pow(ex.Var(0), float(moment)))
        spec = oracle.IntegralSpec(1, phase, w1, (interval,), run_params)
        r = oracle.quad1d(spec, tol)
        total += factor * r.value
        err += r.error_estimate
    return total, err


def fourier_decay_check(family: FamilySpec, var: int, y1_grid: Sequence[float],
                        q: float | None = None, a: float = 5.0,
                        params: dict | None = None, tol: float = 1e-9,
                        max_deriv: int = 2, ceiling: float = DEFAULT_CEILING) -> FourierReport:
    """Transform-side behavior of a family member along one axis.

    Computes g(t1) = X1^{-1} * w_hat(t1) with w_hat the e(x) = exp(2*pi*i*x)
    convention transform, on the given t1 grid. Reports (a) uniform bounds
    D_hat(k) = sup |t1^k g^(k)(t1)| / S^k with S = max(1, X/X1), the transform
    analog of the family's own derivative bounds, and (b) the tail exponent
    from fitting |g| against (1 + |t1| X1 / X)^(-a). Verdict: fitted exponent
    at least ``a``.
    """
    if _is_weight_rule(family.weight):
        raise TypeError("transform diagnostics require an expression weight")
    if params is None:
        mids = sample_params(family, 1, seed=0)
        params = mids[0]
    xs = x_scale_values(family, params)
    x1 = xs[var]
    x_t = scale_value(family, params)
    if q is None:
        q = max(xs)
    s_hat = max(1.0, x_t / x1)

    rows = []
    d_hat = [0.0] * (max_deriv + 1)
    for t1 in y1_grid:
        for k in range(max_deriv + 1):
            mom, err = _transform_value(family, var, float(t1), params, xs, k, tol)
            if k == 0:
                g = mom / x1
                rows.append(FourierRow(float(t1), g, err / x1))
            gk = (-2.0j * math.pi) ** k * mom / x1
            val = abs(t1) ** k * abs(gk) / s_hat ** k
            if val > d_hat[k]:
                d_hat[k] = val

    # tail fit over points that rise meaningfully above the oracle noise
    pts = [(r.t1, abs(r.value), r.error) for r in rows]
    usable = [(t, v) for t, v, e in pts if v > 10.0 * e and v > 0.0]
    if len(usable) < 3:
        usable = [(t, max(v, 1e-300)) for t, v, _ in pts]
    xs_fit = [math.log1p(abs(t) * x1 / x_t) for t, _ in usable]
    ys_fit = [math.log(v) for _, v in usable]
    n = len(xs_fit)
    sx, sy = sum(xs_fit), sum(ys_fit)
    sxx = sum(x * x for x in xs_fit)
    sxy = sum(x * y for x, y in zip(xs_fit, ys_fit))
    denom = n * sxx - sx * sx
    slope = (n * sxy - sx * sy) / denom if abs(denom) > 1e-300 else 0.0
    fitted = -slope

    deriv_rows = []
    for k in range(max_deriv + 1):
        limit = ceiling * (4.0 * math.pi) ** k * max(1.0, d_hat[0])
        deriv_rows.append((k, d_hat[k], limit, d_hat[k] <= limit))
    return FourierReport(
        rows=tuple(rows),
        fitted_exponent=fitted,
        deriv_rows=tuple(deriv_rows),
        x_scale=x_t,
        x1=x1,
        q=q,
        a=a,
        params=dict(params),
        verdict=fitted >= a,
    )
