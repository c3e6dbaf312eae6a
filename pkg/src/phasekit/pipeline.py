"""Iterated reduction of a multi-dimensional oscillatory integral.

Each step integrates out one variable by the stationary-phase expansion:
the phase is replaced by its value along the stationary locus, the weight
by the normalized output weight over the spectators, and a scalar factor
Z/sqrt(Y) is split off.  After the last step the integral has collapsed to

    (prod_k Z_k / sqrt(Y_k)) * e^{i phase_final} * W_final.

When the stationary locus of a step is a monomial in the spectators
(detected numerically and verified on a grid), the new phase is formed by
exact expression substitution; otherwise the step carries the phase forward
as a numeric object built from implicit jets.  Output weights after the
first step exist only numerically and are memoized by spectator point.

`ci_example` builds the canonical three-dimensional trilinear-phase spec
used for end-to-end validation, together with its closed-form prediction
and the matching direct-quadrature spec.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from . import expr as ex
from . import jets, kernel
from .errors import DomainViolation, StepHypothesisViolation
from .expansion import ExpansionResult, sp_expand, weight_out
from .inert import FamilySpec
from .oracle import IntegralSpec
from .stationary import (
    CONCAVE_REASON,
    Indeterminate,
    SPContext,
    Stationary,
    StationaryPointForm,
    classify,
    negate_ctx,
    phase_value,
    t0_jet,
    t0_monomial,
)

# dyadic slack for the pruning window: keep lambda_i within
# [P / (SLACK * X_i), SLACK * P / X_i]
SLACK = 8.0

# grid used to certify a sniffed monomial stationary-point form, and to
# check the step hypotheses across the spectator box (points per axis)
VERIFY_NODES = 3

# relative agreement demanded between the sniffed monomial form and the
# per-point stationary values before the closed form is trusted
FORM_TOL = 1e-9

# numeric phases are expensive to sample; classification grids shrink
NUMERIC_GRID = 33


@dataclass(frozen=True)
class Ambient:
    """Size parameters of the reduction: modulus-scale q, exponent floor
    delta, phase coefficient t, frequencies lams, and dyadic scales x_scales.
    P = t * prod(x_scales) is the common size of the lam_i * X_i products
    in the non-pruned regime."""

    q: float
    delta: float
    t: float
    lams: tuple[float, ...]
    x_scales: tuple[float, ...]

    def __post_init__(self):
        if not (self.q > 1.0 and 0.0 < self.delta < 1.0):
            raise DomainViolation(f"need q > 1 and 0 < delta < 1, got q={self.q}, delta={self.delta}")
        if self.t <= 0.0:
            raise DomainViolation(f"t must be positive, got {self.t}")
        if len(self.lams) != len(self.x_scales):
            raise DomainViolation("lams and x_scales must have equal length")
        if any(l <= 0.0 for l in self.lams) or any(x <= 0.0 for x in self.x_scales):
            raise DomainViolation("lams and x_scales must be positive")

    @property
    def P(self) -> float:
        return self.t * math.prod(self.x_scales)


@dataclass(frozen=True)
class PipelineSpec:
    """A reduction task: the working integral, the elimination order, the
    per-variable classification windows, and the ambient sizes.

    `integral` is the working form of the integral (phase in radians, box =
    per-variable support).  `windows` are the per-variable intervals handed
    to the stationary-point classifier, typically wider than the support.
    `x_inert` is the inert scale of the weight family.  `predicted`
    optionally carries a closed-form skeleton (amplitude scale and phase)
    copied into the result for comparison.
    """

    integral: IntegralSpec
    order: tuple[int, ...]
    windows: tuple[tuple[float, float], ...]
    ambient: Ambient
    x_inert: float = 1.0
    predicted: complex | None = None

    def __post_init__(self):
        d = self.integral.dimension
        if d > 3:
            raise DomainViolation(f"reduction handles up to 3 variables, got {d}")
        if sorted(self.order) != list(range(d)):
            raise DomainViolation(f"order must be a permutation of 0..{d - 1}, got {self.order}")
        if len(self.windows) != d:
            raise DomainViolation("one window per variable required")
        for lo, hi in self.windows:
            if not (0.0 < lo < hi):
                raise DomainViolation(f"windows need 0 < lo < hi, got ({lo}, {hi})")
        if len(self.ambient.lams) != d:
            raise DomainViolation("ambient lams must match the dimension")
        if self.x_inert <= 0.0:
            raise DomainViolation("x_inert must be positive")


@dataclass(frozen=True)
class StepRecord:
    """Everything one elimination step produced.

    `var` is the original index of the eliminated variable and
    `spectator_vars` the original indices of the survivors.  `t0_form` is
    the verified monomial form of the stationary locus, if one was found.
    `expansion` is the step evaluated at `center_point` (support centers of
    the spectators).  `weight_family` is the output-weight family consumed
    by the following step (None on the last step).
    """

    var: int
    interval: tuple[float, float]
    y_scale: float
    r_scale: float
    concave: bool
    t0_form: StationaryPointForm | None
    spectator_vars: tuple[int, ...]
    center_point: tuple[float, ...]
    expansion: ExpansionResult
    weight_family: FamilySpec | None
    ctx: SPContext


@dataclass(frozen=True)
class PipelineResult:
    """Outcome of a reduction: the value, one record per step, and the
    truncation budget |value| * sum of per-step relative truncations.
    `stationary_chain` lists the stationary values along the elimination
    order, each evaluated at the stationary values of the later steps.
    A pruned spec records no steps and a zero value."""

    value: complex
    steps: tuple[StepRecord, ...]
    predicted: complex | None
    truncation_estimate: float
    stationary_chain: tuple[float, ...]
    pruned: bool = False
    prune_reason: str | None = None


def prune(spec: PipelineSpec) -> str | None:
    """Reason the spec is negligible at the target precision, or None.

    A variable whose frequency leaves the dyadic window [P/(8X), 8P/X] makes
    the whole integral small by nonstationary decay, and P below q^delta
    leaves too few oscillations for the expansion to beat the trivial bound.
    """
    amb = spec.ambient
    P = amb.P
    floor = amb.q ** amb.delta
    if P < floor:
        return f"P = {P:.6g} below q^delta = {floor:.6g}"
    for i, (lam, x) in enumerate(zip(amb.lams, amb.x_scales)):
        lo, hi = P / (SLACK * x), SLACK * P / x
        if not (lo <= lam <= hi):
            return (
                f"lam{i + 1} = {lam:.6g} outside [{lo:.6g}, {hi:.6g}]; "
                "the phase is nonstationary in that variable"
            )
    return None


def _point_with(n_vars: int, var: int, t: float, spectators) -> tuple[float, ...]:
    point = [0.0] * n_vars
    point[var] = float(t)
    rest = [i for i in range(n_vars) if i != var]
    for slot, val in zip(rest, spectators):
        point[slot] = float(val)
    return tuple(point)


def _stationary_t0(ctx: SPContext, spectators) -> tuple[float, bool]:
    """Stationary value at one spectator point, folding concave windows."""
    res = classify(ctx, spectators)
    concave = isinstance(res, Indeterminate) and res.reason == CONCAVE_REASON
    if concave:
        res = classify(negate_ctx(ctx), spectators)
    if not isinstance(res, Stationary):
        raise StepHypothesisViolation(
            f"no usable stationary point at spectators {tuple(spectators)}: {res}"
        )
    return res.t0, concave


class SubstitutedPhase:
    """The phase of the next step, phi(t0(s), s), as a numeric object.

    Used when the stationary locus has no verified monomial form.  Values
    and jets are assembled per spectator point from the implicit expansion
    of t0 and memoized; classification grids are capped via `grid_hint`.
    """

    grid_hint = NUMERIC_GRID

    def __init__(self, ctx: SPContext):
        self.ctx = ctx
        self._t0_memo: dict = {}
        self._mjet_memo: dict = {}

    def _work_ctx(self, concave: bool) -> SPContext:
        return negate_ctx(self.ctx) if concave else self.ctx

    def _t0(self, point) -> tuple[float, bool]:
        key = tuple(point)
        hit = self._t0_memo.get(key)
        if hit is None:
            hit = _stationary_t0(self.ctx, key)
            self._t0_memo[key] = hit
        return hit

    def value(self, point, params) -> float:
        t0, _ = self._t0(point)
        full = _point_with(self.ctx.n_vars, self.ctx.var, t0, point)
        return phase_value(self.ctx.phase, full, self.ctx.params)

    def mjet(self, active, point, params, order) -> jets.MJet:
        key = (tuple(point), int(order))
        hit = self._mjet_memo.get(key)
        if hit is not None:
            return hit
        t0, concave = self._t0(point)
        T = t0_jet(self._work_ctx(concave), tuple(point), max_total_order=order)
        full = _point_with(self.ctx.n_vars, self.ctx.var, t0, point)
        inner = self.ctx.phase
        if isinstance(inner, ex.Expr):
            big = jets.mjet_of(inner, tuple(range(self.ctx.n_vars)), full, self.ctx.params, order)
        else:
            big = inner.mjet(tuple(range(self.ctx.n_vars)), full, self.ctx.params, order)
        out = jets.substitute_var(big, self.ctx.var, T - t0)
        self._mjet_memo[key] = out
        return out

    def jet(self, var, point, params, order) -> jets.Jet:
        m = self.mjet(tuple(range(self.ctx.n_vars - 1)), point, params, order)
        coeffs = np.zeros(order + 1, dtype=np.complex128)
        for k in range(order + 1):
            alpha = [0] * m.dim
            alpha[var] = k
            coeffs[k] = m.coeff(alpha)
        return jets.Jet(coeffs)

    def derivs_on_grid(self, fixed, var, values, params):
        dim = self.ctx.n_vars - 1
        f1 = np.empty(len(values))
        f2 = np.empty(len(values))
        e1 = [0] * dim
        e1[var] = 1
        e2 = [0] * dim
        e2[var] = 2
        for i, v in enumerate(values):
            point = list(fixed)
            point[var] = float(v)
            m = self.mjet(tuple(range(dim)), tuple(point), params, 2)
            f1[i] = float(np.real(m.deriv(e1)))
            f2[i] = float(np.real(m.deriv(e2)))
        return f1, f2


def _phase_dd_max(phase, params, n_vars: int, var: int, boxes: list, nodes: int = 7) -> float:
    """max |phase''| over the tensor grid of the support boxes."""
    axes = [np.linspace(lo, hi, nodes) for lo, hi in boxes]
    if isinstance(phase, ex.Expr):
        d2 = ex.differentiate(ex.differentiate(phase, var), var)
        prog = kernel.compile_expr(d2, tuple(range(n_vars)), params)
        best = 0.0
        spect_axes = [axes[i] for i in range(n_vars) if i != var]
        for combo in np.ndindex(*(len(a) for a in spect_axes)):
            fixed = np.zeros(n_vars)
            rest = [i for i in range(n_vars) if i != var]
            for slot, axis, j in zip(rest, spect_axes, combo):
                fixed[slot] = axis[j]
            vals = kernel.eval_on_grid(prog, fixed, var, axes[var])
            best = max(best, float(np.max(np.abs(vals))))
        return best
    # numeric phase: coarse grid of order-2 jets
    e2 = [0] * n_vars
    e2[var] = 2
    best = 0.0
    small = [np.linspace(lo, hi, VERIFY_NODES) for lo, hi in boxes]
    for combo in np.ndindex(*(len(a) for a in small)):
        point = tuple(small[i][combo[i]] for i in range(n_vars))
        m = phase.mjet(tuple(range(n_vars)), point, params, 2)
        best = max(best, abs(float(np.real(m.deriv(e2)))))
    return best


def _snap_rational(x: float, max_den: int = 6, tol: float = 1e-6) -> float | None:
    frac = Fraction(x).limit_denominator(max_den)
    if abs(x - float(frac)) > tol * max(1.0, abs(x)):
        return None
    return float(frac)


def _spectator_grid(boxes: list, nodes: int = VERIFY_NODES):
    """Sample points slightly inside each support box (tensor grid)."""
    axes = []
    for lo, hi in boxes:
        w = hi - lo
        axes.append(np.linspace(lo + 0.06 * w, hi - 0.06 * w, nodes))
    for combo in np.ndindex(*(len(a) for a in axes)):
        yield tuple(float(axes[i][combo[i]]) for i in range(len(axes)))


def _sniff_monomial(work_ctx: SPContext, base, t0_points) -> StationaryPointForm | None:
    """Detect and certify t0(s) = c * prod s_j^{e_j} with small rational e_j.

    Exponents come from the order-1 implicit jet at the base point; the form
    is then checked against every located stationary value.  Returns None
    when the exponents fail to snap or the check fails.
    """
    T1 = t0_jet(work_ctx, base, max_total_order=1)
    t0b = float(np.real(T1.value()))
    exps = []
    for j, s in enumerate(base):
        alpha = [0] * (work_ctx.n_vars - 1)
        alpha[j] = 1
        raw = float(np.real(T1.coeff(alpha))) * s / t0b
        snapped = _snap_rational(raw)
        if snapped is None:
            return None
        exps.append(snapped)
    c = t0b / math.prod(s**e for s, e in zip(base, exps))
    form = t0_monomial(c, exps)
    for spect, t0 in t0_points:
        if abs(form.value(spect) - t0) > FORM_TOL * abs(t0):
            return None
    return form


def _substituted_expr(phase: ex.Expr, cur: int, n_vars: int, form: StationaryPointForm) -> ex.Expr:
    """Substitute the monomial stationary locus and renumber the survivors."""
    mapping: dict[int, ex.Expr] = {cur: form.expression()}
    for j in range(cur + 1, n_vars):
        mapping[j] = ex.Var(j - 1)
    # form.expression() is already written in the renumbered spectators
    return ex.fold(ex.substitute(phase, mapping))


def _memoized_rule(rule):
    memo: dict = {}

    def wrapped(point, params, order):
        key = (tuple(point), tuple(sorted(params.items())), int(order))
        hit = memo.get(key)
        if hit is None:
            hit = rule(point, params, order)
            memo[key] = hit
        return hit

    return wrapped


def run(spec: PipelineSpec, n_max: int = 3) -> PipelineResult:
    """Eliminate the variables in the given order and assemble the value.

    Each step checks its hypotheses on a spectator grid inside the support
    box, locates the stationary locus, splits off Z/sqrt(Y), passes the
    normalized output weight (memoized) to the next step, and carries the
    substituted phase forward, in closed form when the locus is certified
    monomial.  The value of the new phase is checked against the old phase
    on the stationary locus at the grid center before proceeding.
    """
    reason = prune(spec)
    if reason is not None:
        return PipelineResult(
            value=0j,
            steps=(),
            predicted=spec.predicted,
            truncation_estimate=0.0,
            stationary_chain=(),
            pruned=True,
            prune_reason=reason,
        )

    d = spec.integral.dimension
    live = list(range(d))
    phase = spec.integral.phase
    weight = spec.integral.weight
    params = dict(spec.integral.params)
    boxes = list(spec.integral.box)
    factor = 1.0
    rel_trunc = 0.0
    records: list[StepRecord] = []
    value = 0j

    for orig in spec.order:
        cur = live.index(orig)
        d_cur = len(live)
        interval = spec.windows[orig]
        lo = interval[0]
        live_boxes = [boxes[v] for v in live]

        dd = _phase_dd_max(phase, params, d_cur, cur, live_boxes)
        y_scale = lo**2 * dd
        r = y_scale / spec.x_inert**2
        if r < 1.0:
            raise StepHypothesisViolation(
                f"window for x{orig + 1} carries fewer than one oscillation (R = {r:.3g})"
            )
        spect_scales = tuple(spec.windows[v][0] for v in live if v != orig)
        ctx = SPContext(
            phase, cur, d_cur, interval, y_scale, spec.x_inert, spect_scales, r, params
        )

        if d_cur == 1:
            exp_res = sp_expand(ctx, weight, (), n_max)
            value = factor * exp_res.main_value
            rel_trunc += exp_res.truncation_estimate / max(abs(exp_res.main_value), 1e-300)
            records.append(
                StepRecord(
                    var=orig,
                    interval=interval,
                    y_scale=y_scale,
                    r_scale=r,
                    concave=exp_res.conjugated,
                    t0_form=t0_monomial(exp_res.t0, ()),
                    spectator_vars=(),
                    center_point=(),
                    expansion=exp_res,
                    weight_family=None,
                    ctx=ctx,
                )
            )
            live.remove(orig)
            continue

        spect_boxes = [boxes[v] for v in live if v != orig]
        base = tuple(0.5 * (b[0] + b[1]) for b in spect_boxes)
        _, concave = _stationary_t0(ctx, base)
        work_ctx = negate_ctx(ctx) if concave else ctx

        t0_points = []
        for spect in _spectator_grid(spect_boxes):
            t0_s, conc_s = _stationary_t0(ctx, spect)
            if conc_s != concave:
                raise StepHypothesisViolation(
                    "phase convexity flips across the spectator box"
                )
            t0_points.append((spect, t0_s))

        t0_form = _sniff_monomial(work_ctx, base, t0_points)

        if t0_form is not None and isinstance(phase, ex.Expr):
            new_phase = _substituted_expr(phase, cur, d_cur, t0_form)
        else:
            new_phase = SubstitutedPhase(ctx)

        exp_res = sp_expand(ctx, weight, base, n_max)
        rel_trunc += exp_res.truncation_estimate / max(abs(exp_res.main_value), 1e-300)

        new_at_base = phase_value(new_phase, base, params)
        if abs(new_at_base - exp_res.phase_at_t0) > 1e-10 * max(1.0, abs(exp_res.phase_at_t0)):
            raise AssertionError(
                f"substituted phase disagrees with phase(t0): "
                f"{new_at_base!r} vs {exp_res.phase_at_t0!r}"
            )

        wfam = weight_out(ctx, weight, n_max=n_max)
        records.append(
            StepRecord(
                var=orig,
                interval=interval,
                y_scale=y_scale,
                r_scale=r,
                concave=concave,
                t0_form=t0_form,
                spectator_vars=tuple(v for v in live if v != orig),
                center_point=base,
                expansion=exp_res,
                weight_family=wfam,
                ctx=ctx,
            )
        )

        factor *= lo / math.sqrt(y_scale)
        phase = new_phase
        weight = _memoized_rule(wfam.weight)
        live.remove(orig)

    chain_vals: dict[int, float] = {}
    for rec in reversed(records):
        spect = tuple(chain_vals[v] for v in rec.spectator_vars)
        if rec.t0_form is not None:
            chain_vals[rec.var] = rec.t0_form.value(spect)
        else:
            work = negate_ctx(rec.ctx) if rec.concave else rec.ctx
            res = classify(work, spect)
            if not isinstance(res, Stationary):
                raise StepHypothesisViolation(
                    f"stationary chain broke at x{rec.var + 1}: {res}"
                )
            chain_vals[rec.var] = res.t0
    chain = tuple(chain_vals[v] for v in spec.order)

    return PipelineResult(
        value=value,
        steps=tuple(records),
        predicted=spec.predicted,
        truncation_estimate=abs(value) * rel_trunc,
        stationary_chain=chain,
    )


# --- canonical three-variable example -------------------------------------

# bump half-width and center of the example weights; the stationary chain
# sits exactly at the centers when all ratios are 1
CI_WIDTH = 0.1
CI_CENTER = 1.0

_TWO_PI = 2.0 * math.pi


def _ci_lams(P: float, ratios) -> tuple[float, ...]:
    if len(ratios) != 3:
        raise DomainViolation("ratios must have three entries")
    if any(r <= 0.0 for r in ratios):
        raise DomainViolation("ratios must be positive")
    return tuple(float(r) * P for r in ratios)


def ci_oracle_spec(P: float, ratios=(1.0, 1.0, 1.0)) -> IntegralSpec:
    """Direct-quadrature form: trilinear phase, linear frequencies, bumps."""
    lams = _ci_lams(P, ratios)
    h = CI_WIDTH
    c = CI_CENTER
    phase = ex.Mul(
        ex.Const(_TWO_PI),
        ex.parse("lam1*x1 + lam2*x2 + lam3*x3 - t*x1*x2*x3"),
    )
    weight = ex.parse(
        f"bump((x1 - {c})/{h}) * bump((x2 - {c})/{h}) * bump((x3 - {c})/{h})"
    )
    box = ((c - h, c + h),) * 3
    return IntegralSpec(
        dimension=3,
        phase=phase,
        weight=weight,
        box=box,
        params={"t": float(P), "lam1": lams[0], "lam2": lams[1], "lam3": lams[2]},
    )


def ci_example(
    P: float, ratios=(1.0, 1.0, 1.0), q: float = 1e3, delta: float = 0.1
) -> PipelineSpec:
    """The canonical example, readied for `run`.

    The first variable has been rescaled to x1 <- x1*x2*x3 so that the
    phase separates: the trilinear term depends on x1 alone and the x1
    frequency spreads over the other two variables.  The weight carries the
    Jacobian 1/(x2*x3).  With all ratios 1 the three stationary values sit
    at the bump centers and the closed-form skeleton of the result is
    P^{-3/2} * e(2*sqrt(lam1*lam2*lam3/t)).

    Requires P >= 50 so each window carries many oscillations.
    """
    if P < 50.0:
        raise DomainViolation(f"example needs P >= 50, got {P}")
    lams = _ci_lams(P, ratios)
    h = CI_WIDTH
    c = CI_CENTER
    phase = ex.Mul(
        ex.Const(_TWO_PI),
        ex.parse("lam1*x1/(x2*x3) + lam2*x2 + lam3*x3 - t*x1"),
    )
    weight = ex.parse(
        f"bump((x1/(x2*x3) - {c})/{h}) * bump((x2 - {c})/{h}) * bump((x3 - {c})/{h})"
        " / (x2*x3)"
    )
    y_lo, y_hi = (c - h) ** 3, (c + h) ** 3
    box = ((y_lo, y_hi), (c - h, c + h), (c - h, c + h))
    windows = ((0.7, 1.4), (0.7, 1.4), (0.7, 1.4))
    params = {"t": float(P), "lam1": lams[0], "lam2": lams[1], "lam3": lams[2]}
    integral = IntegralSpec(3, phase, weight, box, params)
    ambient = Ambient(q=q, delta=delta, t=float(P), lams=lams, x_scales=(1.0, 1.0, 1.0))
    predicted = (1.0 / ambient.P**1.5) * np.exp(
        2j * _TWO_PI * math.sqrt(lams[0] * lams[1] * lams[2] / P)
    )
    return PipelineSpec(
        integral=integral,
        order=(2, 1, 0),
        windows=windows,
        ambient=ambient,
        predicted=complex(predicted),
    )
