"""Stationary-phase main term, correction terms, and the normalized output weight.

Around a nondegenerate stationary point t0 the integral of w * e^{i phase}
along the active variable is

    e^{i phase(t0)} * (phase''(t0))^{-1/2} * sum_n c_n (phase''(t0))^{-n} G^{(2n)}(t0)

where G(t) = w(t) * e^{iH(t)} and H is the phase minus its value and its
quadratic part at t0.  The constants c_n come from Fresnel moments.  The
same sum without e^{i phase(t0)} and rescaled by sqrt(Y)/Z is the normalized
output weight W: an O(1) quantity that, as a function of the spectator
variables, is itself an inert family (checkable with inert.check_inert).

Phases follow the contract documented in `stationary`: an expression or a
numeric phase object.  Weights may likewise be expressions or numeric
rules `rule(point, params, order) -> MJet` over all current variables, as
produced by `weight_out` for the next reduction step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import expr as ex
from . import jets
from .errors import (
    DomainViolation,
    OrderExceeded,
    SingularImplicit,
    StepHypothesisViolation,
)
from .inert import FamilySpec
from .stationary import (
    CONCAVE_REASON,
    Indeterminate,
    SPContext,
    Stationary,
    classify,
    negate_ctx,
    t0_jet,
)

MAX_N = 10

# relative size allowed for the jet coefficients of H at orders 0..2; a
# larger order-1 coefficient means t0 was not actually stationary
H_JET_TOL = 1e-9


@dataclass(frozen=True)
class SPConstants:
    """Fresnel-moment constants c_n = sqrt(2*pi) e^{i pi/4} (i/2)^n / n!."""

    c: np.ndarray

    @property
    def n_max(self) -> int:
        return len(self.c) - 1


def sp_constants(n_max: int) -> SPConstants:
    if not 0 <= n_max <= MAX_N:
        raise OrderExceeded(f"n_max must be in 0..{MAX_N}, got {n_max}")
    c0 = math.sqrt(2.0 * math.pi) * np.exp(0.25j * math.pi)
    c = np.array(
        [c0 * (0.5j) ** n / math.factorial(n) for n in range(n_max + 1)],
        dtype=np.complex128,
    )
    return SPConstants(c)


@dataclass(frozen=True)
class ExpansionResult:
    """Evaluated expansion at one spectator point.

    `terms[n]` is c_n * (phase'')^{-n} * G^{(2n)}(t0); the 1/sqrt(phase'')
    factor is applied once in `main_value` and `W_value`.  When the window
    was concave the result was computed for the negated phase and
    conjugated, `conjugated` is set, and `phase_dd_at_t0` refers to the
    convexified (negated) phase.
    """

    t0: float
    phase_at_t0: float
    phase_dd_at_t0: float
    terms: np.ndarray
    main_value: complex
    W_value: complex
    truncation_estimate: float
    conjugated: bool = False


def _full_point(ctx: SPContext, t0: float, spectators) -> tuple[float, ...]:
    point = [0.0] * ctx.n_vars
    point[ctx.var] = t0
    for slot, val in zip(ctx.spectator_vars, spectators):
        point[slot] = float(val)
    return tuple(point)


def _phase_line_jet(phase, var, point, params, order) -> jets.Jet:
    if isinstance(phase, ex.Expr):
        return jets.jet_of(phase, var, point, params, order)
    return phase.jet(var, tuple(point), params, order)


def _line_from_mjet(full: jets.MJet, var: int, order: int) -> jets.Jet:
    coeffs = np.zeros(order + 1, dtype=np.complex128)
    for k in range(order + 1):
        alpha = [0] * full.dim
        alpha[var] = k
        coeffs[k] = full.coeff(alpha)
    return jets.Jet(coeffs)


def _weight_line_jet(weight, var, point, params, order) -> jets.Jet:
    if isinstance(weight, ex.Expr):
        return jets.jet_of(weight, var, point, params, order)
    return _line_from_mjet(weight(tuple(point), params, order), var, order)


def _weight_full_mjet(weight, n_vars, point, params, order) -> jets.MJet:
    if isinstance(weight, ex.Expr):
        act = tuple(range(n_vars))
        return jets.mjet_of(weight, act, tuple(point), params, order)
    out = weight(tuple(point), params, order)
    if out.dim != n_vars or out.order < order:
        raise DomainViolation(
            f"weight rule returned dim {out.dim} order {out.order}, "
            f"need dim {n_vars} order {order}"
        )
    return jets.truncate_order(out, order)


def _conjugate_weight(weight):
    """The pointwise complex conjugate of a weight.

    Needed by the concave fold: integrating W e^{i phase} over a concave
    window equals the conjugate of integrating conj(W) e^{-i phase}.
    Expression weights evaluate real and pass through unchanged; numeric
    rules get their series conjugated (the variables are real, so the
    conjugate of the jet is the jet of the conjugate).
    """
    if isinstance(weight, ex.Expr):
        return weight

    def conj_rule(point, params, order, _inner=weight):
        m = _inner(point, params, order)
        return jets.MJet(m.dim, m.order, np.conj(m.coeffs))

    return conj_rule


def g_derivatives(
    phase,
    weight,
    t0: float,
    spectators,
    n_max: int,
    var: int = 0,
    params: dict | None = None,
) -> np.ndarray:
    """Even derivatives G^{(2n)}(t0), n = 0..n_max, of G = w * e^{iH}.

    H(t) = phase(t) - phase(t0) - phase''(t0) (t - t0)^2 / 2 along the active
    variable; its jet must vanish through order 2 (order 0 and 2 by
    construction, order 1 because t0 is stationary), which is asserted.
    """
    params = params or {}
    n_vars = 1 + len(spectators)
    point = [0.0] * n_vars
    point[var] = float(t0)
    rest = [i for i in range(n_vars) if i != var]
    for slot, val in zip(rest, spectators):
        point[slot] = float(val)

    order = max(2, 2 * n_max)
    pj = _phase_line_jet(phase, var, point, params, order)
    wj = _weight_line_jet(weight, var, point, params, order)

    scale = float(np.max(np.abs(pj.coeffs[:3]))) + 1e-300
    h = pj.coeffs.copy()
    h[0] = 0.0
    h[2] = 0.0
    if abs(h[1]) > H_JET_TOL * scale:
        raise AssertionError(
            f"H jet order-1 coefficient {abs(h[1]):.3e} exceeds {H_JET_TOL:.0e} "
            "of the phase scale: t0 is not a stationary point"
        )
    h[1] = 0.0

    g = wj * jets.jet_exp(jets.Jet(1j * h))
    return np.array(
        [g.coeffs[2 * n] * math.factorial(2 * n) for n in range(n_max + 1)],
        dtype=np.complex128,
    )


def sp_expand(ctx: SPContext, weight, spectators=(), n_max: int = 3) -> ExpansionResult:
    """Assemble the expansion at one spectator point.

    A concave window is folded onto the convex case: the negated phase is
    expanded and the result conjugated, so negating the phase conjugates
    `main_value` exactly.  Windows without a usable stationary point raise
    StepHypothesisViolation.
    """
    res = classify(ctx, spectators)
    if isinstance(res, Indeterminate) and res.reason == CONCAVE_REASON:
        out = sp_expand(negate_ctx(ctx), _conjugate_weight(weight), spectators, n_max)
        return ExpansionResult(
            t0=out.t0,
            phase_at_t0=-out.phase_at_t0,
            phase_dd_at_t0=out.phase_dd_at_t0,
            terms=np.conj(out.terms),
            main_value=complex(np.conj(out.main_value)),
            W_value=complex(np.conj(out.W_value)),
            truncation_estimate=out.truncation_estimate,
            conjugated=True,
        )
    if not isinstance(res, Stationary):
        raise StepHypothesisViolation(f"window has no usable stationary point: {res}")

    t0 = res.t0
    lo, _ = ctx.interval
    point = _full_point(ctx, t0, spectators)
    pj2 = _phase_line_jet(ctx.phase, ctx.var, point, ctx.params, 2)
    phi0 = float(np.real(pj2.coeffs[0]))
    phi2 = float(np.real(2.0 * pj2.coeffs[2]))
    if phi2 < 1e-10 * ctx.y_scale / lo**2:
        raise SingularImplicit(
            f"phase''(t0) = {phi2:.3e} is below the stability threshold"
        )

    g = g_derivatives(
        ctx.phase, weight, t0, spectators, n_max, var=ctx.var, params=ctx.params
    )
    c = sp_constants(n_max).c
    powers = phi2 ** (-np.arange(n_max + 1, dtype=np.float64))
    terms = c * powers * g
    total = complex(np.sum(terms))
    root = math.sqrt(phi2)
    main_value = complex(np.exp(1j * phi0) * total / root)
    w_value = complex(math.sqrt(ctx.y_scale) / lo * total / root)
    trunc = abs(terms[-1]) / root + lo * ctx.r_scale ** (-(n_max + 1))
    return ExpansionResult(
        t0=t0,
        phase_at_t0=phi0,
        phase_dd_at_t0=phi2,
        terms=terms,
        main_value=main_value,
        W_value=w_value,
        truncation_estimate=float(trunc),
    )


def w_value_mjet(
    ctx: SPContext, weight, spectator_point, order: int, n_max: int = 3
) -> jets.MJet:
    """The normalized weight W as a truncated series in the spectators.

    Runs the whole expansion in multivariate jets: the stationary point
    becomes a series t0(s) (from t0_jet), the phase and weight are recentered
    on it with shift_var, H drops its orders 0..2 identically in s, and every
    G^{(2n)}(t0(s), s) comes out as a series of order `order` in s.  Concave
    windows fold onto the convex case with a coefficientwise conjugation,
    matching the pointwise fold in sp_expand.
    """
    if ctx.n_vars < 2:
        raise DomainViolation("spectator expansion needs at least one spectator")
    res = classify(ctx, spectator_point)
    if isinstance(res, Indeterminate) and res.reason == CONCAVE_REASON:
        out = w_value_mjet(
            negate_ctx(ctx), _conjugate_weight(weight), spectator_point, order, n_max
        )
        return jets.MJet(out.dim, out.order, np.conj(out.coeffs))
    if not isinstance(res, Stationary):
        raise StepHypothesisViolation(f"window has no usable stationary point: {res}")

    big = order + max(2, 2 * n_max)
    T = t0_jet(ctx, spectator_point, max_total_order=big)
    t0 = float(T.value().real)
    lo, _ = ctx.interval

    point = _full_point(ctx, t0, spectator_point)
    act = tuple(range(ctx.n_vars))
    if isinstance(ctx.phase, ex.Expr):
        phase_big = jets.mjet_of(ctx.phase, act, point, ctx.params, big)
    else:
        phase_big = ctx.phase.mjet(act, point, ctx.params, big)
    weight_big = _weight_full_mjet(weight, ctx.n_vars, point, ctx.params, big)
    delta = jets.lift_var(T - t0, ctx.var)

    phase_sh = jets.shift_var(phase_big, ctx.var, delta)
    weight_sh = jets.shift_var(weight_big, ctx.var, delta)

    # zero H through order 2 in the active offset; the order-1 row must
    # already vanish identically in s because t0(s) is stationary
    idx, _, _, _, _, _ = jets._mjet_tables(ctx.n_vars, big)
    scale = float(np.max(np.abs(phase_sh.coeffs))) + 1e-300
    h = phase_sh.coeffs.copy()
    row1 = np.array([i for i, a in enumerate(idx) if a[ctx.var] == 1], dtype=np.intp)
    if float(np.max(np.abs(h[row1]))) > H_JET_TOL * scale:
        raise AssertionError(
            "H series retains an order-1 part in the active offset: t0 jet is wrong"
        )
    kill = np.array([i for i, a in enumerate(idx) if a[ctx.var] <= 2], dtype=np.intp)
    h[kill] = 0.0
    G = weight_sh * jets.mjet_exp(jets.MJet(ctx.n_vars, big, 1j * h))

    phi2 = 2.0 * jets.extract_var_power(phase_sh, ctx.var, 2, order)
    if abs(phi2.value()) < 1e-10 * ctx.y_scale / lo**2:
        raise SingularImplicit("phase''(t0) vanishes at the spectator point")

    c = sp_constants(n_max).c
    total = jets.MJet.constant(0.0, ctx.n_vars - 1, order)
    inv_phi2 = jets.mjet_pow(phi2, -1.0)
    phi2_pow = jets.MJet.constant(1.0, ctx.n_vars - 1, order)
    for n in range(n_max + 1):
        g2n = jets.extract_var_power(G, ctx.var, 2 * n, order) * math.factorial(2 * n)
        total = total + c[n] * phi2_pow * g2n
        if n < n_max:
            phi2_pow = phi2_pow * inv_phi2
    return (math.sqrt(ctx.y_scale) / lo) * total * jets.mjet_pow(phi2, -0.5)


def weight_out(
    ctx: SPContext,
    weight,
    n_max: int = 3,
    scale=1.0,
    param_ranges: dict | None = None,
):
    """Package the normalized weight as a family over the spectators.

    For a one-variable context there are no spectators and the single number
    W_value is returned.  Otherwise the result is a FamilySpec whose weight
    rule evaluates `w_value_mjet` at each requested spectator point, with the
    context parameters overridden by the sampled family parameters; it is
    directly consumable by inert.check_inert.  Points where the weight
    vanishes along the whole active window produce a zero series (the output
    weight inherits the spectator support of the input weight).
    """
    if ctx.n_vars == 1:
        return sp_expand(ctx, weight, (), n_max).W_value

    wprog_cache: dict = {}

    def rule(point, params, order) -> jets.MJet:
        merged = dict(ctx.params)
        merged.update(params)
        ctx2 = replace(ctx, params=merged)
        try:
            return w_value_mjet(ctx2, weight, point, order, n_max)
        except (StepHypothesisViolation, DomainViolation):
            if _weight_vanishes(ctx2, weight, point, wprog_cache):
                return jets.MJet.constant(0.0, ctx.n_vars - 1, order)
            raise

    return FamilySpec(
        dimension=ctx.n_vars - 1,
        weight=rule,
        x_scales=ctx.spectator_scales,
        scale=scale,
        param_ranges=param_ranges or {},
    )


def _weight_vanishes(ctx: SPContext, weight, point, cache) -> bool:
    """True when the weight is identically ~0 along the active window at
    this spectator point (then the output weight is 0 by definition even if
    the phase analysis fails there)."""
    from . import kernel

    lo, hi = ctx.interval
    if not isinstance(weight, ex.Expr):
        # numeric rule: sample the window; a failing sample means no certificate
        for t in np.linspace(lo, hi, 17):
            try:
                val = weight(_full_point(ctx, float(t), point), ctx.params, 0).value()
            except Exception:
                return False
            if abs(val) > 1e-300:
                return False
        return True

    key = tuple(sorted(ctx.params.items()))
    prog = cache.get(key)
    if prog is None:
        prog = kernel.compile_expr(weight, tuple(range(ctx.n_vars)), ctx.params)
        cache[key] = prog
    fixed = np.zeros(ctx.n_vars)
    for slot, val in zip(ctx.spectator_vars, point):
        fixed[slot] = float(val)
    grid = np.linspace(lo, hi, 257)
    vals = kernel.eval_on_grid(prog, fixed, ctx.var, grid)
    return bool(np.max(np.abs(vals)) < 1e-300)
