"""Locate and classify stationary points of one active variable.

A phase is examined along one coordinate while the remaining coordinates
are held at spectator values.  `classify` decides between a single interior
stationary point, a monotone phase, and the cases the expansion cannot
handle (inflection inside the window, stationary point at the edge).
`t0_jet` upgrades the located point to a truncated Taylor expansion in the
spectator variables, and `t0_monomial` wraps the closed forms that arise
for monomial phases.

Phases are usually expressions, but a multi-step reduction can produce a
phase that only exists numerically.  Such a phase may be any object with
the methods

    value(point, params) -> float
    derivs_on_grid(fixed, var, values, params) -> (f1, f2) arrays
    mjet(active, point, params, order) -> MJet
    jet(var, point, params, order) -> Jet

and an optional integer attribute `grid_hint` that caps the classification
grid (numeric phases are expensive to sample).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from . import expr as ex
from . import jets, kernel
from .errors import DomainViolation, NoConvergence, SingularImplicit

# classification grid resolution; second-derivative sign and the
# no-stationary-point minimum are certified on this grid
GRID_SIZE = 1025

# |phase'(t0)| <= NEWTON_TOL * Y / Z declares convergence
NEWTON_TOL = 1e-12
MAX_NEWTON_ITER = 100

# stationary points closer than EDGE_MARGIN * Z to an endpoint are refused
EDGE_MARGIN = 1e-6

# |phase''(t0)| < SINGULAR_TOL * Y / Z^2 means the implicit jet is unsafe
SINGULAR_TOL = 1e-10

# classify reports a concave window with this reason; the expansion layer
# matches on it to evaluate the negated phase and conjugate the result
CONCAVE_REASON = "phase is concave on the window; negate and conjugate"


@dataclass(frozen=True)
class SPContext:
    """One variable of a phase, with the scales needed for tolerances.

    `phase` is an expression in variables x1..x{n_vars} (radians), or a
    numeric phase object as described in the module docstring.  `var` is
    the 0-based index of the active variable; every other variable is a
    spectator.  `interval` is the active window, typically (Z, 2Z).  `y_scale`
    bounds the phase magnitude on the window, `x_scale` is the relative
    smoothing scale of the weight, and `spectator_scales` are the analogous
    scales of the spectator variables in ascending variable order.  `r_scale`
    is the oscillation count; the useful regime is y_scale/x_scale^2 >=
    r_scale >= 1.
    """

    phase: ex.Expr | object
    var: int
    n_vars: int
    interval: tuple[float, float]
    y_scale: float
    x_scale: float
    spectator_scales: tuple[float, ...] = ()
    r_scale: float = 1.0
    params: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        lo, hi = self.interval
        if not (0.0 < lo < hi) or not (math.isfinite(lo) and math.isfinite(hi)):
            raise DomainViolation(f"interval must satisfy 0 < lo < hi, got {self.interval}")
        if not 0 <= self.var < self.n_vars:
            raise DomainViolation(f"var {self.var} out of range for {self.n_vars} variables")
        if len(self.spectator_scales) != self.n_vars - 1:
            raise DomainViolation(
                f"expected {self.n_vars - 1} spectator scales, got {len(self.spectator_scales)}"
            )
        if self.y_scale <= 0 or self.x_scale <= 0:
            raise DomainViolation("scales must be positive")
        if not (self.r_scale >= 1.0):
            raise DomainViolation(f"r_scale must be >= 1, got {self.r_scale}")
        if self.y_scale / self.x_scale**2 < self.r_scale:
            raise DomainViolation(
                "scales violate y_scale / x_scale^2 >= r_scale: "
                f"{self.y_scale} / {self.x_scale}^2 < {self.r_scale}"
            )

    @property
    def spectator_vars(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.n_vars) if i != self.var)


@dataclass(frozen=True)
class Stationary:
    """Exactly one interior stationary point, with phase'' > 0 alongside it."""

    t0: float


@dataclass(frozen=True)
class NonStationary:
    """phase' has constant sign; the minimum of |phase'| over the grid."""

    min_abs_deriv: float


@dataclass(frozen=True)
class Indeterminate:
    """The window is outside the method's hypotheses; `reason` says why."""

    reason: str


StationaryResult = Stationary | NonStationary | Indeterminate


class NegatedPhase:
    """Sign-flipped view of a numeric phase (expressions use Neg instead)."""

    __slots__ = ("inner",)

    def __init__(self, inner):
        self.inner = inner

    @property
    def grid_hint(self):
        return getattr(self.inner, "grid_hint", GRID_SIZE)

    def value(self, point, params):
        return -self.inner.value(point, params)

    def derivs_on_grid(self, fixed, var, values, params):
        f1, f2 = self.inner.derivs_on_grid(fixed, var, values, params)
        return -np.asarray(f1), -np.asarray(f2)

    def mjet(self, active, point, params, order):
        return -self.inner.mjet(active, point, params, order)

    def jet(self, var, point, params, order):
        inner = self.inner.jet(var, point, params, order)
        return jets.Jet(-inner.coeffs)


def negate_phase(phase):
    if isinstance(phase, ex.Expr):
        return ex.Neg(phase)
    if isinstance(phase, NegatedPhase):
        return phase.inner
    return NegatedPhase(phase)


def negate_ctx(ctx: SPContext) -> SPContext:
    return replace(ctx, phase=negate_phase(ctx.phase))


def phase_value(phase, point, params) -> float:
    # phases are real-valued; evaluate returns complex with zero imag
    if isinstance(phase, ex.Expr):
        return float(ex.evaluate(phase, tuple(point), params).real)
    return float(phase.value(tuple(point), params))


def _params_key(params: dict) -> tuple:
    return tuple(sorted(params.items()))


@lru_cache(maxsize=256)
def _cached_programs(phase: ex.Expr, var: int, n_vars: int, params_key: tuple):
    params = dict(params_key)
    d1 = ex.differentiate(phase, var)
    d2 = ex.differentiate(d1, var)
    act = tuple(range(n_vars))
    return (
        kernel.compile_expr(d1, act, params),
        kernel.compile_expr(d2, act, params),
    )


def _derivs_on_grid(ctx: SPContext, fixed, values):
    """phase' and phase'' along the active variable at the given values."""
    vals = np.asarray(values, dtype=np.float64)
    if isinstance(ctx.phase, ex.Expr):
        p1, p2 = _cached_programs(ctx.phase, ctx.var, ctx.n_vars, _params_key(ctx.params))
        f1 = kernel.eval_on_grid(p1, fixed, ctx.var, vals)
        f2 = kernel.eval_on_grid(p2, fixed, ctx.var, vals)
    else:
        f1, f2 = ctx.phase.derivs_on_grid(fixed, ctx.var, vals, ctx.params)
        f1 = np.asarray(f1, dtype=np.float64)
        f2 = np.asarray(f2, dtype=np.float64)
    if not (np.all(np.isfinite(f1)) and np.all(np.isfinite(f2))):
        raise DomainViolation("phase derivative is not finite on the window")
    return f1, f2


def _grid_size(ctx: SPContext) -> int:
    if isinstance(ctx.phase, ex.Expr):
        return GRID_SIZE
    return int(getattr(ctx.phase, "grid_hint", GRID_SIZE))


def _fixed_slots(ctx: SPContext, spectator_values) -> np.ndarray:
    spect = tuple(float(v) for v in spectator_values)
    if len(spect) != ctx.n_vars - 1:
        raise DomainViolation(
            f"expected {ctx.n_vars - 1} spectator values, got {len(spect)}"
        )
    fixed = np.zeros(ctx.n_vars)
    for slot, val in zip(ctx.spectator_vars, spect):
        fixed[slot] = val
    return fixed


def classify(ctx: SPContext, spectator_values=()) -> StationaryResult:
    """Decide how the phase behaves along the active variable.

    Returns Stationary(t0) only when phase'' stays positive on the window
    and phase' crosses zero at a single interior point, found by bisection
    brackets refined with Newton steps to |phase'(t0)| <= 1e-12 * Y/Z.
    A phase that is concave throughout is reported Indeterminate with a
    reason naming negation: the caller evaluates the negated phase and
    conjugates, rather than duplicating the expansion for phase'' < 0.
    """
    fixed = _fixed_slots(ctx, spectator_values)
    lo, hi = ctx.interval
    grid = np.linspace(lo, hi, _grid_size(ctx))
    f1, f2 = _derivs_on_grid(ctx, fixed, grid)

    # a phase monotone along the window needs no convexity assumption
    if np.all(f1 > 0.0) or np.all(f1 < 0.0):
        return NonStationary(float(np.min(np.abs(f1))))

    if np.all(f2 < 0.0):
        return Indeterminate(CONCAVE_REASON)
    if not np.all(f2 > 0.0):
        return Indeterminate("second derivative changes sign on the window")

    # phase'' > 0 on the grid: phase' is increasing, so the endpoint signs
    # decide existence and the crossing bracket is unique
    if f1[0] > 0.0 or f1[-1] < 0.0:
        return NonStationary(float(np.min(np.abs(f1))))

    if f1[0] == 0.0:
        return Indeterminate("stationary point at the window edge")
    # f1[0] < 0 <= f1[-1] and f1 is increasing: bracket the first sign change
    k = int(np.argmax(f1 >= 0.0))
    a, b = float(grid[k - 1]), float(grid[k])

    tol = NEWTON_TOL * ctx.y_scale / lo
    t = 0.5 * (a + b)
    converged = False
    for _ in range(MAX_NEWTON_ITER):
        ft_arr, gt_arr = _derivs_on_grid(ctx, fixed, [t])
        ft = float(ft_arr[0])
        if abs(ft) <= tol:
            converged = True
            break
        if ft < 0.0:
            a = t
        else:
            b = t
        gt = float(gt_arr[0])
        t_new = t - ft / gt if gt > 0.0 else 0.5 * (a + b)
        if not (a < t_new < b):
            t_new = 0.5 * (a + b)
        t = t_new
    if not converged:
        raise NoConvergence(
            f"stationary point search did not reach |phase'| <= {tol:.3e} "
            f"in {MAX_NEWTON_ITER} iterations"
        )

    margin = EDGE_MARGIN * lo
    if t - lo < margin or hi - t < margin:
        return Indeterminate("stationary point at the window edge")
    return Stationary(float(t))


def find_root_bisection(ctx: SPContext, spectator_values=(), tol_factor: float = NEWTON_TOL) -> float:
    """Locate the zero of phase' by pure bisection (no Newton steps).

    Exists so the mixed bracket/Newton search in `classify` can be checked
    against an implementation with different failure modes.
    """
    fixed = _fixed_slots(ctx, spectator_values)
    lo, hi = ctx.interval
    grid = np.linspace(lo, hi, _grid_size(ctx))
    f1, _ = _derivs_on_grid(ctx, fixed, grid)
    signs = np.signbit(f1)
    if signs[0] == signs[-1]:
        raise DomainViolation("phase' does not change sign on the window")
    k = int(np.argmax(signs != signs[0]))
    a, b = float(grid[k - 1]), float(grid[k])
    fa = float(f1[k - 1])
    tol = tol_factor * ctx.y_scale / lo
    for _ in range(200):
        t = 0.5 * (a + b)
        ft = float(_derivs_on_grid(ctx, fixed, [t])[0][0])
        if abs(ft) <= tol or (b - a) < 1e-17 * lo:
            return t
        if (ft < 0.0) == (fa < 0.0):
            a, fa = t, ft
        else:
            b = t
    return 0.5 * (a + b)


@dataclass(frozen=True)
class StationaryPointForm:
    """Closed-form stationary point t0(s) = c * prod s_i^{a_i}.

    Monomial phases admit these exact forms; the pipeline uses them to
    cross-check the implicit expansions from `t0_jet`.
    """

    c: float
    exponents: tuple[float, ...]

    def __post_init__(self):
        if not (self.c > 0.0 and math.isfinite(self.c)):
            raise DomainViolation(f"coefficient must be positive and finite, got {self.c}")

    def value(self, spectators=()) -> float:
        out = self.c
        for s, a in zip(spectators, self.exponents, strict=True):
            out *= float(s) ** a
        return out

    def expression(self) -> ex.Expr:
        out: ex.Expr = ex.Const(self.c)
        for i, a in enumerate(self.exponents):
            if a != 0.0:
                out = ex.Mul(out, ex.Pow(ex.Var(i), a))
        return out

    def mjet(self, spectators=(), order: int = 4) -> jets.MJet:
        """Taylor coefficients of t0 in the spectators at `spectators`."""
        dim = len(self.exponents)
        if len(spectators) != dim:
            raise DomainViolation(f"expected {dim} spectator values, got {len(spectators)}")
        if dim == 0:
            return jets.MJet.constant(self.c, 0, order)
        point = tuple(float(s) for s in spectators)
        if any(s <= 0.0 for s in point):
            raise DomainViolation("spectator values must be positive")
        return jets.mjet_of(self.expression(), tuple(range(dim)), point, {}, order)


def t0_monomial(c: float, exponents) -> StationaryPointForm:
    return StationaryPointForm(float(c), tuple(float(a) for a in exponents))


def t0_jet(ctx: SPContext, spectator_point=(), max_total_order: int = 4) -> jets.MJet:
    """Taylor-expand the stationary point in the spectator variables.

    Solves phase'(t0(s), s) = 0 around the located point by Newton iteration
    carried out on truncated jets: each step substitutes the current
    expansion of t0 into the jets of phase' and phase'' and corrects by their
    ratio, doubling the number of correct layers.  The order-1 coefficients
    come out as -phase'_{s_j} / phase'' evaluated at the point, and higher
    orders follow the implicit chain rule automatically.

    Raises SingularImplicit when |phase''(t0)| < 1e-10 * Y/Z^2, and
    NoConvergence if the residual refuses to vanish.
    """
    res = classify(ctx, spectator_point)
    if not isinstance(res, Stationary):
        raise DomainViolation(f"no interior stationary point to expand: {res}")
    t0 = res.t0
    lo, _ = ctx.interval

    act = tuple(range(ctx.n_vars))
    point = [0.0] * ctx.n_vars
    point[ctx.var] = t0
    for slot, val in zip(ctx.spectator_vars, spectator_point):
        point[slot] = float(val)
    point = tuple(point)

    order = max_total_order
    if isinstance(ctx.phase, ex.Expr):
        d1 = ex.differentiate(ctx.phase, ctx.var)
        d2 = ex.differentiate(d1, ctx.var)
        phi2 = ex.evaluate(d2, point, ctx.params)
        G = jets.mjet_of(d1, act, point, ctx.params, order)
        H = jets.mjet_of(d2, act, point, ctx.params, order)
    else:
        big = ctx.phase.mjet(act, point, ctx.params, order + 2)
        G = jets.truncate_order(jets.dvar(big, ctx.var, 1), order)
        H = jets.truncate_order(jets.dvar(big, ctx.var, 2), order)
        phi2 = float(np.real(H.value()))

    if abs(phi2) < SINGULAR_TOL * ctx.y_scale / lo**2:
        raise SingularImplicit(
            f"|phase''(t0)| = {abs(phi2):.3e} is below the stability threshold"
        )
    ns = ctx.n_vars - 1

    T = jets.MJet.constant(t0, ns, order)
    scale = abs(phi2)
    # Newton on truncated jets doubles the correct valuation each pass, so
    # ceil(log2(order + 1)) passes suffice from the converged base point;
    # a couple extra absorb float error in t0 itself.  A step-size stopping
    # rule would stall on the coefficient noise floor at high orders.
    passes = max(3, math.ceil(math.log2(order + 1)) + 2)
    for _ in range(passes):
        dT = T - t0
        Fv = jets.substitute_var(G, ctx.var, dT)
        Ft = jets.substitute_var(H, ctx.var, dT)
        step = jets.mjet_div(Fv, Ft)
        T = T - step

    resid = jets.substitute_var(G, ctx.var, T - t0)
    if np.max(np.abs(resid.coeffs)) > 1e-8 * scale * max(abs(t0), 1.0):
        raise NoConvergence(
            f"implicit jet residual {np.max(np.abs(resid.coeffs)):.3e} too large"
        )
    return T
