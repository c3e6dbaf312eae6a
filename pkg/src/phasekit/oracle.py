"""Brute-force reference quadrature for oscillatory integrals in 1 to 3 dims.

The integrand is weight(x) * exp(i * phase(x)) over a box, with the phase in
radians. Panels are sized from a scan of the phase derivative so each initial
panel sees a bounded amount of phase motion, then refined adaptively: a panel
splits whenever its Gauss-Kronrod error estimate exceeds its share of the
total error target. Multidimensional integrals iterate the 1-d machinery
innermost-first (the innermost axis is the last one), with the inner sweep
batched across all nodes of the level above so the compiled kernel does the
work in long rows.

Determinism: panel grids, split decisions, and summation orders depend only
on the inputs, never on thread count or timing, so two runs produce
bit-identical values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from . import kernel
from ._gk15 import GAUSS_POS, WG7, WGK, XGK
from .errors import DomainViolation, QuadratureFailure

PANEL_BUDGET = 10_000_000  # per 1-d sweep; beyond this the frequency is out of desk scale
MIN_PANELS = 8
PANEL_PHASE_BUDGET = 2.5 * math.pi  # max radians of phase motion per initial panel
_SCAN_PER_AXIS = {1: 1024, 2: 64, 3: 32}
# Roundoff floors. Summed |K15-G7| noise across panels scales with the total
# |weight| mass (observed ~15 eps per unit), so the total-error floor must sit
# above it or refinement chases noise; the per-panel coefficient marks single
# panels as converged. A round that fails to cut the total by _STALL_RATIO is
# also treated as noise-bound.
_FLOOR_COEF = 32.0 * np.finfo(np.float64).eps
_NOISE_COEF = 32.0 * np.finfo(np.float64).eps
_STALL_RATIO = 0.7
_MAX_ROUNDS = 64


@dataclass(frozen=True)
class IntegralSpec:
    """One oscillatory integral: weight * exp(i*phase) over a box."""

    dimension: int
    phase: ex.Expr
    weight: ex.Expr
    box: tuple[tuple[float, float], ...]
    params: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.dimension != len(self.box):
            raise ValueError("box must list one interval per dimension")
        for a, b in self.box:
            if not (math.isfinite(a) and math.isfinite(b) and a < b):
                raise ValueError(f"bad interval [{a}, {b}]")


@dataclass(frozen=True)
class OracleResult:
    value: complex
    error_estimate: float
    panels_used: int
    n_evals: int = 0
    abs_mass: float = 0.0  # quadrature of |weight|, the cancellation yardstick


class _Tally:
    """Counts panels globally; the budget cap applies per 1-d sweep."""

    def __init__(self):
        self.panels = 0

    def count(self, n: int) -> None:
        self.panels += n

    def sweep(self, n: int, already: int) -> None:
        if already + n > PANEL_BUDGET:
            raise QuadratureFailure(
                f"panel budget {PANEL_BUDGET} exceeded on one axis sweep; "
                "the phase oscillates too fast for this tool's scale"
            )
        self.panels += n


def _require_finite(*arrays: np.ndarray) -> None:
    for a in arrays:
        if not np.isfinite(a).all():
            raise DomainViolation("integrand produced a non-finite value inside the box")


def _axis_derivative_bounds(spec: IntegralSpec) -> list[float]:
    """Conservative sup of |d(phase)/dx_i| over the box, from a tensor scan."""
    d = spec.dimension
    n = _SCAN_PER_AXIS[d]
    axes = [np.linspace(a, b, n) for a, b in spec.box]
    mesh = np.meshgrid(*axes, indexing="ij")
    slots = np.stack([m.ravel() for m in mesh])
    bounds = []
    for i in range(d):
        deriv = ex.differentiate(spec.phase, i)
        prog = kernel.compile_expr(deriv, tuple(range(d)), spec.params)
        vals = kernel.eval_slots(prog, slots)
        if not np.isfinite(vals).all():
            raise DomainViolation(
                f"phase derivative in x{i + 1} is not finite everywhere on the box"
            )
        bounds.append(1.05 * float(np.max(np.abs(vals))))
    return bounds


def _initial_panel_count(width: float, deriv_bound: float, phase_budget: float) -> int:
    by_phase = int(math.ceil(width * deriv_bound / phase_budget))
    n = max(MIN_PANELS, by_phase)
    if n > PANEL_BUDGET:
        raise QuadratureFailure(
            f"initial grid needs {n} panels, over the {PANEL_BUDGET} budget; "
            "the phase oscillates too fast for this tool's scale"
        )
    return n


def _child_edges(lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Bisect each [lo, hi]; children in (left, right) interleaved order."""
    mid = 0.5 * (lo + hi)
    clo = np.empty(2 * len(lo))
    chi = np.empty(2 * len(lo))
    clo[0::2] = lo
    chi[0::2] = mid
    clo[1::2] = mid
    chi[1::2] = hi
    return clo, chi


def _nodes_for(lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    return (mid[:, None] + half[:, None] * XGK[None, :]).ravel(), half


def _sorted_by_left(lo, hi, *cols):
    order = np.argsort(lo, kind="stable")
    return (lo[order], hi[order]) + tuple(c[order] for c in cols)


class _RowIntegrator:
    """Adaptive 1-d integration of weight*exp(i*phase) along one axis.

    Evaluates many rows (pinned values of one outer variable) on a shared
    initial grid in a single kernel call, then refines the rows that miss
    their error target individually.
    """

    def __init__(self, wprog, pprog, fixed, row_slot, col_slot, interval,
                 deriv_bound, tol, tally, phase_budget, threads):
        self.wprog = wprog
        self.pprog = pprog
        self.fixed = np.asarray(fixed, dtype=np.float64)
        self.row_slot = row_slot
        self.col_slot = col_slot
        self.a, self.b = interval
        self.n_init = _initial_panel_count(self.b - self.a, deriv_bound, phase_budget)
        self.tol = tol
        self.tally = tally
        self.threads = threads

    def integrate_rows(self, row_vals: np.ndarray):
        """Returns (values, error bounds, |weight| masses) per row."""
        row_vals = np.asarray(row_vals, dtype=np.float64)
        edges = np.linspace(self.a, self.b, self.n_init + 1)
        nodes, half = _nodes_for(edges[:-1], edges[1:])
        self.tally.count(self.n_init * max(len(row_vals), 1))
        val, err, absk = kernel.gk_rows(
            self.wprog, self.pprog, self.fixed, self.row_slot, row_vals,
            self.col_slot, nodes, half, threads=self.threads,
        )
        _require_finite(val.view(np.float64), err)
        sval = val.sum(axis=1)
        serr = err.sum(axis=1)
        sabs = absk.sum(axis=1)
        floor = _FLOOR_COEF * sabs
        target = np.maximum(self.tol * np.abs(sval), floor)
        for r in np.flatnonzero(serr > target):
            sval[r], serr[r], sabs[r] = self._refine_row(
                row_vals[r], edges[:-1].copy(), edges[1:].copy(),
                val[r].copy(), err[r].copy(), absk[r].copy(),
            )
        return sval, serr, sabs

    def _refine_row(self, row_val, lo, hi, val, err, absk):
        row = np.array([row_val])
        used = len(lo)
        prev_terr = math.inf
        for _ in range(_MAX_ROUNDS):
            total = val.sum()
            terr = err.sum()
            tabs = absk.sum()
            floor = _FLOOR_COEF * tabs
            target = max(self.tol * abs(total), floor)
            if terr <= target or terr > _STALL_RATIO * prev_terr:
                break
            prev_terr = terr
            # a panel whose estimate sits at its own roundoff scale cannot
            # improve by splitting; exclude it or the loop never terminates
            splittable = err > _NOISE_COEF * absk
            split = splittable & (err > target / len(lo))
            if not split.any():
                split = splittable & (err >= err[splittable].max()) if splittable.any() else splittable
            if not split.any():
                break
            clo, chi = _child_edges(lo[split], hi[split])
            self.tally.sweep(len(clo), already=used)
            used += len(clo)
            nodes, chalf = _nodes_for(clo, chi)
            cval, cerr, cabs = kernel.gk_rows(
                self.wprog, self.pprog, self.fixed, self.row_slot, row,
                self.col_slot, nodes, chalf, threads=self.threads,
            )
            _require_finite(cval.view(np.float64), cerr)
            keep = ~split
            lo = np.concatenate([lo[keep], clo])
            hi = np.concatenate([hi[keep], chi])
            val = np.concatenate([val[keep], cval[0]])
            err = np.concatenate([err[keep], cerr[0]])
            absk = np.concatenate([absk[keep], cabs[0]])
            lo, hi, val, err, absk = _sorted_by_left(lo, hi, val, err, absk)
        total = val.sum()
        tabs = absk.sum()
        return total, max(err.sum(), _FLOOR_COEF * tabs), tabs


class _LevelIntegrator:
    """Adaptive 1-d integration of a vectorized numeric integrand.

    Used for the outer axes of an iterated integral, where each node value is
    itself an integral carrying its own error bound. Splitting only shrinks
    this level's quadrature error; the propagated bounds are passed through.
    """

    def __init__(self, fn, interval, deriv_bound, tol, tally, phase_budget):
        self.fn = fn  # nodes -> (complex values, abs masses, error bounds)
        self.a, self.b = interval
        self.n_init = _initial_panel_count(self.b - self.a, deriv_bound, phase_budget)
        self.tol = tol
        self.tally = tally

    def _panels(self, lo, hi):
        nodes, half = _nodes_for(lo, hi)
        fv, fa, fe = self.fn(nodes)
        fv = fv.reshape(-1, 15)
        fa = fa.reshape(-1, 15)
        fe = fe.reshape(-1, 15)
        k15 = (fv * WGK).sum(axis=1)
        g7 = (fv[:, GAUSS_POS] * WG7).sum(axis=1)
        val = half * k15
        qerr = half * np.abs(k15 - g7)
        perr = half * (fe * WGK).sum(axis=1)
        absk = half * (fa * WGK).sum(axis=1)
        return val, qerr, perr, absk

    def integrate(self):
        edges = np.linspace(self.a, self.b, self.n_init + 1)
        lo, hi = edges[:-1].copy(), edges[1:].copy()
        self.tally.count(self.n_init)
        used = self.n_init
        val, qerr, perr, absk = self._panels(lo, hi)
        prev_qerr = math.inf
        for _ in range(_MAX_ROUNDS):
            total = val.sum()
            tabs = absk.sum()
            floor = _FLOOR_COEF * tabs
            target = max(self.tol * abs(total), floor)
            budget_left = target - perr.sum()
            tq = qerr.sum()
            # propagated bounds are irreducible here; stop once this level's
            # own quadrature error is negligible next to them or noise-bound
            if tq <= max(budget_left, floor) or tq <= 0.25 * perr.sum() or tq > _STALL_RATIO * prev_qerr:
                break
            prev_qerr = tq
            splittable = qerr > _NOISE_COEF * absk
            split = splittable & (qerr > max(budget_left, floor) / len(lo))
            if not split.any():
                split = splittable & (qerr >= qerr[splittable].max()) if splittable.any() else splittable
            if not split.any():
                break
            clo, chi = _child_edges(lo[split], hi[split])
            self.tally.sweep(len(clo), already=used)
            used += len(clo)
            cval, cqerr, cperr, cabsk = self._panels(clo, chi)
            keep = ~split
            lo = np.concatenate([lo[keep], clo])
            hi = np.concatenate([hi[keep], chi])
            val = np.concatenate([val[keep], cval])
            qerr = np.concatenate([qerr[keep], cqerr])
            perr = np.concatenate([perr[keep], cperr])
            absk = np.concatenate([absk[keep], cabsk])
            lo, hi, val, qerr, perr, absk = _sorted_by_left(lo, hi, val, qerr, perr, absk)
        tabs = absk.sum()
        err = max(qerr.sum() + perr.sum(), _FLOOR_COEF * tabs)
        return val.sum(), err, tabs


def quad1d(spec: IntegralSpec, tol: float,
           phase_budget: float = PANEL_PHASE_BUDGET,
           threads: int | None = None) -> OracleResult:
    """Reference value of a 1-d oscillatory integral to relative target tol."""
    if spec.dimension != 1:
        raise ValueError("quad1d requires a 1-d spec")
    if not tol > 0:
        raise ValueError("tol must be positive")
    wprog = kernel.compile_expr(spec.weight, (0,), spec.params)
    pprog = kernel.compile_expr(spec.phase, (0,), spec.params)
    dmax = _axis_derivative_bounds(spec)[0]
    tally = _Tally()
    rows = _RowIntegrator(
        wprog, pprog, np.zeros(1), -1, 0, spec.box[0], dmax,
        tol, tally, phase_budget, threads,
    )
    sval, serr, sabs = rows.integrate_rows(np.zeros(1))
    return OracleResult(
        value=complex(sval[0]),
        error_estimate=float(serr[0]),
        panels_used=tally.panels,
        n_evals=15 * tally.panels,
        abs_mass=float(sabs[0]),
    )


def quad_nd(spec: IntegralSpec, tol: float,
            phase_budget: float = PANEL_PHASE_BUDGET,
            threads: int | None = None) -> OracleResult:
    """Iterated reference value of a 2-d or 3-d oscillatory integral.

    Integration runs innermost-first over the last axis; each level gets
    tolerance tol/(3*dimension). The level above the innermost is batched so
    the kernel sees whole rows of nodes at once.
    """
    d = spec.dimension
    if d not in (2, 3):
        raise ValueError("quad_nd handles dimensions 2 and 3")
    if not tol > 0:
        raise ValueError("tol must be positive")
    active = tuple(range(d))
    wprog = kernel.compile_expr(spec.weight, active, spec.params)
    pprog = kernel.compile_expr(spec.phase, active, spec.params)
    dmax = _axis_derivative_bounds(spec)
    level_tol = tol / (3 * d)
    tally = _Tally()

    if d == 2:
        def outer_fn(x1_nodes):
            inner = _RowIntegrator(
                wprog, pprog, np.zeros(2), 0, 1, spec.box[1], dmax[1],
                level_tol, tally, phase_budget, threads,
            )
            v, e, a = inner.integrate_rows(x1_nodes)
            return v, a, e
    else:
        def outer_fn(x1_nodes):
            v = np.empty(len(x1_nodes), dtype=np.complex128)
            e = np.empty(len(x1_nodes))
            a = np.empty(len(x1_nodes))
            for i, x1 in enumerate(x1_nodes):
                fixed = np.array([x1, 0.0, 0.0])
                inner = _RowIntegrator(
                    wprog, pprog, fixed, 1, 2, spec.box[2], dmax[2],
                    level_tol, tally, phase_budget, threads,
                )

                def mid_fn(x2_nodes):
                    mv, me, ma = inner.integrate_rows(x2_nodes)
                    return mv, ma, me

                mid = _LevelIntegrator(
                    mid_fn, spec.box[1], dmax[1], level_tol, tally, phase_budget,
                )
                v[i], e[i], a[i] = mid.integrate()
            return v, a, e

    outer = _LevelIntegrator(outer_fn, spec.box[0], dmax[0], level_tol, tally, phase_budget)
    value, err, mass = outer.integrate()
    return OracleResult(
        value=complex(value),
        error_estimate=float(err),
        panels_used=tally.panels,
        n_evals=15 * tally.panels,
        abs_mass=float(mass),
    )
