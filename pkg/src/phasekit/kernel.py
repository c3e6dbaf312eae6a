"""Expression bytecode and the evaluation backend used by the oracle.

Expression trees compile to a tiny stack program (two int32 arrays plus a
float64 constant pool). Two interchangeable backends execute programs over
arrays of quadrature nodes and assemble Gauss-Kronrod panel sums:

* ``phasekit._kernel`` - Cython extension, used when importable;
* ``phasekit._kernel_py`` - pure numpy, always available.

Selection happens at import; set PHASEKIT_KERNEL=compiled|pure to force one.
Both backends implement identical semantics, bit for bit where the same libm
is used; domain failures (log of a negative, division by zero) surface as
non-finite outputs and are raised by the caller, never silently summed.

PHASEKIT_THREADS (or the ``threads`` argument) caps worker threads. Rows are
split into fixed-size chunks whose boundaries do not depend on the thread
count, and chunk results are reassembled in index order, so results are
bit-identical for any thread count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import expr as ex
from ._gk15 import GAUSS_POS, WG7, WGK, XGK
from .errors import DomainViolation, UnboundParameter

OP_LOAD_VAR = 0
OP_LOAD_CONST = 1
OP_ADD = 2
OP_SUB = 3
OP_MUL = 4
OP_DIV = 5
OP_NEG = 6
OP_POW = 7
OP_EXP = 8
OP_LOG = 9
OP_SQRT = 10
OP_SIN = 11
OP_COS = 12
OP_BUMP = 13

_FUNC_OPS = {
    "exp": OP_EXP,
    "log": OP_LOG,
    "sqrt": OP_SQRT,
    "sin": OP_SIN,
    "cos": OP_COS,
    "bump": OP_BUMP,
}

_ROW_CHUNK = 64  # rows per work unit; fixed so threading cannot change results


@dataclass(frozen=True)
class Program:
    ops: np.ndarray  # int32
    args: np.ndarray  # int32
    consts: np.ndarray  # float64
    stack_need: int
    n_slots: int


def compile_expr(e: ex.Expr, active: tuple[int, ...], params=None) -> Program:
    """Compile for evaluation over the ``active`` variables (slot order given).

    Parameters are folded to constants; remaining free parameters or variables
    outside ``active`` are errors.
    """
    if params:
        e = ex.bind_params(e, params)
    e = ex.fold(e)
    missing = ex.free_params(e)
    if missing:
        raise UnboundParameter(f"parameters {sorted(missing)} unbound at compile time")
    stray = ex.free_vars(e) - set(active)
    if stray:
        names = ", ".join(f"x{i + 1}" for i in sorted(stray))
        raise DomainViolation(f"variables {names} have no slot in this program")
    slot = {v: k for k, v in enumerate(active)}
    ops: list[int] = []
    args: list[int] = []
    consts: list[float] = []

    def add_const(v: float) -> int:
        consts.append(float(v))
        return len(consts) - 1

    depth = 0
    max_depth = 0

    def emit(op: int, arg: int, effect: int):
        nonlocal depth, max_depth
        ops.append(op)
        args.append(arg)
        depth += effect
        max_depth = max(max_depth, depth)

    def rec(node: ex.Expr):
        match node:
            case ex.Var(index=i):
                emit(OP_LOAD_VAR, slot[i], +1)
            case ex.Const(value=v):
                emit(OP_LOAD_CONST, add_const(v), +1)
            case ex.Add(a=a, b=b):
                rec(a)
                rec(b)
                emit(OP_ADD, 0, -1)
            case ex.Sub(a=a, b=b):
                rec(a)
                rec(b)
                emit(OP_SUB, 0, -1)
            case ex.Mul(a=a, b=b):
                rec(a)
                rec(b)
                emit(OP_MUL, 0, -1)
            case ex.Div(a=a, b=b):
                rec(a)
                rec(b)
                emit(OP_DIV, 0, -1)
            case ex.Neg(a=a):
                rec(a)
                emit(OP_NEG, 0, 0)
            case ex.Pow(base=b, exponent=p):
                rec(b)
                emit(OP_POW, add_const(p), 0)
            case ex.Func(name=n, arg=a):
                rec(a)
                emit(_FUNC_OPS[n], 0, 0)
            case _:
                raise TypeError(f"cannot compile node {node!r}")

    rec(e)
    return Program(
        ops=np.asarray(ops, dtype=np.int32),
        args=np.asarray(args, dtype=np.int32),
        consts=np.asarray(consts, dtype=np.float64),
        stack_need=max(max_depth, 1),
        n_slots=len(active),
    )


# --- backend selection ------------------------------------------------------

_FORCED = os.environ.get("PHASEKIT_KERNEL", "").strip().lower()
_impl = None
if _FORCED in ("", "compiled"):
    try:
        from . import _kernel as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = None
        if _FORCED == "compiled":
            raise
if _impl is None:
    from . import _kernel_py as _impl  # type: ignore[no-redef]

BACKEND = getattr(_impl, "BACKEND_NAME", "pure")


def backend_name() -> str:
    return BACKEND


def thread_count(threads: int | None = None) -> int:
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get("PHASEKIT_THREADS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def eval_slots(prog: Program, slots: np.ndarray) -> np.ndarray:
    """Evaluate a program over an arbitrary slot matrix (n_slots, n)."""
    slots = np.ascontiguousarray(slots, dtype=np.float64)
    return _impl.vm_eval(prog.ops, prog.args, prog.consts, prog.stack_need, slots)


def eval_on_grid(prog: Program, fixed: np.ndarray, var_slot: int, values: np.ndarray) -> np.ndarray:
    """Evaluate a program along one variable, others pinned at ``fixed``."""
    values = np.ascontiguousarray(values, dtype=np.float64)
    slots = np.repeat(np.asarray(fixed, dtype=np.float64)[:, None], len(values), axis=1)
    if prog.n_slots:
        slots[var_slot] = values
    return _impl.vm_eval(prog.ops, prog.args, prog.consts, prog.stack_need, slots)


def eval_at(prog: Program, point: np.ndarray) -> float:
    slots = np.asarray(point, dtype=np.float64)[:, None]
    return float(_impl.vm_eval(prog.ops, prog.args, prog.consts, prog.stack_need, slots)[0])


def panel_nodes(edges: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Map panel edges to (flattened GK nodes, half widths)."""
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = (mid[:, None] + half[:, None] * XGK[None, :]).ravel()
    return nodes, half


def gk_rows(
    wprog: Program,
    pprog: Program,
    fixed: np.ndarray,
    row_slot: int,
    row_vals: np.ndarray,
    col_slot: int,
    col_nodes: np.ndarray,
    half: np.ndarray,
    threads: int | None = None,
):
    """K15 panel sums of weight*exp(i*phase) for each (row value, panel).

    Returns (values complex128[nr, np], error estimates float64[nr, np],
    weighted absolute sums float64[nr, np]). The error estimate per panel is
    |K15 - G7| scaled by the panel half width.
    """
    row_vals = np.ascontiguousarray(row_vals, dtype=np.float64)
    col_nodes = np.ascontiguousarray(col_nodes, dtype=np.float64)
    half = np.ascontiguousarray(half, dtype=np.float64)
    fixed = np.ascontiguousarray(fixed, dtype=np.float64)
    nr = len(row_vals)
    npan = len(half)
    val = np.empty((nr, npan), dtype=np.complex128)
    err = np.empty((nr, npan), dtype=np.float64)
    absk = np.empty((nr, npan), dtype=np.float64)

    def run(lo: int, hi: int):
        _impl.gk_rows(
            wprog.ops, wprog.args, wprog.consts, wprog.stack_need,
            pprog.ops, pprog.args, pprog.consts, pprog.stack_need,
            fixed, row_slot, row_vals[lo:hi], col_slot, col_nodes, half,
            WGK, WG7, GAUSS_POS,
            val[lo:hi], err[lo:hi], absk[lo:hi],
        )

    nthreads = thread_count(threads)
    bounds = list(range(0, nr, _ROW_CHUNK)) + [nr]
    if nthreads <= 1 or len(bounds) <= 2:
        run(0, nr)
    else:
        with ThreadPoolExecutor(max_workers=nthreads) as pool:
            futures = [pool.submit(run, bounds[i], bounds[i + 1]) for i in range(len(bounds) - 1)]
            for f in futures:
                f.result()
    return val, err, absk
