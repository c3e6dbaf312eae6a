"""Pure numpy backend: bytecode VM and Gauss-Kronrod panel sums.

Semantics match the compiled backend in ``_kernel.pyx``. Domain failures
(division by zero, log of a nonpositive value, fractional power of a negative
base) produce non-finite entries; callers inspect and raise. All reductions
run over fixed-shape arrays in a fixed order, so results do not depend on
thread count or chunking.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "pure"

_EDGE = 1.0 - 1e-12


def vm_eval(ops, args, consts, stack_need, slots):
    """Run one program over ``slots`` (n_slots, n); returns float64[n]."""
    n = slots.shape[1]
    stack = np.empty((max(stack_need, 1), n), dtype=np.float64)
    sp = 0
    with np.errstate(all="ignore"):
        for op, a in zip(ops, args):
            if op == 0:  # load variable slot
                stack[sp] = slots[a]
                sp += 1
            elif op == 1:  # load constant
                stack[sp] = consts[a]
                sp += 1
            elif op == 2:
                sp -= 1
                stack[sp - 1] += stack[sp]
            elif op == 3:
                sp -= 1
                stack[sp - 1] -= stack[sp]
            elif op == 4:
                sp -= 1
                stack[sp - 1] *= stack[sp]
            elif op == 5:
                sp -= 1
                stack[sp - 1] /= stack[sp]
            elif op == 6:
                np.negative(stack[sp - 1], out=stack[sp - 1])
            elif op == 7:
                np.power(stack[sp - 1], consts[a], out=stack[sp - 1])
            elif op == 8:
                np.exp(stack[sp - 1], out=stack[sp - 1])
            elif op == 9:
                np.log(stack[sp - 1], out=stack[sp - 1])
            elif op == 10:
                np.sqrt(stack[sp - 1], out=stack[sp - 1])
            elif op == 11:
                np.sin(stack[sp - 1], out=stack[sp - 1])
            elif op == 12:
                np.cos(stack[sp - 1], out=stack[sp - 1])
            elif op == 13:  # bump: zero at and outside the support edge
                u = stack[sp - 1]
                out = np.zeros(n, dtype=np.float64)
                inside = np.abs(u) < _EDGE
                ui = u[inside]
                out[inside] = np.exp(-1.0 / (1.0 - ui * ui))
                stack[sp - 1] = out
            else:
                raise ValueError(f"bad opcode {op}")
    return stack[0].copy()


def gk_rows(
    wops, wargs, wconsts, wstack,
    pops, pargs, pconsts, pstack,
    fixed, row_slot, row_vals, col_slot, col_nodes, half,
    wgk, wg7, gauss_pos,
    out_val, out_err, out_absk,
):
    """Panel sums of weight * exp(i*phase) for each (row value, panel).

    ``col_nodes`` holds 15 Kronrod nodes per panel, flattened. Writes scaled
    K15 values, |K15 - G7| error estimates, and K15 sums of |weight| into the
    three output views.
    """
    npan = half.shape[0]
    nslots = fixed.shape[0]
    n = col_nodes.shape[0]
    slots = np.repeat(fixed[:, None], n, axis=1)
    if nslots:
        slots[col_slot] = col_nodes
    for r in range(row_vals.shape[0]):
        if row_slot >= 0:
            slots[row_slot] = row_vals[r]
        w = vm_eval(wops, wargs, wconsts, wstack, slots)
        ph = vm_eval(pops, pargs, pconsts, pstack, slots)
        f = (w * np.exp(1j * ph)).reshape(npan, 15)
        aw = np.abs(w).reshape(npan, 15)
        k15 = (f * wgk).sum(axis=1)
        g7 = (f[:, gauss_pos] * wg7).sum(axis=1)
        out_val[r] = half * k15
        out_err[r] = half * np.abs(k15 - g7)
        out_absk[r] = half * (aw * wgk).sum(axis=1)
