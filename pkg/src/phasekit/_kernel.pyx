# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled backend: bytecode VM and Gauss-Kronrod panel sums.

Same contract as ``_kernel_py``. The hot loops run without the GIL so the
Python-level row chunking in ``phasekit.kernel`` can use real threads.
"""

from libc.math cimport cos, exp, fabs, log, pow, sin, sqrt

import numpy as np

BACKEND_NAME = "compiled"

cdef double EDGE = 1.0 - 1e-12


cdef void _vm(const int[::1] ops, const int[::1] args, const double[::1] consts,
              double[:, ::1] slots, double[:, ::1] stack) noexcept nogil:
    cdef Py_ssize_t nops = ops.shape[0]
    cdef Py_ssize_t n = slots.shape[1]
    cdef Py_ssize_t i
    cdef int k, op, a, sp = 0
    cdef double c, v
    for k in range(nops):
        op = ops[k]
        a = args[k]
        if op == 0:  # load variable slot
            for i in range(n):
                stack[sp, i] = slots[a, i]
            sp += 1
        elif op == 1:  # load constant
            c = consts[a]
            for i in range(n):
                stack[sp, i] = c
            sp += 1
        elif op == 2:
            sp -= 1
            for i in range(n):
                stack[sp - 1, i] += stack[sp, i]
        elif op == 3:
            sp -= 1
            for i in range(n):
                stack[sp - 1, i] -= stack[sp, i]
        elif op == 4:
            sp -= 1
            for i in range(n):
                stack[sp - 1, i] *= stack[sp, i]
        elif op == 5:
            sp -= 1
            for i in range(n):
                stack[sp - 1, i] /= stack[sp, i]
        elif op == 6:
            for i in range(n):
                stack[sp - 1, i] = -stack[sp - 1, i]
        elif op == 7:
            c = consts[a]
            for i in range(n):
                stack[sp - 1, i] = pow(stack[sp - 1, i], c)
        elif op == 8:
            for i in range(n):
                stack[sp - 1, i] = exp(stack[sp - 1, i])
        elif op == 9:
            for i in range(n):
                stack[sp - 1, i] = log(stack[sp - 1, i])
        elif op == 10:
            for i in range(n):
                stack[sp - 1, i] = sqrt(stack[sp - 1, i])
        elif op == 11:
            for i in range(n):
                stack[sp - 1, i] = sin(stack[sp - 1, i])
        elif op == 12:
            for i in range(n):
                stack[sp - 1, i] = cos(stack[sp - 1, i])
        elif op == 13:  # bump: zero at and outside the support edge
            for i in range(n):
                v = stack[sp - 1, i]
                if fabs(v) >= EDGE:
                    stack[sp - 1, i] = 0.0
                else:
                    stack[sp - 1, i] = exp(-1.0 / (1.0 - v * v))


def vm_eval(const int[::1] ops, const int[::1] args, const double[::1] consts,
            int stack_need, slots_in):
    """Run one program over ``slots_in`` (n_slots, n); returns float64[n]."""
    slots_arr = np.ascontiguousarray(slots_in, dtype=np.float64)
    cdef double[:, ::1] slots = slots_arr
    cdef Py_ssize_t n = slots.shape[1]
    stack_arr = np.empty((max(stack_need, 1), n), dtype=np.float64)
    cdef double[:, ::1] stack = stack_arr
    with nogil:
        _vm(ops, args, consts, slots, stack)
    return stack_arr[0].copy()


def gk_rows(const int[::1] wops, const int[::1] wargs, const double[::1] wconsts, int wstack,
            const int[::1] pops, const int[::1] pargs, const double[::1] pconsts, int pstack,
            const double[::1] fixed, int row_slot, const double[::1] row_vals,
            int col_slot, const double[::1] col_nodes, const double[::1] half,
            const double[::1] wgk, const double[::1] wg7, const int[::1] gauss_pos,
            double complex[:, ::1] out_val, double[:, ::1] out_err, double[:, ::1] out_absk):
    """Panel sums of weight * exp(i*phase) for each (row value, panel)."""
    cdef Py_ssize_t npan = half.shape[0]
    cdef Py_ssize_t nslots = fixed.shape[0]
    cdef Py_ssize_t n = col_nodes.shape[0]
    cdef Py_ssize_t nr = row_vals.shape[0]

    slots_arr = np.empty((max(nslots, 1), max(n, 1)), dtype=np.float64)
    cdef double[:, ::1] slots = slots_arr
    cdef int wdepth = max(wstack, 1)
    stack_w_arr = np.empty((wdepth, max(n, 1)), dtype=np.float64)
    stack_p_arr = np.empty((max(pstack, 1), max(n, 1)), dtype=np.float64)
    cdef double[:, ::1] stack_w = stack_w_arr
    cdef double[:, ::1] stack_p = stack_p_arr

    cdef Py_ssize_t r, p, i, base
    cdef int k, q
    cdef double wv, phv, h, kr, ki, gr, gi, ab
    cdef double fr[15]
    cdef double fi[15]
    cdef double wa[15]

    with nogil:
        for i in range(nslots):
            wv = fixed[i]
            for p in range(n):
                slots[i, p] = wv
        if nslots:
            for i in range(n):
                slots[col_slot, i] = col_nodes[i]
        for r in range(nr):
            if row_slot >= 0:
                wv = row_vals[r]
                for i in range(n):
                    slots[row_slot, i] = wv
            _vm(wops, wargs, wconsts, slots, stack_w)
            _vm(pops, pargs, pconsts, slots, stack_p)
            for p in range(npan):
                base = p * 15
                for k in range(15):
                    wv = stack_w[0, base + k]
                    phv = stack_p[0, base + k]
                    fr[k] = wv * cos(phv)
                    fi[k] = wv * sin(phv)
                    wa[k] = fabs(wv)
                kr = 0.0
                ki = 0.0
                ab = 0.0
                for k in range(15):
                    kr += wgk[k] * fr[k]
                    ki += wgk[k] * fi[k]
                    ab += wgk[k] * wa[k]
                gr = 0.0
                gi = 0.0
                for k in range(7):
                    q = gauss_pos[k]
                    gr += wg7[k] * fr[q]
                    gi += wg7[k] * fi[q]
                h = half[p]
                out_val[r, p] = h * kr + 1j * (h * ki)
                out_err[r, p] = h * sqrt((kr - gr) * (kr - gr) + (ki - gi) * (ki - gi))
                out_absk[r, p] = h * ab
