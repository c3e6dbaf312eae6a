"""Truncated Taylor arithmetic: univariate jets and multivariate jets.

A ``Jet`` of order N at a point c stores coefficients a_k = f^(k)(c)/k!,
k = 0..N, as complex numbers. An ``MJet`` stores coefficients over all
multi-indices of total degree <= N in d variables. Arithmetic is exact
truncated-series algebra; derivatives never come from finite differences.

Coefficients are complex throughout: downstream the oscillatory factor
exp(i*H) makes intermediate series genuinely complex even for real inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from . import expr as ex
from .errors import DomainViolation, OrderExceeded

_REAL_TOL = 1e-12


def _require_positive_real(z: complex, what: str) -> float:
    if abs(z.imag) > _REAL_TOL * (1.0 + abs(z)) or z.real <= 0.0:
        raise DomainViolation(f"{what} needs a strictly positive real base, got {z}")
    return z.real


@dataclass(frozen=True)
class Jet:
    """Univariate truncated Taylor series; coeffs[k] = f^(k)/k!."""

    coeffs: np.ndarray  # complex128, length order+1

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    @staticmethod
    def constant(value: complex, order: int) -> "Jet":
        c = np.zeros(order + 1, dtype=np.complex128)
        c[0] = value
        return Jet(c)

    @staticmethod
    def variable(value: complex, order: int) -> "Jet":
        c = np.zeros(order + 1, dtype=np.complex128)
        c[0] = value
        if order >= 1:
            c[1] = 1.0
        return Jet(c)

    def value(self) -> complex:
        return complex(self.coeffs[0])

    def deriv(self, k: int) -> complex:
        """k-th derivative at the expansion point."""
        if k > self.order:
            raise OrderExceeded(f"jet of order {self.order} asked for derivative {k}")
        return complex(self.coeffs[k]) * math.factorial(k)

    def __add__(self, other):
        o = _as_jet(other, self.order)
        return Jet(self.coeffs + o.coeffs)

    __radd__ = __add__

    def __sub__(self, other):
        o = _as_jet(other, self.order)
        return Jet(self.coeffs - o.coeffs)

    def __rsub__(self, other):
        o = _as_jet(other, self.order)
        return Jet(o.coeffs - self.coeffs)

    def __neg__(self):
        return Jet(-self.coeffs)

    def __mul__(self, other):
        if isinstance(other, (int, float, complex)):
            return Jet(self.coeffs * other)
        n = self.order
        return Jet(np.convolve(self.coeffs, other.coeffs)[: n + 1])

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, float, complex)):
            return Jet(self.coeffs / other)
        return _jet_div(self, other)

    def __rtruediv__(self, other):
        return _jet_div(_as_jet(other, self.order), self)

    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise OrderExceeded(f"cannot extend jet of order {self.order} to {order}")
        return Jet(self.coeffs[: order + 1].copy())


def _as_jet(v, order: int) -> Jet:
    if isinstance(v, Jet):
        return v
    return Jet.constant(v, order)


def _jet_div(a: Jet, b: Jet) -> Jet:
    n = a.order
    if b.coeffs[0] == 0:
        raise DomainViolation("jet division by series with zero constant term")
    q = np.zeros(n + 1, dtype=np.complex128)
    for k in range(n + 1):
        acc = a.coeffs[k]
        if k:
            acc = acc - np.dot(b.coeffs[1 : k + 1], q[k - 1 :: -1])
        q[k] = acc / b.coeffs[0]
    return Jet(q)


def jet_exp(u: Jet) -> Jet:
    n = u.order
    e = np.zeros(n + 1, dtype=np.complex128)
    e[0] = np.exp(u.coeffs[0])
    ju = np.arange(1, n + 1) * u.coeffs[1 : n + 1]
    for k in range(1, n + 1):
        e[k] = np.dot(ju[:k], e[k - 1 :: -1][: k]) / k
    return Jet(e)


def jet_log(u: Jet) -> Jet:
    n = u.order
    x0 = _require_positive_real(complex(u.coeffs[0]), "log")
    out = np.zeros(n + 1, dtype=np.complex128)
    out[0] = math.log(x0)
    for k in range(1, n + 1):
        acc = u.coeffs[k]
        if k >= 2:
            jl = np.arange(1, k) * out[1:k]
            acc = acc - np.dot(jl, u.coeffs[k - 1 : 0 : -1]) / k
        out[k] = acc / u.coeffs[0]
    return Jet(out)


def jet_pow(u: Jet, p: float) -> Jet:
    n = u.order
    if ex.is_integer_exponent(p):
        m = int(p)
        if m == 0:
            return Jet.constant(1.0, n)
        if m < 0:
            if u.coeffs[0] == 0:
                raise DomainViolation("negative power of series with zero constant term")
            return _jet_div(Jet.constant(1.0, n), jet_pow(u, float(-m)))
        result = Jet.constant(1.0, n)
        base = u
        while m:
            if m & 1:
                result = result * base
            base = base * base
            m >>= 1
        return result
    x0 = _require_positive_real(complex(u.coeffs[0]), f"power {p}")
    out = np.zeros(n + 1, dtype=np.complex128)
    out[0] = x0 ** p
    for k in range(1, n + 1):
        acc = 0.0 + 0.0j
        for j in range(1, k + 1):
            acc += ((p + 1) * j / k - 1.0) * u.coeffs[j] * out[k - j]
        out[k] = acc / u.coeffs[0]
    return Jet(out)


def jet_sqrt(u: Jet) -> Jet:
    return jet_pow(u, 0.5)


def jet_sincos(u: Jet) -> tuple[Jet, Jet]:
    n = u.order
    s = np.zeros(n + 1, dtype=np.complex128)
    c = np.zeros(n + 1, dtype=np.complex128)
    s[0] = np.sin(u.coeffs[0])
    c[0] = np.cos(u.coeffs[0])
    ju = np.arange(1, n + 1) * u.coeffs[1 : n + 1]
    for k in range(1, n + 1):
        s[k] = np.dot(ju[:k], c[k - 1 :: -1][: k]) / k
        c[k] = -np.dot(ju[:k], s[k - 1 :: -1][: k]) / k
    return Jet(s), Jet(c)


def jet_bump(u: Jet) -> Jet:
    u0 = complex(u.coeffs[0])
    if abs(u0.imag) > _REAL_TOL * (1.0 + abs(u0)):
        raise DomainViolation("bump argument must be real")
    if abs(u0.real) >= 1.0 - ex.BUMP_EDGE_TOL:
        # smooth vanishing to all orders at the support edge
        return Jet.constant(0.0, u.order)
    one = Jet.constant(1.0, u.order)
    d = one - u * u
    return jet_exp(-(one / d))


# --- multivariate jets -----------------------------------------------------


@lru_cache(maxsize=None)
def _mjet_tables(dim: int, order: int):
    """Index bookkeeping for (dim, order): multi-index list, positions, and
    per-index recurrence/convolution tables."""
    idx: list[tuple[int, ...]] = []

    def gen(prefix, remaining, slots):
        if slots == 0:
            idx.append(tuple(prefix))
            return
        for v in range(remaining + 1):
            gen(prefix + [v], remaining - v, slots - 1)

    for total in range(order + 1):
        level: list[tuple[int, ...]] = []

        def gen_level(prefix, remaining, slots):
            if slots == 0:
                if remaining == 0:
                    level.append(tuple(prefix))
                return
            if slots == 1:
                if remaining >= 0:
                    level.append(tuple(prefix + [remaining]))
                return
            for v in range(remaining + 1):
                gen_level(prefix + [v], remaining - v, slots - 1)

        gen_level([], total, dim)
        idx.extend(level)

    pos = {a: i for i, a in enumerate(idx)}

    # full convolution pairs: out[pos(a+b)] += x[pos(a)] * y[pos(b)]
    ia, ib, io = [], [], []
    for i, a in enumerate(idx):
        ta = sum(a)
        for j, b in enumerate(idx):
            if ta + sum(b) <= order:
                ia.append(i)
                ib.append(j)
                io.append(pos[tuple(x + y for x, y in zip(a, b))])
    mul_a = np.asarray(ia, dtype=np.intp)
    mul_b = np.asarray(ib, dtype=np.intp)
    mul_o = np.asarray(io, dtype=np.intp)

    # per-alpha recurrence rows (for exp/log/pow/sin/cos):
    #   f_alpha built from sum over gamma <= alpha - e_i of
    #   w = (alpha_i - gamma_i)/alpha_i times partner index alpha - gamma
    rec = []
    for a in idx:
        t = sum(a)
        if t == 0:
            rec.append(None)
            continue
        axis = next(k for k in range(dim) if a[k] > 0)
        cap = list(a)
        cap[axis] -= 1
        gl, dl, wl, nz = [], [], [], []
        for g, gp in pos.items():
            if all(gc <= cc for gc, cc in zip(g, cap)):
                delta = tuple(ac - gc for ac, gc in zip(a, g))
                gl.append(gp)
                dl.append(pos[delta])
                wl.append((a[axis] - g[axis]) / a[axis])
                nz.append(any(g))
        rec.append(
            (
                np.asarray(gl, dtype=np.intp),
                np.asarray(dl, dtype=np.intp),
                np.asarray(wl, dtype=np.float64),
                np.asarray(nz, dtype=bool),
            )
        )

    # per-alpha strict decompositions (for division): gamma + delta = alpha, gamma != 0
    div_rows = []
    for a in idx:
        gl, dl = [], []
        for g, gp in pos.items():
            if any(g) and all(gc <= ac for gc, ac in zip(g, a)):
                gl.append(gp)
                dl.append(pos[tuple(ac - gc for ac, gc in zip(a, g))])
        div_rows.append((np.asarray(gl, dtype=np.intp), np.asarray(dl, dtype=np.intp)))

    by_degree = [[] for _ in range(order + 1)]
    for i, a in enumerate(idx):
        by_degree[sum(a)].append(i)

    return idx, pos, (mul_a, mul_b, mul_o), rec, div_rows, by_degree


@dataclass(frozen=True)
class MJet:
    """Multivariate truncated Taylor series with a total-degree cap.

    coeffs[i] corresponds to multi-index table entry i; the coefficient of
    multi-index alpha is the mixed partial divided by alpha!.
    """

    dim: int
    order: int
    coeffs: np.ndarray

    @staticmethod
    def constant(value: complex, dim: int, order: int) -> "MJet":
        idx, _, _, _, _, _ = _mjet_tables(dim, order)
        c = np.zeros(len(idx), dtype=np.complex128)
        c[0] = value
        return MJet(dim, order, c)

    @staticmethod
    def variable(i: int, value: complex, dim: int, order: int) -> "MJet":
        idx, pos, _, _, _, _ = _mjet_tables(dim, order)
        c = np.zeros(len(idx), dtype=np.complex128)
        c[0] = value
        if order >= 1:
            unit = tuple(1 if k == i else 0 for k in range(dim))
            c[pos[unit]] = 1.0
        return MJet(dim, order, c)

    def _tables(self):
        return _mjet_tables(self.dim, self.order)

    def coeff(self, alpha: Sequence[int]) -> complex:
        _, pos, _, _, _, _ = self._tables()
        key = tuple(alpha)
        if key not in pos:
            raise OrderExceeded(f"multi-index {key} beyond order {self.order}")
        return complex(self.coeffs[pos[key]])

    def deriv(self, alpha: Sequence[int]) -> complex:
        fact = 1
        for a in alpha:
            fact *= math.factorial(a)
        return self.coeff(alpha) * fact

    def value(self) -> complex:
        return complex(self.coeffs[0])

    def __add__(self, other):
        o = _as_mjet(other, self)
        return MJet(self.dim, self.order, self.coeffs + o.coeffs)

    __radd__ = __add__

    def __sub__(self, other):
        o = _as_mjet(other, self)
        return MJet(self.dim, self.order, self.coeffs - o.coeffs)

    def __rsub__(self, other):
        o = _as_mjet(other, self)
        return MJet(self.dim, self.order, o.coeffs - self.coeffs)

    def __neg__(self):
        return MJet(self.dim, self.order, -self.coeffs)

    def __mul__(self, other):
        if isinstance(other, (int, float, complex)):
            return MJet(self.dim, self.order, self.coeffs * other)
        o = _as_mjet(other, self)
        _, _, (ma, mb, mo), _, _, _ = self._tables()
        out = np.zeros_like(self.coeffs)
        np.add.at(out, mo, self.coeffs[ma] * o.coeffs[mb])
        return MJet(self.dim, self.order, out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, float, complex)):
            return MJet(self.dim, self.order, self.coeffs / other)
        return mjet_div(self, _as_mjet(other, self))

    def __rtruediv__(self, other):
        return mjet_div(_as_mjet(other, self), self)


def _as_mjet(v, like: MJet) -> MJet:
    if isinstance(v, MJet):
        if v.dim != like.dim or v.order != like.order:
            raise ValueError("mixing mjets of different shape")
        return v
    return MJet.constant(v, like.dim, like.order)


def mjet_div(a: MJet, b: MJet) -> MJet:
    if b.coeffs[0] == 0:
        raise DomainViolation("mjet division by series with zero constant term")
    idx, _, _, _, div_rows, by_degree = a._tables()
    q = np.zeros_like(a.coeffs)
    for deg in range(a.order + 1):
        for i in by_degree[deg]:
            gl, dl = div_rows[i]
            acc = a.coeffs[i]
            if len(gl):
                acc = acc - np.dot(b.coeffs[gl], q[dl])
            q[i] = acc / b.coeffs[0]
    return MJet(a.dim, a.order, q)


def _mjet_recurrence(u: MJet, seed: complex, log_mode: bool = False, pow_exp: float | None = None):
    """Shared driver for exp/log/pow recurrences over total-degree layers."""
    idx, _, _, rec, _, by_degree = u._tables()
    out = np.zeros_like(u.coeffs)
    out[0] = seed
    for deg in range(1, u.order + 1):
        for i in by_degree[deg]:
            gl, dl, w, nz = rec[i]
            if log_mode:
                acc = u.coeffs[i]
                mask = nz
                if mask.any():
                    acc = acc - np.dot(w[mask] * u.coeffs[gl[mask]], out[dl[mask]])
                out[i] = acc / u.coeffs[0]
            elif pow_exp is not None:
                lead = np.dot(w * out[gl], u.coeffs[dl])
                sub = np.dot(w[nz] * u.coeffs[gl[nz]], out[dl[nz]]) if nz.any() else 0.0
                out[i] = (pow_exp * lead - sub) / u.coeffs[0]
            else:
                out[i] = np.dot(w * out[gl], u.coeffs[dl])
    return out


def mjet_exp(u: MJet) -> MJet:
    return MJet(u.dim, u.order, _mjet_recurrence(u, np.exp(complex(u.coeffs[0]))))


def mjet_log(u: MJet) -> MJet:
    x0 = _require_positive_real(complex(u.coeffs[0]), "log")
    return MJet(u.dim, u.order, _mjet_recurrence(u, math.log(x0), log_mode=True))


def mjet_pow(u: MJet, p: float) -> MJet:
    if ex.is_integer_exponent(p):
        m = int(p)
        if m == 0:
            return MJet.constant(1.0, u.dim, u.order)
        if m < 0:
            if u.coeffs[0] == 0:
                raise DomainViolation("negative power of series with zero constant term")
            return mjet_div(MJet.constant(1.0, u.dim, u.order), mjet_pow(u, float(-m)))
        result = MJet.constant(1.0, u.dim, u.order)
        base = u
        while m:
            if m & 1:
                result = result * base
            base = base * base
            m >>= 1
        return result
    x0 = _require_positive_real(complex(u.coeffs[0]), f"power {p}")
    return MJet(u.dim, u.order, _mjet_recurrence(u, x0 ** p, pow_exp=p))


def mjet_sqrt(u: MJet) -> MJet:
    return mjet_pow(u, 0.5)


def mjet_sincos(u: MJet) -> tuple[MJet, MJet]:
    idx, _, _, rec, _, by_degree = u._tables()
    s = np.zeros_like(u.coeffs)
    c = np.zeros_like(u.coeffs)
    u0 = complex(u.coeffs[0])
    s[0] = np.sin(u0)
    c[0] = np.cos(u0)
    for deg in range(1, u.order + 1):
        for i in by_degree[deg]:
            gl, dl, w, _ = rec[i]
            s[i] = np.dot(w * c[gl], u.coeffs[dl])
            c[i] = -np.dot(w * s[gl], u.coeffs[dl])
    return MJet(u.dim, u.order, s), MJet(u.dim, u.order, c)


def mjet_bump(u: MJet) -> MJet:
    u0 = complex(u.coeffs[0])
    if abs(u0.imag) > _REAL_TOL * (1.0 + abs(u0)):
        raise DomainViolation("bump argument must be real")
    if abs(u0.real) >= 1.0 - ex.BUMP_EDGE_TOL:
        return MJet.constant(0.0, u.dim, u.order)
    one = MJet.constant(1.0, u.dim, u.order)
    return mjet_exp(-(one / (one - u * u)))


def dvar(f: MJet, axis: int, k: int = 1) -> MJet:
    """MJet of the k-th partial derivative along one axis (same expansion point).

    Coefficients beyond order - k are not recoverable and are dropped: the
    result has order reduced by k.
    """
    new_order = f.order - k
    if new_order < 0:
        raise OrderExceeded(f"cannot take {k} derivatives of order-{f.order} mjet")
    idx, pos, _, _, _, _ = _mjet_tables(f.dim, f.order)
    nidx, npos, _, _, _, _ = _mjet_tables(f.dim, new_order)
    out = np.zeros(len(nidx), dtype=np.complex128)
    for a, ip in npos.items():
        src = list(a)
        src[axis] += k
        fact = 1.0
        for m in range(k):
            fact *= src[axis] - m
        out[ip] = f.coeffs[pos[tuple(src)]] * fact
    return MJet(f.dim, new_order, out)


def drop_var(f: MJet, axis: int) -> MJet:
    """Restrict to the sub-series with zero powers of one axis (evaluating the
    dropped variable at the expansion point)."""
    idx, pos, _, _, _, _ = _mjet_tables(f.dim, f.order)
    nidx, npos, _, _, _, _ = _mjet_tables(f.dim - 1, f.order)
    out = np.zeros(len(nidx), dtype=np.complex128)
    for a, ip in npos.items():
        src = list(a)
        src.insert(axis, 0)
        out[ip] = f.coeffs[pos[tuple(src)]]
    return MJet(f.dim - 1, f.order, out)


def substitute_var(f: MJet, axis: int, delta: MJet) -> MJet:
    """Compose: substitute variable ``axis`` of f by (expansion point + delta),
    where delta is an MJet in the remaining variables with delta(0) = 0.

    Returns an MJet in f.dim - 1 variables (the remaining ones, in order).
    """
    if delta.dim != f.dim - 1 or delta.order != f.order:
        raise ValueError("delta must have f.dim-1 variables and matching order")
    if abs(complex(delta.coeffs[0])) > 1e-9 * (1.0 + float(np.abs(delta.coeffs).max())):
        raise ValueError("substitution series must vanish at the expansion point")
    idx, pos, _, _, _, _ = _mjet_tables(f.dim, f.order)
    # layers of f by power of the substituted axis, as (dim-1)-mjets
    layers = []
    nidx, npos, _, _, _, _ = _mjet_tables(f.dim - 1, f.order)
    for k in range(f.order + 1):
        c = np.zeros(len(nidx), dtype=np.complex128)
        for a, ip in npos.items():
            if sum(a) + k <= f.order:
                src = list(a)
                src.insert(axis, k)
                c[ip] = f.coeffs[pos[tuple(src)]]
        layers.append(MJet(f.dim - 1, f.order, c))
    # Horner in delta
    result = layers[-1]
    for k in range(f.order - 1, -1, -1):
        result = result * delta + layers[k]
    return result


def truncate_order(f: MJet, order: int) -> MJet:
    """Copy the coefficients of total degree <= order into a smaller table."""
    if order > f.order:
        raise OrderExceeded(f"cannot extend order-{f.order} mjet to order {order}")
    if order == f.order:
        return f
    _, pos, _, _, _, _ = _mjet_tables(f.dim, f.order)
    nidx, npos, _, _, _, _ = _mjet_tables(f.dim, order)
    out = np.zeros(len(nidx), dtype=np.complex128)
    for a, ip in npos.items():
        out[ip] = f.coeffs[pos[a]]
    return MJet(f.dim, order, out)


def pad_order(f: MJet, order: int) -> MJet:
    """Embed into a larger table, zero-filling the degrees above f.order.

    The padded coefficients are not the true high-order coefficients of
    whatever f was truncated from; callers must ensure those slots never
    influence the degrees they read back (e.g. by multiplying with a series
    of complementary valuation).
    """
    if order < f.order:
        raise OrderExceeded(f"pad target {order} below existing order {f.order}")
    if order == f.order:
        return f
    _, pos, _, _, _, _ = _mjet_tables(f.dim, f.order)
    nidx, npos, _, _, _, _ = _mjet_tables(f.dim, order)
    out = np.zeros(len(nidx), dtype=np.complex128)
    for a, ip in pos.items():
        out[npos[a]] = f.coeffs[ip]
    return MJet(f.dim, order, out)


def lift_var(f: MJet, axis: int) -> MJet:
    """Insert a new variable at position ``axis`` on which f does not depend."""
    _, pos, _, _, _, _ = _mjet_tables(f.dim, f.order)
    nidx, npos, _, _, _, _ = _mjet_tables(f.dim + 1, f.order)
    out = np.zeros(len(nidx), dtype=np.complex128)
    for a, ip in pos.items():
        dst = list(a)
        dst.insert(axis, 0)
        out[npos[tuple(dst)]] = f.coeffs[ip]
    return MJet(f.dim + 1, f.order, out)


def extract_var_power(f: MJet, axis: int, k: int, order: int) -> MJet:
    """The coefficient of (variable ``axis``)^k, as an MJet in the other axes.

    Only degrees up to f.order - k are present in the table, so ``order``
    may not exceed that.
    """
    if order + k > f.order:
        raise OrderExceeded(
            f"power {k} at order {order} needs an order-{order + k} mjet, have {f.order}"
        )
    _, pos, _, _, _, _ = _mjet_tables(f.dim, f.order)
    nidx, npos, _, _, _, _ = _mjet_tables(f.dim - 1, order)
    out = np.zeros(len(nidx), dtype=np.complex128)
    for a, ip in npos.items():
        src = list(a)
        src.insert(axis, k)
        out[ip] = f.coeffs[pos[tuple(src)]]
    return MJet(f.dim - 1, order, out)


def shift_var(f: MJet, axis: int, delta: MJet) -> MJet:
    """Recenter one axis by a series in the others: f(.., x + delta, ..).

    ``delta`` has the same dim and order as f, no dependence on ``axis``,
    and delta(0) = 0, so each delta^k has valuation k.  The result's
    coefficient at an index with axis-power m and remaining degree j is
    exact whenever m + j <= f.order (the zero-padded high coefficients of
    the derivative factors only meet delta powers that vanish there).
    """
    if delta.dim != f.dim or delta.order != f.order:
        raise ValueError("delta must match f in dim and order")
    if delta.coeffs[0] != 0:
        raise ValueError("shift series must vanish at the expansion point")
    out = f
    dpow = delta
    fact = 1.0
    for k in range(1, f.order + 1):
        fact *= k
        out = out + pad_order(dvar(f, axis, k), f.order) * dpow * (1.0 / fact)
        if k < f.order:
            dpow = dpow * delta
    return out


# --- jets of expression trees ----------------------------------------------


def jet_of(e: ex.Expr, var: int, point: Sequence[float], params: Mapping[str, float], order: int) -> Jet:
    """Univariate jet of an expression in one variable, others held fixed."""

    def rec(node: ex.Expr) -> Jet:
        match node:
            case ex.Var(index=i):
                if i == var:
                    return Jet.variable(point[i], order)
                return Jet.constant(point[i], order)
            case ex.Param(name=n):
                if n not in params:
                    raise_unbound(n)
                return Jet.constant(params[n], order)
            case ex.Const(value=v):
                return Jet.constant(v, order)
            case ex.Add(a=a, b=b):
                return rec(a) + rec(b)
            case ex.Sub(a=a, b=b):
                return rec(a) - rec(b)
            case ex.Mul(a=a, b=b):
                return rec(a) * rec(b)
            case ex.Div(a=a, b=b):
                return rec(a) / rec(b)
            case ex.Neg(a=a):
                return -rec(a)
            case ex.Pow(base=b, exponent=p):
                return jet_pow(rec(b), p)
            case ex.Func(name=n, arg=a):
                u = rec(a)
                if n == "exp":
                    return jet_exp(u)
                if n == "log":
                    return jet_log(u)
                if n == "sqrt":
                    return jet_sqrt(u)
                if n == "sin":
                    return jet_sincos(u)[0]
                if n == "cos":
                    return jet_sincos(u)[1]
                if n == "bump":
                    return jet_bump(u)
        raise TypeError(f"not an Expr node: {node!r}")

    return rec(e)


def mjet_of(
    e: ex.Expr,
    active: Sequence[int],
    point: Sequence[float],
    params: Mapping[str, float],
    order: int,
) -> MJet:
    """Multivariate jet in the listed variables (in that order), others fixed."""
    dim = len(active)
    slot = {v: k for k, v in enumerate(active)}

    def rec(node: ex.Expr) -> MJet:
        match node:
            case ex.Var(index=i):
                if i in slot:
                    return MJet.variable(slot[i], point[i], dim, order)
                return MJet.constant(point[i], dim, order)
            case ex.Param(name=n):
                if n not in params:
                    raise_unbound(n)
                return MJet.constant(params[n], dim, order)
            case ex.Const(value=v):
                return MJet.constant(v, dim, order)
            case ex.Add(a=a, b=b):
                return rec(a) + rec(b)
            case ex.Sub(a=a, b=b):
                return rec(a) - rec(b)
            case ex.Mul(a=a, b=b):
                return rec(a) * rec(b)
            case ex.Div(a=a, b=b):
                return rec(a) / rec(b)
            case ex.Neg(a=a):
                return -rec(a)
            case ex.Pow(base=b, exponent=p):
                return mjet_pow(rec(b), p)
            case ex.Func(name=n, arg=a):
                u = rec(a)
                if n == "exp":
                    return mjet_exp(u)
                if n == "log":
                    return mjet_log(u)
                if n == "sqrt":
                    return mjet_sqrt(u)
                if n == "sin":
                    return mjet_sincos(u)[0]
                if n == "cos":
                    return mjet_sincos(u)[1]
                if n == "bump":
                    return mjet_bump(u)
        raise TypeError(f"not an Expr node: {node!r}")

    return rec(e)


def raise_unbound(name: str):
    from .errors import UnboundParameter

    raise UnboundParameter(f"parameter {name!r} is unbound")
