"""Expansion terms, output weight, and the concave fold.

Closed forms used below come from the pure-quadratic case: for phase
A*(t - c)^2 the residual phase H vanishes identically, so the term of index
n is c_n * (2A)^{-n} * w^{(2n)}(c).  Derivatives of the window atom at its
center are known ratios of its value, which pins every term exactly.
"""

import math

import numpy as np
import pytest

import phasekit.expr as ex
from phasekit import jets
from phasekit.errors import (
    DomainViolation,
    OrderExceeded,
    SingularImplicit,
    StepHypothesisViolation,
)
from phasekit.expansion import (
    g_derivatives,
    sp_constants,
    sp_expand,
    w_value_mjet,
    weight_out,
)
from phasekit.inert import FamilySpec, check_inert
from phasekit.oracle import IntegralSpec, quad1d
from phasekit.stationary import SPContext

B0 = math.exp(-1.0)  # atom value at its center

# b^{(2n)}(0) / b(0) for the atom; see the jet tests for the derivation
BUMP_RATIO = {0: 1.0, 2: -2.0, 4: -12.0, 6: -120.0, 8: 1680.0}


def fresnel_ctx(a, phase_str=None, y=None):
    phase = ex.parse(phase_str or "A*(x1 - 1.5)^2")
    y = y if y is not None else max(1.0, 0.25 * a)
    return SPContext(
        phase=phase,
        var=0,
        n_vars=1,
        interval=(1.0, 2.0),
        y_scale=y,
        x_scale=1.0,
        r_scale=y,
        params={"A": a},
    )


ATOM = ex.parse("bump(2*x1 - 3)")


def test_sp_constants_closed_form():
    sc = sp_constants(5)
    c0 = math.sqrt(2.0 * math.pi) * np.exp(0.25j * math.pi)
    assert sc.c[0] == pytest.approx(c0, rel=1e-15)
    for n in range(5):
        assert sc.c[n + 1] / sc.c[n] == pytest.approx(0.5j / (n + 1), rel=1e-14)
    with pytest.raises(OrderExceeded):
        sp_constants(11)
    with pytest.raises(OrderExceeded):
        sp_constants(-1)


def test_pure_quadratic_term_ratios():
    # w = bump(2t - 3): w^{(2n)}(1.5) = 4^n b^{(2n)}(0), so
    #   t1/t0 = (i/2)(2A)^{-1} * 4*(-2)          = -2i/A
    #   t2/t0 = ((i/2)^2/2)(2A)^{-2} * 16*(-12)  =  6/A^2
    #   t3/t0 = ((i/2)^3/6)(2A)^{-3} * 64*(-120) = 20i/A^3
    #   t4/t0 = ((i/2)^4/24)(2A)^{-4} * 256*1680 = 70/A^4
    a = 500.0
    out = sp_expand(fresnel_ctx(a), ATOM, (), n_max=4)
    t = out.terms
    assert t[1] / t[0] == pytest.approx(-2j / a, rel=1e-10)
    assert t[2] / t[0] == pytest.approx(6.0 / a**2, rel=1e-10)
    assert t[3] / t[0] == pytest.approx(20j / a**3, rel=1e-9)
    assert t[4] / t[0] == pytest.approx(70.0 / a**4, rel=1e-8)


def test_main_term_matches_gaussian_closed_form():
    # n_max = 0, H = 0: main = c0 * w(1.5) / sqrt(2A) = sqrt(pi/A) e^{i pi/4} / e
    a = 4000.0
    out = sp_expand(fresnel_ctx(a), ATOM, (), n_max=0)
    want = math.sqrt(math.pi / a) * np.exp(0.25j * math.pi) * B0
    assert out.main_value == pytest.approx(want, rel=1e-13)
    assert out.t0 == pytest.approx(1.5, abs=1e-12)
    assert out.phase_at_t0 == pytest.approx(0.0, abs=1e-9)
    assert out.phase_dd_at_t0 == pytest.approx(2.0 * a, rel=1e-12)
    assert not out.conjugated


def test_main_and_w_value_exact_relation():
    # main = e^{i phase(t0)} * (Z / sqrt(Y)) * W must hold to the last bit,
    # whatever scales the context declares
    ctx = SPContext(
        phase=ex.parse("A*(x1 - 2.25)^2 + 0.1*(x1 - 2.25)^3"),
        var=0,
        n_vars=1,
        interval=(1.5, 3.0),
        y_scale=7.3 * 100.0,
        x_scale=1.0,
        r_scale=2.0,
        params={"A": 100.0},
    )
    w = ex.parse("bump((x1 - 2.25)/0.75)")
    out = sp_expand(ctx, w, (), n_max=3)
    z = ctx.interval[0]
    back = np.exp(1j * out.phase_at_t0) * (z / math.sqrt(ctx.y_scale)) * out.W_value
    assert out.main_value == pytest.approx(complex(back), rel=1e-15)


def test_truncation_estimate_formula():
    a = 300.0
    n_max = 2
    ctx = fresnel_ctx(a)
    out = sp_expand(ctx, ATOM, (), n_max=n_max)
    want = abs(out.terms[-1]) / math.sqrt(out.phase_dd_at_t0)
    want += ctx.interval[0] * ctx.r_scale ** (-(n_max + 1))
    assert out.truncation_estimate == pytest.approx(want, rel=1e-12)


def test_expansion_against_quadrature():
    # cubic term switches on genuine corrections (H != 0)
    a = 300.0
    phase = ex.parse("A*(x1 - 1.5)^2 + 7*(x1 - 1.5)^3")
    ctx = fresnel_ctx(a, phase_str="A*(x1 - 1.5)^2 + 7*(x1 - 1.5)^3")
    out = sp_expand(ctx, ATOM, (), n_max=3)
    spec = IntegralSpec(1, phase, ATOM, ((1.0, 2.0),), {"A": a})
    orc = quad1d(spec, 1e-12)
    diff = abs(orc.value - out.main_value)
    assert diff <= max(5.0 * out.truncation_estimate, 1e-12)
    assert diff / abs(orc.value) < 1e-5


def test_concave_fold_conjugates_exactly():
    a = 300.0
    pos = fresnel_ctx(a, phase_str="A*(x1 - 1.5)^2 + 7*(x1 - 1.5)^3")
    neg = fresnel_ctx(a, phase_str="0 - A*(x1 - 1.5)^2 - 7*(x1 - 1.5)^3")
    out_p = sp_expand(pos, ATOM, (), n_max=3)
    out_n = sp_expand(neg, ATOM, (), n_max=3)
    assert out_n.conjugated
    assert not out_p.conjugated
    assert out_n.main_value == complex(np.conj(out_p.main_value))
    assert out_n.W_value == complex(np.conj(out_p.W_value))
    assert out_n.phase_at_t0 == -out_p.phase_at_t0
    assert out_n.truncation_estimate == out_p.truncation_estimate
    # and the folded value still tracks the quadrature of the concave integral
    spec = IntegralSpec(
        1,
        ex.parse("0 - A*(x1 - 1.5)^2 - 7*(x1 - 1.5)^3"),
        ATOM,
        ((1.0, 2.0),),
        {"A": a},
    )
    orc = quad1d(spec, 1e-12)
    assert abs(orc.value - out_n.main_value) <= 5.0 * out_n.truncation_estimate


def test_g_derivatives_closed_form():
    # phase A u^2 + B u^3 (u = t - 1.5) has t0 = 1.5 and H = B u^3, so
    # G/b(0) = (1 - 4u^2 - 8u^4 - (32/3)u^6 ...) * (1 + iBu^3 - B^2 u^6/2 ...)
    # giving G''(0) = -8 b0, G''''(0) = -192 b0,
    # G^{(6)}(0) = 720*(-32/3 - B^2/2) b0 = (-7680 - 360 B^2) b0
    b = 2.0
    phase = ex.parse(f"250*(x1 - 1.5)^2 + {b}*(x1 - 1.5)^3")
    g = g_derivatives(phase, ATOM, 1.5, (), 3)
    assert g[0] == pytest.approx(B0, rel=1e-12)
    assert g[1] == pytest.approx(-8.0 * B0, rel=1e-11)
    assert g[2] == pytest.approx(-192.0 * B0, rel=1e-10)
    assert g[3] == pytest.approx((-7680.0 - 360.0 * b * b) * B0, rel=1e-9)


def test_g_derivatives_rejects_non_stationary_center():
    phase = ex.parse("250*(x1 - 1.5)^2")
    with pytest.raises(AssertionError, match="stationary"):
        g_derivatives(phase, ATOM, 1.4, (), 2)


def test_monotone_phase_raises():
    ctx = SPContext(
        phase=ex.parse("R*x1"),
        var=0,
        n_vars=1,
        interval=(1.0, 2.0),
        y_scale=2000.0,
        x_scale=1.0,
        params={"R": 1000.0},
    )
    with pytest.raises(StepHypothesisViolation):
        sp_expand(ctx, ATOM, (), 2)


def test_flat_curvature_raises():
    ctx = SPContext(
        phase=ex.parse("(x1 - 1.5)^2"),
        var=0,
        n_vars=1,
        interval=(1.0, 2.0),
        y_scale=1e12,
        x_scale=1.0,
    )
    with pytest.raises(SingularImplicit):
        sp_expand(ctx, ATOM, (), 1)


def two_var_ctx(a=400.0):
    # t0(x2) = x2 exactly; spectator window centered at 1.5
    return SPContext(
        phase=ex.parse("A*(x1 - x2)^2 + 3*(x1 - x2)^3"),
        var=0,
        n_vars=2,
        interval=(1.0, 2.0),
        y_scale=max(1.0, 0.25 * a),
        x_scale=1.0,
        spectator_scales=(1.0,),
        r_scale=max(1.0, 0.25 * a),
        params={"A": a},
    )


W2 = ex.parse("bump(2*x1 - 3) * bump(2*x2 - 3)")


def test_w_value_series_matches_pointwise():
    ctx = two_var_ctx()
    s = 1.43
    M = w_value_mjet(ctx, W2, (s,), order=3, n_max=2)
    point = sp_expand(ctx, W2, (s,), n_max=2)
    assert complex(M.value()) == pytest.approx(point.W_value, rel=1e-12)
    # first derivative against centered differences of the pointwise route
    h = 1e-5
    up = sp_expand(ctx, W2, (s + h,), n_max=2).W_value
    dn = sp_expand(ctx, W2, (s - h,), n_max=2).W_value
    fd = (up - dn) / (2.0 * h)
    c1 = complex(np.asarray(M.coeffs)[1])
    assert c1 == pytest.approx(fd, rel=1e-7)


def test_w_value_series_concave_fold():
    pos = two_var_ctx()
    neg = SPContext(
        phase=ex.parse("0 - A*(x1 - x2)^2 - 3*(x1 - x2)^3"),
        var=0,
        n_vars=2,
        interval=(1.0, 2.0),
        y_scale=pos.y_scale,
        x_scale=1.0,
        spectator_scales=(1.0,),
        r_scale=pos.r_scale,
        params=pos.params,
    )
    mp = w_value_mjet(pos, W2, (1.43,), order=3, n_max=2)
    mn = w_value_mjet(neg, W2, (1.43,), order=3, n_max=2)
    assert np.allclose(np.conj(np.asarray(mp.coeffs)), np.asarray(mn.coeffs),
                       rtol=1e-12, atol=1e-15)


def test_weight_out_single_variable_is_number():
    a = 500.0
    val = weight_out(fresnel_ctx(a), ATOM, n_max=2)
    assert isinstance(val, complex)
    assert val == pytest.approx(sp_expand(fresnel_ctx(a), ATOM, (), 2).W_value)


def test_weight_out_family_is_inert():
    fam = weight_out(two_var_ctx(), W2, n_max=2)
    assert isinstance(fam, FamilySpec)
    assert fam.dimension == 1
    assert fam.x_scales == (1.0,)
    got = fam.weight((1.43,), {}, 3)
    want = w_value_mjet(two_var_ctx(), W2, (1.43,), order=3, n_max=2)
    assert np.allclose(np.asarray(got.coeffs), np.asarray(want.coeffs), rtol=1e-12)
    rep = check_inert(fam, max_order=2, n_param_samples=1, n_point_samples=9)
    assert rep.verdict, rep.to_text()


def test_weight_out_zero_series_where_weight_dies():
    # at spectator 2.5 the phase is monotone on the window, but the weight
    # vanishes there, so the output weight is the zero series by definition
    fam = weight_out(two_var_ctx(), W2, n_max=2)
    out = fam.weight((2.5,), {}, 3)
    assert float(np.max(np.abs(np.asarray(out.coeffs)))) == 0.0
    # without the vanishing weight the same spectator point is an error
    fam_bad = weight_out(two_var_ctx(), ex.parse("bump(2*x1 - 3)"), n_max=2)
    with pytest.raises(StepHypothesisViolation):
        fam_bad.weight((2.5,), {}, 3)
