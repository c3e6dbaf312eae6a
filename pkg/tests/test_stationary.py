"""Classification of phases along one variable and implicit stationary jets.

Closed forms used here are derived in the tests themselves: quadratic phases
place the stationary point where the linear term says, and x1^2/2 - m(s)*x1
has t0(s) = m(s) exactly for any spectator monomial m.
"""

import math

import numpy as np
import pytest

import phasekit.expr as ex
from phasekit import jets
from phasekit.errors import DomainViolation, SingularImplicit
from phasekit.stationary import (
    CONCAVE_REASON,
    Indeterminate,
    NonStationary,
    SPContext,
    Stationary,
    StationaryPointForm,
    classify,
    find_root_bisection,
    negate_ctx,
    negate_phase,
    t0_jet,
    t0_monomial,
)


def fresnel_ctx(a=400.0, center=1.5):
    phase = ex.parse(f"A*(x1 - {center})^2")
    y = a * 0.25 if center == 1.5 else a * 4.0
    return SPContext(
        phase=phase,
        var=0,
        n_vars=1,
        interval=(1.0, 2.0),
        y_scale=max(y, 1.0),
        x_scale=1.0,
        r_scale=1.0,
        params={"A": a},
    )


def test_classify_quadratic_interior_point():
    res = classify(fresnel_ctx())
    assert isinstance(res, Stationary)
    assert res.t0 == pytest.approx(1.5, abs=1e-12)


def test_classify_linear_is_nonstationary():
    ctx = SPContext(
        phase=ex.parse("R*x1"),
        var=0,
        n_vars=1,
        interval=(1.0, 2.0),
        y_scale=2000.0,
        x_scale=1.0,
        r_scale=1.0,
        params={"R": 1000.0},
    )
    res = classify(ctx)
    assert isinstance(res, NonStationary)
    assert res.min_abs_deriv == pytest.approx(1000.0)


def test_classify_convex_without_crossing_is_nonstationary():
    # vertex at 3, outside (1, 2): phase' < 0 on the whole window
    ctx = SPContext(
        phase=ex.parse("100*(x1 - 3)^2"),
        var=0,
        n_vars=1,
        interval=(1.0, 2.0),
        y_scale=400.0,
        x_scale=1.0,
    )
    res = classify(ctx)
    assert isinstance(res, NonStationary)
    # |phase'| = 200*|x1 - 3| is smallest at the right endpoint
    assert res.min_abs_deriv == pytest.approx(200.0)


def test_classify_concave_names_negation():
    ctx = SPContext(
        phase=ex.parse("0 - 300*(x1 - 1.5)^2"),
        var=0,
        n_vars=1,
        interval=(1.0, 2.0),
        y_scale=75.0,
        x_scale=1.0,
    )
    res = classify(ctx)
    assert isinstance(res, Indeterminate)
    assert res.reason == CONCAVE_REASON
    flipped = classify(negate_ctx(ctx))
    assert isinstance(flipped, Stationary)
    assert flipped.t0 == pytest.approx(1.5, abs=1e-12)


def test_classify_inflection_rejected():
    ctx = SPContext(
        phase=ex.parse("50*(x1 - 1.5)^3"),
        var=0,
        n_vars=1,
        interval=(1.0, 2.0),
        y_scale=50.0,
        x_scale=1.0,
    )
    res = classify(ctx)
    assert isinstance(res, Indeterminate)
    assert "second derivative" in res.reason


def test_classify_edge_point_rejected():
    res = classify(fresnel_ctx(center=1.0 + 1e-8))
    assert isinstance(res, Indeterminate)
    assert "edge" in res.reason


def test_classify_agrees_with_pure_bisection():
    # skewed quartic keeps phase'' > 0 but moves t0 off any grid node
    ctx = SPContext(
        phase=ex.parse("200*(x1 - 1.37)^2 + 30*(x1 - 1.37)^4"),
        var=0,
        n_vars=1,
        interval=(1.0, 2.0),
        y_scale=200.0,
        x_scale=1.0,
    )
    res = classify(ctx)
    assert isinstance(res, Stationary)
    t_bis = find_root_bisection(ctx)
    assert res.t0 == pytest.approx(t_bis, abs=1e-10)
    assert res.t0 == pytest.approx(1.37, abs=1e-10)


def test_classify_numeric_phase_duck_type():
    class GridPhase:
        grid_hint = 257

        def __init__(self, a):
            self.a = a

        def value(self, point, params):
            return self.a * (point[0] - 1.5) ** 2

        def derivs_on_grid(self, fixed, var, values, params):
            v = np.asarray(values, dtype=np.float64)
            return 2.0 * self.a * (v - 1.5), np.full(v.shape, 2.0 * self.a)

        def mjet(self, active, point, params, order):
            return jets.mjet_of(
                ex.parse("400*(x1 - 1.5)^2"), active, point, params, order
            )

    ctx = SPContext(
        phase=GridPhase(400.0),
        var=0,
        n_vars=1,
        interval=(1.0, 2.0),
        y_scale=100.0,
        x_scale=1.0,
    )
    res = classify(ctx)
    assert isinstance(res, Stationary)
    assert res.t0 == pytest.approx(1.5, abs=1e-9)
    jet = t0_jet(ctx, (), max_total_order=3)
    assert jet.value() == pytest.approx(1.5, abs=1e-9)


def test_negate_phase_unwraps():
    p = ex.parse("x1^2")
    n = negate_phase(p)
    assert isinstance(n, ex.Neg)

    class Stub:
        def value(self, point, params):
            return 7.0

    s = Stub()
    wrapped = negate_phase(s)
    assert wrapped.value((0.0,), {}) == -7.0
    assert negate_phase(wrapped) is s


def test_t0_jet_linear_pull():
    # phase' = x1 - x2, so t0(x2) = x2: jet is x2 itself
    ctx = SPContext(
        phase=ex.parse("x1^2 / 2 - x2 * x1"),
        var=0,
        n_vars=2,
        interval=(1.0, 2.0),
        y_scale=8.0,
        x_scale=1.0,
        spectator_scales=(1.0,),
    )
    T = t0_jet(ctx, (1.5,), max_total_order=4)
    assert T.value() == pytest.approx(1.5, abs=1e-12)
    coeffs = np.asarray(T.coeffs)
    assert coeffs[1] == pytest.approx(1.0, abs=1e-12)
    assert np.max(np.abs(coeffs[2:])) < 1e-10


def test_t0_jet_matches_monomial_form():
    # phase' = x1 - sqrt(x2/x3), so t0 = x2^(1/2) * x3^(-1/2)
    ctx = SPContext(
        phase=ex.parse("x1^2 / 2 - sqrt(x2) * x1 / sqrt(x3)"),
        var=0,
        n_vars=3,
        interval=(1.0, 2.0),
        y_scale=8.0,
        x_scale=1.0,
        spectator_scales=(1.0, 1.0),
    )
    point = (2.25, 1.0)
    T = t0_jet(ctx, point, max_total_order=4)
    form = t0_monomial(1.0, (0.5, -0.5))
    M = form.mjet(point, order=4)
    assert T.value() == pytest.approx(1.5, abs=1e-12)
    assert np.allclose(np.asarray(T.coeffs), np.asarray(M.coeffs), atol=1e-9)


def test_t0_jet_refuses_monotone_phase():
    ctx = SPContext(
        phase=ex.parse("R*x1"),
        var=0,
        n_vars=1,
        interval=(1.0, 2.0),
        y_scale=100.0,
        x_scale=1.0,
        params={"R": 50.0},
    )
    with pytest.raises(DomainViolation):
        t0_jet(ctx)


def test_t0_jet_singular_curvature_guard():
    # honest phase, dishonest y_scale: the declared scale makes phase''
    # fall below the relative stability threshold
    ctx = SPContext(
        phase=ex.parse("(x1 - 1.5)^2"),
        var=0,
        n_vars=1,
        interval=(1.0, 2.0),
        y_scale=1e12,
        x_scale=1.0,
    )
    with pytest.raises(SingularImplicit):
        t0_jet(ctx)


def test_bisection_needs_sign_change():
    ctx = SPContext(
        phase=ex.parse("5*x1"),
        var=0,
        n_vars=1,
        interval=(1.0, 2.0),
        y_scale=10.0,
        x_scale=1.0,
    )
    with pytest.raises(DomainViolation):
        find_root_bisection(ctx)


def test_monomial_form_value_and_expression():
    form = t0_monomial(2.0, (0.5, -1.0))
    s = (4.0, 2.0)
    want = 2.0 * math.sqrt(4.0) / 2.0
    assert form.value(s) == pytest.approx(want)
    got = ex.evaluate(form.expression(), s, {})
    assert got == pytest.approx(want)


def test_monomial_form_mjet_is_binomial_series():
    # sqrt(a + u) = sqrt(a) * (1 + u/(2a) - u^2/(8a^2) + u^3/(16a^3) - ...)
    a = 2.25
    form = t0_monomial(1.0, (0.5,))
    M = form.mjet((a,), order=3)
    c = np.real(np.asarray(M.coeffs))
    r = math.sqrt(a)
    assert c[0] == pytest.approx(r, rel=1e-13)
    assert c[1] == pytest.approx(r / (2 * a), rel=1e-12)
    assert c[2] == pytest.approx(-r / (8 * a**2), rel=1e-11)
    assert c[3] == pytest.approx(r / (16 * a**3), rel=1e-10)


def test_monomial_form_rejects_bad_inputs():
    with pytest.raises(DomainViolation):
        t0_monomial(-1.0, (0.5,))
    with pytest.raises(DomainViolation):
        t0_monomial(0.0, ())
    form = t0_monomial(1.0, (0.5,))
    with pytest.raises(ValueError):
        form.value((1.0, 2.0))
    with pytest.raises(DomainViolation):
        form.mjet((-1.0,), order=2)


def test_context_validation():
    good = dict(
        phase=ex.parse("x1^2"),
        var=0,
        n_vars=1,
        interval=(1.0, 2.0),
        y_scale=4.0,
        x_scale=1.0,
    )
    SPContext(**good)
    with pytest.raises(DomainViolation):
        SPContext(**{**good, "interval": (0.0, 2.0)})
    with pytest.raises(DomainViolation):
        SPContext(**{**good, "interval": (2.0, 1.0)})
    with pytest.raises(DomainViolation):
        SPContext(**{**good, "var": 1})
    with pytest.raises(DomainViolation):
        SPContext(**{**good, "spectator_scales": (1.0,)})
    with pytest.raises(DomainViolation):
        SPContext(**{**good, "r_scale": 0.5})
    with pytest.raises(DomainViolation):
        # y/x^2 = 4 but r claims 10
        SPContext(**{**good, "r_scale": 10.0})
