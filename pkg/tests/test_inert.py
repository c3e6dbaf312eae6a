import math

import pytest

from phasekit import expr as ex
from phasekit.errors import NameCollision, SupportViolation
from phasekit.inert import (
    FamilySpec,
    check_inert,
    fourier_decay_check,
    product_family,
    sample_params,
    specialize_family,
    weight_value,
)

# the certifier's per-index limits are ceiling * (atom constant), floored at
# the ceiling itself; atom constants frozen to 4 digits from dense sampling
LIMIT_RATIOS = {1: 3.005, 2: 117.6, 3: 1.137e4}


def bump_window_family(width_range=(0.05, 0.2)):
    # translates and widths inside the dyadic window [1, 2]
    return FamilySpec(
        dimension=1,
        weight=ex.parse("bump((x1 - c)/h)"),
        x_scales=(1.0,),
        scale=ex.parse("1/h"),
        param_ranges={"c": (1.2, 1.8), "h": width_range},
    )


def test_bump_window_family_is_inert():
    rep = check_inert(bump_window_family(), max_order=3, n_param_samples=6,
                      n_point_samples=33, seed=0)
    assert rep.verdict
    assert all(r.passed for r in rep.rows)
    js = {r.j for r in rep.rows}
    assert js == {(0,), (1,), (2,), (3,)}


def test_limits_scale_like_the_atom():
    rep = check_inert(bump_window_family(), max_order=3, n_param_samples=2,
                      n_point_samples=9, seed=0)
    base = rep.row((0,)).limit
    for k, ratio in LIMIT_RATIOS.items():
        assert rep.row((k,)).limit / base == pytest.approx(ratio, rel=1e-3), k


def test_false_scale_claim_fails_at_second_order():
    # claiming scale 1 for narrow widths: first-order observed constants
    # still sit under the (large) first-order limit, the quadratic ones do not
    fam = FamilySpec(
        dimension=1,
        weight=ex.parse("bump((x1 - 1.5)/h)"),
        x_scales=(1.0,),
        scale=1.0,
        param_ranges={"h": (0.02, 0.05)},
    )
    rep = check_inert(fam, max_order=2, n_param_samples=6, n_point_samples=33)
    assert not rep.verdict
    assert not rep.row((2,)).passed
    assert rep.row((0,)).passed


def test_report_formats_have_headers():
    rep = check_inert(bump_window_family(), max_order=1, n_param_samples=2,
                      n_point_samples=9)
    csv = rep.to_csv()
    assert csv.splitlines()[0].startswith("j,")
    assert len(csv.splitlines()) == 3
    text = rep.to_text()
    assert "C_hat" in text
    assert "overall:" in text


def test_sample_params_deterministic():
    fam = bump_window_family()
    a = sample_params(fam, 5, seed=3)
    b = sample_params(fam, 5, seed=3)
    c = sample_params(fam, 5, seed=4)
    assert a == b
    assert a != c
    for p in a:
        assert 1.2 <= p["c"] <= 1.8
        assert 0.05 <= p["h"] <= 0.2


def test_support_violation_detected():
    fam = FamilySpec(
        dimension=1,
        weight=ex.parse("bump((x1 - 3)/2)"),  # support [1, 5] leaks out of [1, 2]
        x_scales=(1.0,),
        scale=2.0,
    )
    with pytest.raises(SupportViolation):
        check_inert(fam, max_order=1, n_param_samples=1, n_point_samples=5)


def test_product_family_multiplies_weights():
    f = bump_window_family()
    g = FamilySpec(
        dimension=1,
        weight=ex.parse("bump((x1 - d)/k)"),
        x_scales=(1.0,),
        scale=ex.parse("1/k"),
        param_ranges={"d": (1.4, 1.6), "k": (0.3, 0.5)},
    )
    prod = product_family(f, g)
    params = {"c": 1.5, "h": 0.1, "d": 1.5, "k": 0.4}
    got = weight_value(prod, (1.52,), params)
    want = (weight_value(f, (1.52,), params) * weight_value(g, (1.52,), params))
    assert got == pytest.approx(want, rel=1e-13)
    rep = check_inert(prod, max_order=2, n_param_samples=4, n_point_samples=17)
    assert rep.verdict


def test_product_family_name_collision():
    with pytest.raises(NameCollision):
        product_family(bump_window_family(), bump_window_family())


def test_specialize_family_pins_first_axis():
    fam = FamilySpec(
        dimension=2,
        weight=ex.parse("bump((x1 - 1.5)/h)*bump((x2 - 1.5)/h)"),
        x_scales=(1.0, 1.0),
        scale=ex.parse("1/h"),
        param_ranges={"h": (0.2, 0.4)},
    )
    # x1 pinned to the scaled remaining coordinate itself
    pinned = specialize_family(fam, ex.parse("x1"))
    assert pinned.dimension == 1
    params = {"h": 0.3}
    got = weight_value(pinned, (1.6,), params)
    want = weight_value(fam, (1.6, 1.6), params)
    assert got == pytest.approx(want, rel=1e-13)
    rep = check_inert(pinned, max_order=2, n_param_samples=3, n_point_samples=17)
    assert rep.verdict


def test_fourier_decay_of_the_atom():
    # weight supported on exactly [1, 2]; vanishes to all orders at the ends
    fam = FamilySpec(
        dimension=1,
        weight=ex.parse("bump(2*x1 - 3)"),
        x_scales=(1.0,),
        scale=2.0,
    )
    grid = [0.0, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0]
    rep = fourier_decay_check(fam, 0, grid, a=5.0, params={})
    assert rep.verdict, rep.fitted_exponent
    assert rep.fitted_exponent >= 5.0
    # |g| oscillates locally but collapses by orders of magnitude overall
    mags = [abs(r.value) for r in rep.rows]
    assert mags[-1] < 1e-9 * mags[0]
    for k, d_hat, limit, ok in rep.deriv_rows:
        assert ok, (k, d_hat, limit)


def test_fourier_decay_flags_truncated_support():
    # this weight leaks outside [1, 2]; the box cut makes |g| fall like t^-2,
    # far short of the a = 5 target
    fam = FamilySpec(
        dimension=1,
        weight=ex.parse("bump(x1 - 1.5)"),
        x_scales=(1.0,),
        scale=1.0,
    )
    grid = [0.0, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0]
    rep = fourier_decay_check(fam, 0, grid, a=5.0, params={})
    assert not rep.verdict
    assert rep.fitted_exponent < 3.5
    tail = [abs(r.value) for r in rep.rows[-3:]]
    assert tail[0] / tail[1] == pytest.approx(4.0, rel=0.05)
    assert tail[1] / tail[2] == pytest.approx(4.0, rel=0.05)
