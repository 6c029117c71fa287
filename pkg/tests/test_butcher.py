import math

import numpy as np
import pytest

from pintlab import butcher
from pintlab.butcher import (REGISTRY, ButcherTableau, OrderMismatch,
                             PoleError, classify_stability, get_scheme,
                             make_trbdf2, stability_eval,
                             stability_eval_batch, stability_eval_det,
                             tableau_from_text, tableau_to_text, verify_order)

ALL_NAMES = ["bwe", "fwe", "midpoint", "trapezoid", "sdirk22", "sdirk23",
             "sdirk33", "sdirk34", "esdirk32", "esdirk33", "gauss4",
             "trbdf2", "erk2", "erk3", "erk4"]


def test_registry_complete():
    for name in ALL_NAMES:
        tab = get_scheme(name)
        assert tab.s >= 1
        assert tab.order >= 1


def test_row_sum_consistency():
    for tab in REGISTRY:
        assert np.allclose(tab.A.sum(axis=1), tab.c, atol=1e-12)


@pytest.mark.parametrize("name,expected", [
    ("bwe", True), ("fwe", False), ("midpoint", False), ("trapezoid", True),
    ("sdirk22", True), ("sdirk23", False), ("sdirk33", True),
    ("sdirk34", False), ("esdirk32", True), ("esdirk33", True),
    ("gauss4", False), ("trbdf2", True), ("erk2", False),
])
def test_stiffly_accurate_flags(name, expected):
    assert get_scheme(name).stiffly_accurate is expected


def test_explicit_flags():
    for name in ALL_NAMES:
        tab = get_scheme(name)
        assert tab.explicit_flag == name.startswith(("fwe", "erk"))


# --- stability_eval -------------------------------------------------------

def test_bwe_at_one():
    assert stability_eval(get_scheme("bwe"), 1.0) == pytest.approx(0.5)


def test_trapezoid_at_two():
    assert abs(stability_eval(get_scheme("trapezoid"), 2.0)) < 1e-14


def test_bwe_stiff_limit():
    assert abs(stability_eval(get_scheme("bwe"), 1e12)) < 1e-11


def test_erk2_at_half():
    assert stability_eval(get_scheme("erk2"), 0.5) == pytest.approx(0.625)


def test_w_zero_is_exactly_one():
    for tab in REGISTRY:
        assert stability_eval(tab, 0.0) == 1.0


def test_explicit_schemes_are_truncated_exponentials():
    # order p == s explicit schemes evaluate to sum (-w)^l / l!
    for name in ["fwe", "erk2", "erk3", "erk4"]:
        tab = get_scheme(name)
        w = np.array([0.3 + 0.4j, -1.2 + 0.1j, 2.0 + 0j, 0.05j])
        expected = sum((-w) ** l / math.factorial(l)
                       for l in range(tab.s + 1))
        got = stability_eval_batch(tab, w)
        assert np.all(np.abs(got - expected) <= 1e-14 * np.abs(expected))


def test_determinant_form_cross_check():
    rng = np.random.default_rng(7)
    for tab in REGISTRY:
        count = 0
        while count < 100:
            w = complex(*rng.uniform(-10, 10, 2))
            try:
                direct = stability_eval(tab, w)
                det_form = stability_eval_det(tab, w)
            except PoleError:
                continue
            scale = max(1.0, abs(direct))
            assert abs(direct - det_form) <= 1e-12 * scale, (tab.name, w)
            count += 1


def test_pole_error():
    # bwe has its pole at w = -1
    with pytest.raises(PoleError):
        stability_eval(get_scheme("bwe"), -1.0)


# --- verify_order ---------------------------------------------------------

def test_verify_order_registry():
    for tab in REGISTRY:
        assert verify_order(tab) == tab.order


def test_order_mismatch_detected():
    bad = ButcherTableau("bad-bwe", [[1.0]], [1.0], [1.0], 2, "L_stable")
    with pytest.raises(OrderMismatch):
        verify_order(bad)


# --- classify_stability ---------------------------------------------------

def test_classification_matches_declared():
    for tab in REGISTRY:
        assert classify_stability(tab) == tab.stability_class


def test_trbdf2_parameter_classes():
    assert classify_stability(make_trbdf2(2.0 - math.sqrt(2.0))) == "L_stable"
    assert classify_stability(make_trbdf2(0.5)) == "A_stable"


def test_trbdf2_name_lookup():
    tab = get_scheme("trbdf2:0.5")
    assert tab.stability_class == "A_stable"
    with pytest.raises(KeyError):
        get_scheme("trbdf2:abc")
    with pytest.raises(KeyError):
        get_scheme("nope")


def test_midpoint_equals_trapezoid_pointwise():
    # one-stage midpoint and two-stage trapezoid share a stability function;
    # they stay distinct registry entries
    mid, trap = get_scheme("midpoint"), get_scheme("trapezoid")
    w = np.geomspace(1e-6, 1e6, 200) * np.exp(1j * 0.7)
    a = stability_eval_batch(mid, w)
    b = stability_eval_batch(trap, w)
    assert np.all(np.abs(a - b) <= 1e-12 * np.maximum(1.0, np.abs(a)))


def test_sdirk22_equals_esdirk32_pointwise():
    a22, e32 = get_scheme("sdirk22"), get_scheme("esdirk32")
    w = np.geomspace(1e-6, 1e6, 200).astype(complex)
    a = stability_eval_batch(a22, w)
    b = stability_eval_batch(e32, w)
    assert np.all(np.abs(a - b) <= 1e-11 * np.maximum(1.0, np.abs(a)))


# --- serialization --------------------------------------------------------

def test_text_round_trip():
    for name in ["sdirk33", "erk4", "gauss4"]:
        tab = get_scheme(name)
        text = tableau_to_text(tab)
        back = tableau_from_text(text)
        assert back.name == tab.name
        assert back.order == tab.order
        assert back.stability_class == tab.stability_class
        assert np.array_equal(back.A, tab.A)
        assert np.array_equal(back.b, tab.b)
        assert np.array_equal(back.c, tab.c)


def test_text_rejects_malformed():
    with pytest.raises(ValueError):
        tableau_from_text("name = x\nbroken line\n")
    with pytest.raises(ValueError):
        tableau_from_text("name = x\ns = 1\n")


def test_tableau_rejects_bad_row_sums():
    with pytest.raises(ValueError):
        ButcherTableau("broken", [[0.5]], [1.0], [0.9], 1, "A_stable")
