import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import two_exp_forcing
from rde.forcing import (LOG2, Component, DomainError, ForcingFunction, ForcingLaw, LinearCap,
                         LogExp, Zero, apply_phi, apply_phi_array, decay_integral, eval_f,
                         right_inverse, validate_class_S)

inf = math.inf


def test_eval_examples():
    assert eval_f(LogExp, 0.0) == pytest.approx(math.log(2.0), abs=1e-15)
    assert eval_f(LinearCap, 2.0) == 0.0
    assert eval_f(LinearCap, 0.5) == 0.5
    assert eval_f(Zero, 3.0) == 0.0


def test_eval_at_infinity_and_domain():
    assert eval_f(LogExp, inf) == 0.0
    assert eval_f(ForcingFunction.tabulated([(0, 1), (1, 0.25)]), inf) == 0.25
    with pytest.raises(DomainError):
        eval_f(LogExp, -0.1)


def test_right_inverse_examples():
    assert right_inverse(LogExp, LOG2) == pytest.approx(0.0, abs=1e-15)
    assert right_inverse(LogExp, 1.0) == pytest.approx(math.log(math.e - 1.0), abs=1e-14)
    assert right_inverse(LinearCap, 2.0) == 2.0
    assert right_inverse(LinearCap, 0.5) == 0.0


def test_right_inverse_linearcap_flat_piece_takes_sup():
    # u + (1 - u)_+ = 1 on [0, 1]; sup of {u : u + f(u) <= 1} is 1
    assert right_inverse(LinearCap, 1.0) == 1.0


def test_validate_builtins():
    for f in (LogExp, LinearCap, Zero):
        assert validate_class_S(f).ok


def test_validate_two_exp_flags_map_condition():
    rep = validate_class_S(two_exp_forcing())
    assert not rep.ok
    (v,) = [v for v in rep.violations if v.condition == "u + f(u) nondecreasing"]
    assert v.u < 0.1


def test_validate_increasing_tabulated():
    rep = validate_class_S(ForcingFunction.tabulated([(0, 0.0), (1, 0.5)]))
    assert any(v.condition == "nonincreasing" for v in rep.violations)


def test_decay_examples():
    lc = ForcingLaw.single(0.5, LinearCap, LinearCap)
    assert decay_integral(lc).value == pytest.approx(5.0 / 3.0, abs=1e-9)
    assert decay_integral(ForcingLaw.single(0.5, Zero, Zero)).value == 0.0
    res = decay_integral(ForcingLaw.single(0.5, LogExp, LogExp))
    assert res.converged and math.isfinite(res.value)


def test_decay_with_positive_limit_is_inf():
    f = ForcingFunction.tabulated([(0, 1.0), (1, 0.5)])
    res = decay_integral(ForcingLaw.single(0.5, f, f))
    assert math.isinf(res.value) and "f(inf)" in res.diagnostic


def test_decay_rejects_invalid():
    f = two_exp_forcing()
    with pytest.raises(DomainError):
        decay_integral(ForcingLaw.single(0.5, f, f))


def test_apply_phi_examples():
    assert apply_phi(0, 0, 1, (LogExp, LogExp)) == pytest.approx(math.log(2.0))
    assert apply_phi(2.5, -inf, 1, (LogExp, Zero)) == 2.5
    assert apply_phi(1, 3, 0, (LinearCap, LinearCap)) == 1.0


def test_apply_phi_equal_infinities():
    assert apply_phi(inf, inf, 0, (LogExp, LogExp)) == inf
    assert apply_phi(-inf, -inf, 1, (LogExp, LogExp)) == -inf
    assert apply_phi(-inf, inf, 0, (LogExp, LogExp)) == -inf


def test_apply_phi_array_matches_scalar():
    rng = np.random.default_rng(1)
    x = rng.normal(size=200)
    y = np.where(rng.random(200) < 0.1, -inf, rng.normal(size=200))
    th = rng.random(200) < 0.5
    law = ForcingLaw.single(0.5, LogExp, LinearCap)
    got = apply_phi_array(x, y, th, law)
    want = [apply_phi(a, b, t, (LogExp, LinearCap)) for a, b, t in zip(x, y, th)]
    np.testing.assert_array_equal(got, want)


def test_law_validation():
    with pytest.raises(ValueError):
        ForcingLaw(0.5, (Component(0.6, LogExp, LogExp), Component(0.5, Zero, Zero)))
    with pytest.raises(ValueError):
        ForcingLaw(1.5, (Component(1.0, LogExp, LogExp),))
    with pytest.raises(ValueError):
        ForcingLaw(0.5, (Component(1.0, LogExp, LogExp), Component(0.0, Zero, Zero)))


def test_law_json_roundtrip():
    tab = ForcingFunction.tabulated([(0, 0.5), (0.5, 0.0)])
    law = ForcingLaw(0.3, (Component(0.25, LogExp, tab), Component(0.75, Zero, LinearCap)), "mix")
    back = ForcingLaw.from_json(json.dumps(law.to_json()))
    assert back == law
    assert back.law_id == law.law_id


def test_tabulated_right_inverse_matches_definition():
    tab = ForcingFunction.tabulated([(0, 1.0), (0.5, 0.6), (2.0, 0.0)])
    u = np.linspace(0, 5, 200001)
    h = u + np.asarray(tab(u))
    for s in (1.0, 1.2, 1.7, 2.0, 3.5):
        want = u[h <= s].max()
        assert tab.right_inverse(s) == pytest.approx(want, abs=5e-5)


# ---------------------------------------------------------------------------
# properties

def _valid_tabulated(values, steps):
    """Knots with slope in [-1, 0]: both class-S conditions hold."""
    u = np.concatenate([[0.0], np.cumsum(steps)])
    v = [values]
    for du, frac in zip(steps, np.linspace(0.2, 0.9, len(steps))):
        v.append(max(v[-1] - frac * du, 0.0))
    return ForcingFunction.tabulated(list(zip(u, v)))


tab_strategy = st.builds(
    _valid_tabulated,
    st.floats(0.0, 3.0),
    st.lists(st.floats(0.05, 2.0), min_size=1, max_size=6),
)
fn_strategy = st.one_of(st.sampled_from([LogExp, LinearCap, Zero]), tab_strategy)


@settings(max_examples=60, deadline=None)
@given(fn_strategy, st.floats(0, 20), st.floats(0, 20))
def test_right_inverse_monotone_and_below_identity(f, s1, s2):
    s1, s2 = sorted((s1, s2))
    g1, g2 = f.right_inverse(s1), f.right_inverse(s2)
    assert g1 <= g2 + 1e-12
    assert g2 <= s2 + 1e-12


@settings(max_examples=60, deadline=None)
@given(fn_strategy, st.floats(0, 10), st.floats(0, 10))
def test_galois_property(f, u, s):
    # u + f(u) <= s  implies  u <= g(s)
    if u + float(f(u)) <= s:
        assert u <= f.right_inverse(s) + 1e-9


@settings(max_examples=80, deadline=None)
@given(fn_strategy, fn_strategy, st.floats(-5, 5), st.floats(-5, 5), st.floats(0, 3),
       st.booleans())
def test_phi_monotone_in_first_argument(fp, fm, x, y, dx, theta):
    assert validate_class_S(fp).ok and validate_class_S(fm).ok
    lo = apply_phi(x, y, theta, (fp, fm))
    hi = apply_phi(x + dx, y, theta, (fp, fm))
    assert hi >= lo - 1e-12


def test_logexp_gap_identity():
    s = np.linspace(LOG2, 30.0, 2001)
    g = np.asarray(LogExp.right_inverse(s))
    np.testing.assert_allclose(s - g, np.asarray(LogExp(g)), atol=1e-12)
