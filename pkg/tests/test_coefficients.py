import math
import time

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rde.coefficients import (ZETA2, ZETA3, DivergentIntegral, appendixC_identities, compute_a,
                              compute_sigma, dilog, effective_coefficients, select_alpha, trilog)
from rde.config import lattice_law
from rde.forcing import DomainError, ForcingFunction, ForcingLaw, LinearCap, LogExp, Zero


def test_resistance_coefficients(resistance):
    t = time.perf_counter()
    assert compute_a(resistance) == pytest.approx(2 * ZETA3, abs=1e-8)
    assert abs(compute_sigma(resistance)) < 1e-7
    assert time.perf_counter() - t < 1.0


def test_distance_sigma(distance):
    assert compute_sigma(distance) == pytest.approx(-math.pi**2 / 12, abs=1e-8)


def test_lattice_examples(cooperative, zero_law):
    assert compute_sigma(cooperative) == pytest.approx(0.0, abs=1e-12)
    assert compute_a(cooperative) == pytest.approx(1.0, abs=1e-9)
    assert compute_a(zero_law) == 0.0
    assert compute_sigma(zero_law) == 0.0


def test_select_alpha():
    assert select_alpha(-0.8225, 1e-7) == (2, False)
    assert select_alpha(3e-11, 1e-7) == (3, True)
    assert select_alpha(0.0, 0.5) == (3, True)
    with pytest.raises(ValueError):
        select_alpha(0.0, 0.0)


def test_effective_coefficients_alpha_flag(resistance, distance):
    r = effective_coefficients(resistance)
    d = effective_coefficients(distance)
    assert (r.alpha, r.sigma_is_zero) == (3, True)
    assert (d.alpha, d.sigma_is_zero) == (2, False)


def test_divergent_law_raises():
    f = ForcingFunction.tabulated([(0, 1.0), (1, 0.5)])
    with pytest.raises(DivergentIntegral):
        compute_sigma(ForcingLaw.single(0.5, f, f))


def test_polylog_special_values():
    assert dilog(1.0) == pytest.approx(math.pi**2 / 6, abs=1e-12)
    assert trilog(1.0) == pytest.approx(1.2020569031595942, abs=1e-12)
    assert dilog(0.0) == 0.0 and trilog(0.0) == 0.0
    assert ZETA2 == pytest.approx(math.pi**2 / 6, abs=1e-16)


def test_polylog_domain():
    for t in (-0.1, 1.0001, float("nan")):
        with pytest.raises(DomainError):
            dilog(t)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 1.0))
def test_polylog_against_mpmath(t):
    assert dilog(t) == pytest.approx(float(mpmath.polylog(2, t)), abs=1e-12)
    assert trilog(t) == pytest.approx(float(mpmath.polylog(3, t)), abs=1e-12)


def test_appendix_identities():
    rep = appendixC_identities()
    assert rep.abs_errors["sigma_D"] < 1e-8
    assert rep.abs_errors["a_R"] < 1e-8
    assert rep.sigma_D_closed == pytest.approx(-math.pi**2 / 12, abs=1e-14)


def test_two_quadrature_paths_agree(distance):
    assert compute_sigma(distance) == pytest.approx(appendixC_identities().sigma_D_quadrature,
                                                    abs=1e-8)


# independent oracle: mpmath quadrature of closed-form gaps, hand-inverted
# on each linear piece of the knots
def test_tabulated_coefficients_by_mpmath():
    tab = ForcingFunction.tabulated([(0, 0.8), (1.0, 0.3), (2.0, 0.0)])
    law = ForcingLaw.single(0.4, tab, LogExp)

    def gap_mp(s):
        # s - g(s), g(s) = sup{u : u + f(u) <= s} on the piecewise-linear knots
        us, vs = [0, 1.0, 2.0], [0.8, 0.3, 0.0]
        h = [u + v for u, v in zip(us, vs)]         # 0.8, 1.3, 2.0
        if s < h[0]:
            return s
        if s >= 2.0:
            return mpmath.mpf(0)
        for k in range(2):
            if h[k] <= s < h[k + 1]:
                u = us[k] + (s - h[k]) * (us[k + 1] - us[k]) / (h[k + 1] - h[k])
                return s - u
        return mpmath.mpf(0)

    def gap_log(s):
        if s < math.log(2):
            return s
        return -mpmath.log(-mpmath.expm1(-s))

    mpmath.mp.dps = 30
    i_tab = mpmath.quad(gap_mp, [0, 0.8, 1.3, 2.0])
    i_log = mpmath.quad(gap_log, [0, mpmath.log(2), mpmath.inf])
    a_tab = mpmath.quad(lambda s: (2 * s + gap_mp(s)) * gap_mp(s), [0, 0.8, 1.3, 2.0])
    a_log = mpmath.quad(lambda s: (2 * s + gap_log(s)) * gap_log(s), [0, mpmath.log(2), mpmath.inf])
    sig = -2 * 0.4 * i_tab + 2 * 0.6 * i_log
    a = 0.4 * a_tab + 0.6 * a_log
    assert compute_sigma(law) == pytest.approx(float(sig), abs=1e-9)
    assert compute_a(law) == pytest.approx(float(a), abs=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_lattice_sigma_formula(p, qp, qm):
    law = lattice_law(qp, qm, p)
    assert compute_sigma(law) == pytest.approx((1 - p) * qm - p * qp, abs=1e-9)
    # the general formula gives p q+ + (1 - p) q-; it equals 2 p q+ only when sigma = 0
    assert compute_a(law) == pytest.approx(p * qp + (1 - p) * qm, abs=1e-9)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 0.95), st.sampled_from([(LogExp, Zero), (LinearCap, LogExp),
                                               (Zero, LinearCap), (LogExp, LinearCap)]))
def test_swap_symmetry(p, pair):
    fp, fm = pair
    law = ForcingLaw.single(p, fp, fm)
    mirror = ForcingLaw.single(1 - p, fm, fp)
    assert compute_sigma(mirror) == pytest.approx(-compute_sigma(law), abs=1e-9)
    assert compute_a(mirror) == pytest.approx(compute_a(law), abs=1e-9)
    assert compute_a(law) >= 0
