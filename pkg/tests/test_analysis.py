import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import two_exp_forcing
from rde.analysis import (consistency_check, convergence_study, fit_rate, front_speed,
                          ks_distance, property_suite, rescale_cdf)
from rde.cdf import LINEAR, STEP, ExtendedCDF
from rde.coefficients import effective_coefficients
from rde.forcing import ForcingLaw, LogExp, Zero
from rde.mc_engine import InitialDistribution
from rde.pde_ref import BETA22, CONDITIONAL, LimitLaw, beta21_cdf, limit_law


def _step(xs, ps, lo=0.0, hi=0.0):
    return ExtendedCDF(np.asarray(xs, float), np.asarray(ps, float), lo, hi, STEP)


# ---------------------------------------------------------------------------
# rescaling

def test_rescale_beta22_point_mass(resistance):
    co = effective_coefficients(resistance)
    L = limit_law(co)
    G = rescale_cdf(_step([0.0], [1.0]), 1000, co, L)
    assert G.grid.tolist() == [0.5]
    assert G(0.5) == 1.0 and G(0.4999) == 0.0


def test_rescale_negative_slope_reverses():
    law = ForcingLaw.single(0.5, Zero, LogExp)      # sigma > 0
    co = effective_coefficients(law)
    assert co.sigma > 0
    L = limit_law(co)
    m, _ = L.scale_coeffs(100)
    assert m < 0
    F = _step([-2.0, 1.0], [0.25, 1.0])
    G = rescale_cdf(F, 100, co, L)
    # Y = m X: X = 1 -> m (prob 3/4), X = -2 -> -2m (prob 1/4)
    assert G(m - 1e-12) == 0.0
    assert G(m) == pytest.approx(0.75)
    assert G(-2 * m) == 1.0


def test_rescale_conditional_drops_atom(distance):
    co = effective_coefficients(distance)
    L = limit_law(co, conditional_q=0.5)
    F = _step([0.0, 1.0], [0.75, 1.0], lo=0.5)
    G = rescale_cdf(F, 1, co, L)
    assert G.mass_neg_inf == 0.0
    assert G(G.grid[0]) == pytest.approx(0.5)


# ---------------------------------------------------------------------------
# KS distance

def test_ks_linear_against_limit_example():
    # linear F on [-1/2, 1/2] against the unit ramp on [0, 1]
    F = ExtendedCDF(np.array([-0.5, 0.5]), np.array([0.0, 1.0]), 0.0, 0.0, LINEAR)
    assert ks_distance(F, lambda x: np.clip(x, 0.0, 1.0)) == pytest.approx(0.5, abs=1e-12)


def test_ks_between_limit_laws():
    g = np.linspace(0, 1, 3001)
    F = ExtendedCDF(g, beta21_cdf(g), 0.0, 0.0, LINEAR)
    assert ks_distance(F, LimitLaw(BETA22, 0.0, 1.0)) == pytest.approx(8 / 27, abs=1e-6)


def test_ks_sees_atom_jump():
    F = _step([0.0], [1.0])
    G = ExtendedCDF(np.array([-1.0, 1.0]), np.array([0.0, 1.0]), 0.0, 0.0, LINEAR)
    assert ks_distance(F, G) == pytest.approx(0.5)
    assert ks_distance(F, F) == 0.0


def test_ks_masses_at_infinity():
    F = _step([0.0], [0.7], lo=0.2, hi=0.3)
    G = _step([0.0], [1.0])
    assert ks_distance(F, G) == pytest.approx(0.3)


step_cdf = st.builds(
    lambda xs, ps: _step(sorted(set(xs)), np.sort(ps)[:len(set(xs))]),
    st.lists(st.integers(-5, 5), min_size=1, max_size=6),
    st.lists(st.floats(0, 1), min_size=6, max_size=6))


@settings(max_examples=200, deadline=None)
@given(step_cdf, step_cdf, step_cdf)
def test_ks_metric_axioms(F, G, H):
    fg, gh, fh = ks_distance(F, G), ks_distance(G, H), ks_distance(F, H)
    assert fg == pytest.approx(ks_distance(G, F), abs=1e-15)
    assert fh <= fg + gh + 1e-12
    assert 0.0 <= fg <= 1.0


def test_fit_rate():
    assert fit_rate([10, 100, 1000], [1.0, 0.1, 0.01]) == pytest.approx(-1.0)
    assert math.isnan(fit_rate([10], [0.5]))


# ---------------------------------------------------------------------------
# convergence studies

def test_convergence_degenerate(zero_law):
    rep = convergence_study("mc", zero_law, "point:0", [1, 5], pool=1000)
    assert "degenerate" in rep.note
    assert rep.ks() == [0.0, 0.0]
    # max/min with fair Theta keeps the law, so only pool noise remains
    rep = convergence_study("mc", zero_law, InitialDistribution.two_point(0, 0.5, 1),
                            [1, 5], pool=40000, stratified=True)
    assert max(rep.ks()) < 5 / math.sqrt(40000)


def test_convergence_requires_half(resistance):
    with pytest.raises(ValueError, match="p = 1/2"):
        convergence_study("mc", resistance.with_p(0.6), "point:0", [1])


def test_lattice_convergence_decreasing(cooperative):
    rep = convergence_study("lattice", cooperative, "point:0", [50, 100, 200, 400])
    ks = rep.ks()
    assert all(b < a for a, b in zip(ks, ks[1:]))
    assert rep.limit["kind"] == BETA22
    assert rep.fitted_rate < 0


def test_mc_thread_determinism(resistance):
    a = convergence_study("mc", resistance, "point:0", [5, 10], pool=20000, seed=4, threads=1)
    b = convergence_study("mc", resistance, "point:0", [5, 10], pool=20000, seed=4, threads=3)
    assert a.to_json() == b.to_json()


def test_lognat_conditional_is_automatic(distance):
    init = InitialDistribution.atom_at_neg_inf(0.5, 0.0)
    rep = convergence_study("lognat", distance, init, [50, 200], delta=0.1, keep_profiles=True)
    assert rep.limit["kind"] == CONDITIONAL and rep.limit["q"] == 0.5
    assert all(G.mass_neg_inf == 0.0 for G in rep.profiles.values())
    ks = rep.ks()
    assert ks[1] < ks[0]


def test_lognat_needs_distance_law(resistance):
    with pytest.raises(ValueError):
        convergence_study("lognat", resistance, "point:0", [2])


# ---------------------------------------------------------------------------
# consistency

def test_consistency_resistance(resistance):
    tab = consistency_check(resistance, deltas=(0.2, 0.1, 0.05))
    r = tab.remainders
    assert r[0] > r[1] > r[2]
    for fit in tab.fits:
        assert abs(fit["sigma_hat"]) < 0.01
        assert fit["c3"] == pytest.approx(fit["c3_expected"], rel=0.1)


def test_consistency_distance_sigma(distance):
    tab = consistency_check(distance, deltas=(0.2, 0.1, 0.05), points=[0.0])
    sigma = effective_coefficients(distance).sigma
    for fit in tab.fits:
        assert fit["sigma_hat"] == pytest.approx(sigma, rel=0.05)


# ---------------------------------------------------------------------------
# property suites and front speed

def test_property_suite_cooperative(cooperative):
    rep = property_suite(cooperative, trials=15, seed=1, smooth_grid=np.linspace(-20, 20, 401))
    assert rep.ok, rep.failures
    assert rep.counts["smooth_monotone"] == 15


def test_property_suite_flags_non_monotone_forcing():
    f = two_exp_forcing()
    law = ForcingLaw.single(0.5, f, f, "two_exp")
    rep = property_suite(law, trials=20, seed=0)
    bad = rep.failed("enumeration_monotone")
    assert bad
    check, trial, witness = bad[0]
    assert witness["excess"] > 1e-9
    assert rep.counts["smooth_monotone"] == 0


def test_front_speed_p_one():
    fs = front_speed(1.0, pool=500, N=20)
    assert fs.slope_estimate == pytest.approx(math.log(2), abs=1e-12)
    assert fs.passed


def test_front_speed_rejects_half():
    with pytest.raises(ValueError):
        front_speed(0.5)


def test_rescale_merges_float_ties(resistance):
    co = effective_coefficients(resistance)
    x = np.nextafter(1.0, 2.0)
    F = _step([1.0, x], [0.4, 1.0])
    G = rescale_cdf(F, 10**6, co, limit_law(co))
    assert G.grid.size == 1 and G.values[0] == 1.0
