import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rde import rng as rngmod
from rde.forcing import ForcingLaw, LinearCap, LogExp, Zero
from rde.mc_engine import (MAX_DEPTH, InitialDistribution, SamplePopulation, empirical_cdf,
                           exact_distance_sample, exact_distance_samples, exact_resistance_sample,
                           exact_resistance_samples, exact_sample, exact_samples, init_population,
                           run_population, step_population)

P0 = InitialDistribution.point_mass(0.0)


def test_init_point_mass():
    pop = init_population(P0, 4, seed=1)
    np.testing.assert_array_equal(pop.samples, np.zeros(4))
    assert pop.generation == 0


def test_init_two_point_concentration():
    n = 10**6
    pop = init_population(InitialDistribution.two_point(0, 0.5, 1), n, seed=2)
    assert abs(np.mean(pop.samples == 1.0) - 0.5) < 3 * 0.5e-3


def test_init_atom_count():
    n = 10**5
    pop = init_population(InitialDistribution.atom_at_neg_inf(0.5, 0.0), n, seed=3)
    neg, pos = pop.counts_at_infinity()
    assert abs(neg / n - 0.5) < 5 / math.sqrt(n)
    assert pos == 0


def test_init_size_error():
    with pytest.raises(ValueError):
        init_population(P0, 1, seed=0)


def test_init_parse_forms():
    assert InitialDistribution.parse("point:2") == InitialDistribution.point_mass(2)
    assert InitialDistribution.parse("atom:0.5,0") == InitialDistribution.atom_at_neg_inf(0.5, 0)
    d = InitialDistribution.parse("discrete:0=0.25,1=0.75")
    assert d.support() == [(0.0, 0.25), (1.0, 0.75)]
    u = InitialDistribution.parse('{"kind": "uniform", "a": 0, "b": 2}')
    assert u == InitialDistribution.uniform(0, 2)
    assert InitialDistribution.parse(u.to_json()) == u
    with pytest.raises(ValueError):
        InitialDistribution.parse("uniform:1,0")


def test_step_p1_logexp():
    law = ForcingLaw.single(1.0, LogExp, Zero)
    pop = step_population(init_population(P0, 1000, seed=4), law)
    np.testing.assert_allclose(pop.samples, math.log(2.0), atol=0)
    assert pop.generation == 1


def test_step_cooperative_from_zero():
    law = ForcingLaw.single(0.5, LinearCap, LinearCap)
    n = 10**5
    pop = step_population(init_population(P0, n, seed=5), law)
    assert set(np.unique(pop.samples)) == {-1.0, 1.0}
    assert abs(np.mean(pop.samples == 1.0) - 0.5) < 5 / math.sqrt(n)


def test_step_zero_law_preserves_law():
    law = ForcingLaw.single(0.5, Zero, Zero)
    n = 10**5
    pop = init_population(InitialDistribution.uniform(0, 1), n, seed=6)
    out = step_population(pop, law)
    grid = np.linspace(0, 1, 101)
    d = np.max(np.abs(empirical_cdf(out, grid).values - grid))
    assert d < 3 / math.sqrt(n)


def test_thread_count_independence(resistance):
    n = 3 * rngmod.BLOCK + 17
    init = InitialDistribution.uniform(-1, 1)
    a = run_population(init, resistance, n, 3, seed=9, threads=1)
    b = run_population(init, resistance, n, 3, seed=9, threads=4)
    np.testing.assert_array_equal(a.samples, b.samples)


def test_seed_changes_output(resistance):
    a = run_population(P0, resistance, 1000, 2, seed=1)
    b = run_population(P0, resistance, 1000, 2, seed=2)
    assert not np.array_equal(a.samples, b.samples)


def test_monotone_coupling(resistance):
    # same seeds drive the same (i, j, Theta) choices, so pointwise order is kept
    n = 5000
    lo = SamplePopulation(np.random.default_rng(0).normal(size=n), 0, "", 11)
    hi = SamplePopulation(lo.samples + np.abs(np.random.default_rng(1).normal(size=n)), 0, "", 11)
    for _ in range(5):
        lo, hi = step_population(lo, resistance), step_population(hi, resistance)
        assert np.all(hi.samples >= lo.samples)


def test_infinity_masses_near_conserved(resistance):
    n = 10**5
    pop = init_population(InitialDistribution.atom_at_neg_inf(0.7, 0.0), n, seed=12)
    neg0, _ = pop.counts_at_infinity()
    neg1, _ = step_population(pop, resistance).counts_at_infinity()
    assert abs(neg1 - neg0) / n <= 5 / math.sqrt(n)


def test_exact_sample_examples():
    law = ForcingLaw.single(1.0, LogExp, Zero)
    assert exact_sample(law, P0, 0, seed=1) == 0.0
    assert exact_sample(law, P0, 1, seed=1) == pytest.approx(math.log(2.0))
    assert exact_resistance_sample(0.5, 0, 3) == 0.0
    assert exact_distance_sample(0.5, 0, 3) == 1
    assert exact_resistance_sample(1.0, 1, 3) == pytest.approx(math.log(2.0))
    assert exact_distance_sample(1.0, 1, 3) == 2
    with pytest.raises(ValueError):
        exact_sample(law, P0, MAX_DEPTH + 1, seed=1)


def test_exact_p1_depth():
    assert exact_resistance_samples(1.0, 5, 3, 0) == pytest.approx([5 * math.log(2)] * 3)
    assert list(exact_distance_samples(1.0, 5, 3, 0)) == [32] * 3
    assert list(exact_distance_samples(0.0, 5, 3, 0)) == [1] * 3


def _ks_two(a, b):
    a, b = np.sort(a), np.sort(b)
    x = np.concatenate([a, b])
    return np.max(np.abs(np.searchsorted(a, x, "right") / a.size - np.searchsorted(b, x, "right") / b.size))


def test_exact_resistance_matches_tree_sampler(resistance):
    # full-size version (10^5 draws, KS <= 0.01) runs in the acceptance suite
    a = exact_resistance_samples(0.5, 10, 20000, 1)
    b = exact_samples(resistance, P0, 10, 20000, 2)
    assert _ks_two(a, b) <= 0.02


def test_exact_distance_matches_tree_sampler(distance):
    a = exact_distance_samples(0.5, 10, 20000, 4)
    b = np.exp(exact_samples(distance, P0, 10, 20000, 5))
    assert _ks_two(a.astype(float), np.round(b)) <= 0.03


def test_empirical_cdf_examples():
    F = empirical_cdf(np.array([0, 0, 1, 1.0]), [-1, 0, 1])
    np.testing.assert_array_equal(F.values, [0, 0.5, 1])
    G = empirical_cdf(np.array([-math.inf, -math.inf, -1, 0]), [0])
    assert G(0) == 1.0 and G.mass_neg_inf == 0.5
    with pytest.raises(ValueError):
        empirical_cdf(np.zeros(3), [])


def test_empirical_cdf_dkw():
    n = 10**5
    pop = init_population(InitialDistribution.uniform(0, 1), n, seed=13)
    F = empirical_cdf(pop)
    assert np.max(np.abs(F.values - F.grid)) <= 3 / math.sqrt(n)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=2, max_size=50))
def test_empirical_cdf_exact_counts(xs):
    F = empirical_cdf(np.array(xs))
    for x in F.grid:
        assert F(x) == pytest.approx(np.mean(np.array(xs) <= x))
