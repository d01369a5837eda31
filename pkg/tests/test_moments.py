import math

import numpy as np
import pytest

from coxmal.coxeter import enumerate_group, parse_group, two_sided_descent
from coxmal.mallows import MallowsSpec, pmf
from coxmal.moments import (
    DiscreteDistribution,
    cube_moment_bound_check,
    descent_indicator_mean_check,
    empirical_distribution,
    exact_distribution,
    goodness_of_fit,
    mean_two_sided,
    two_sample_chi_square,
    variance_bounds_two_sided,
)


def bernoulli(p):
    return DiscreteDistribution(np.array([0, 1]), np.array([1 - p, p]))


def test_distribution_validation():
    with pytest.raises(ValueError):
        DiscreteDistribution(np.array([1, 1]), np.array([0.5, 0.5]))
    with pytest.raises(ValueError):
        DiscreteDistribution(np.array([2, 1]), np.array([0.5, 0.5]))
    with pytest.raises(ValueError):
        DiscreteDistribution(np.array([0, 1]), np.array([0.9, 0.2]))
    with pytest.raises(ValueError):
        DiscreteDistribution(np.array([0, 1]), np.array([1.1, -0.1]))


def test_distribution_moments():
    d = bernoulli(0.25)
    assert math.isclose(d.mean(), 0.25)
    assert math.isclose(d.variance(), 0.25 * 0.75)
    assert math.isclose(d.std(), math.sqrt(0.1875))
    assert math.isclose(d.central_abs_moment(3), 0.75**3 * 0.25 + 0.25**3 * 0.75)
    assert d.prob(0) == 0.75 and d.prob(1) == 0.25 and d.prob(7) == 0.0


def test_tv_distance():
    a = bernoulli(0.25)
    b = bernoulli(0.75)
    assert math.isclose(a.tv_distance(b), 0.5)
    assert a.tv_distance(a) == 0.0


def test_size_bias_of_bernoulli():
    """Size-biasing a Bernoulli gives the point mass at 1."""
    sb = bernoulli(0.3).size_bias()
    assert sb.support() == [1]
    assert math.isclose(sb.probs[0], 1.0)
    with pytest.raises(ValueError):
        DiscreteDistribution(np.array([0]), np.array([1.0])).size_bias()


def test_size_bias_matches_weighting():
    vals = np.array([1, 2, 5])
    probs = np.array([0.5, 0.3, 0.2])
    d = DiscreteDistribution(vals, probs)
    sb = d.size_bias()
    expect = vals * probs / d.mean()
    assert np.allclose(sb.probs, expect)


def test_convolve_binomial():
    b = bernoulli(0.4)
    two = b.convolve(b)
    assert two.support() == [0, 1, 2]
    assert np.allclose(two.probs, [0.36, 0.48, 0.16])


def test_from_samples_and_csv_round_trip(tmp_path):
    xs = np.array([3, 1, 3, 3, 2, 1])
    d = DiscreteDistribution.from_samples(xs, provenance={"origin": "test"})
    assert d.support() == [1, 2, 3]
    assert np.allclose(d.probs, [2 / 6, 1 / 6, 3 / 6])
    path = tmp_path / "d.csv"
    d.to_csv(path)
    back = DiscreteDistribution.from_csv(path)
    assert back.support() == d.support()
    assert np.array_equal(back.probs, d.probs)
    assert back.provenance["origin"] == "test"


def test_exact_distribution_agrees_with_direct_enumeration():
    """Cross-route oracle: accumulate pmf() element by element."""
    g = parse_group("B3")
    spec = MallowsSpec.make(g, 0.7)
    law = {}
    for w in enumerate_group(g):
        t = two_sided_descent(w, g)
        law[t] = law.get(t, 0.0) + pmf(w, spec)
    dist = exact_distribution(spec, "t")
    assert dist.support() == sorted(law)
    for v, p in zip(dist.values, dist.probs):
        assert math.isclose(p, law[int(v)], rel_tol=1e-12)


def test_exact_distribution_of_product_convolves():
    spec = MallowsSpec.make("B2 x I2(3)", [0.5, 2.0])
    prod = exact_distribution(spec, "t")
    a = exact_distribution(MallowsSpec.make("B2", 0.5), "t")
    b = exact_distribution(MallowsSpec.make("I2(3)", 2.0), "t")
    conv = a.convolve(b)
    assert prod.support() == conv.support()
    assert np.allclose(prod.probs, conv.probs, atol=1e-14)


@pytest.mark.parametrize("name", ["A2", "B3", "D4", "I2(7)"])
@pytest.mark.parametrize("q", [0.3, 1.0, 2.0])
def test_mean_formula(name, q):
    g = parse_group(name)
    dist = exact_distribution(MallowsSpec.make(g, q), "t")
    assert math.isclose(dist.mean(), mean_two_sided(g, q), rel_tol=1e-12)


def test_mean_formula_value():
    assert mean_two_sided(parse_group("B4"), 1.0) == 4.0
    assert math.isclose(mean_two_sided(parse_group("A3"), 0.5), 2 * 0.5 * 3 / 1.5)


def test_variance_bounds_b3_values():
    """Hand-computed bound values at q = 1: lower 0.5, upper 2.5."""
    b = variance_bounds_two_sided(parse_group("B3"), 1.0)
    assert math.isclose(b.lower, 0.5)
    assert math.isclose(b.upper, 2.5)
    var = exact_distribution(MallowsSpec.make("B3", 1.0), "t").variance()
    assert b.lower <= var <= b.upper


@pytest.mark.parametrize("name", ["A2", "A4", "B2", "B4", "D4"])
@pytest.mark.parametrize("q", [0.25, 0.6, 1.0, 2.0, 5.0])
def test_variance_bounds_contain_exact(name, q):
    g = parse_group(name)
    b = variance_bounds_two_sided(g, q)
    var = exact_distribution(MallowsSpec.make(g, q), "t").variance()
    assert max(0.0, b.lower) <= var <= b.upper
    if b.corollary_applicable:
        assert b.corollary_lower <= var <= b.corollary_upper


def test_variance_bounds_fold_q():
    """Bounds are stated after folding q above 1 back to 1/q."""
    b_low = variance_bounds_two_sided(parse_group("B4"), 0.5)
    b_high = variance_bounds_two_sided(parse_group("B4"), 2.0)
    assert math.isclose(b_low.lower, b_high.lower)
    assert math.isclose(b_low.upper, b_high.upper)


def test_variance_corollary_flags():
    # D corollary needs rank at least 30
    d = variance_bounds_two_sided(parse_group("D4"), 0.5)
    assert not d.corollary_applicable
    b = variance_bounds_two_sided(parse_group("B4"), 0.5)
    assert b.corollary_applicable
    nk = 4 * 0.5
    assert math.isclose(b.corollary_lower, nk / 6)
    assert math.isclose(b.corollary_upper, 4 * nk)
    a = variance_bounds_two_sided(parse_group("A4"), 0.5)
    assert math.isclose(a.corollary_upper, 8 * nk)
    with pytest.raises(ValueError):
        variance_bounds_two_sided(parse_group("I2(5)"), 0.5)


def test_cube_moment_bound():
    c = cube_moment_bound_check(parse_group("B4"), 1.0, mode="exact")
    assert c.passed
    assert math.isclose(c.bound, 136.0)  # (nr)^3 + 24 (nr)^2 + 16 nr at nr = 2
    c = cube_moment_bound_check(parse_group("D4"), 0.5, mode="exact")
    assert c.passed
    c = cube_moment_bound_check(parse_group("B3"), 0.5, mode="mc", count=20000, seed=4)
    assert c.passed


def test_descent_indicator_mean():
    for name in ("A3", "B3", "D4"):
        for q in (0.5, 1.0, 3.0):
            c = descent_indicator_mean_check(parse_group(name), q)
            assert c.passed, c.line()


def test_empirical_distribution_matches_exact():
    spec = MallowsSpec.make("B3", 2.0)
    dist, summary = empirical_distribution(spec, "t", 20000, seed=11)
    exact = exact_distribution(spec, "t")
    assert abs(summary.mean - exact.mean()) <= 5 * summary.se_mean
    assert summary.count == 20000


def test_goodness_of_fit_behaviour():
    rng = np.random.default_rng(0)
    d = bernoulli(0.5)
    xs = rng.integers(0, 2, size=5000)
    _, _, p = goodness_of_fit(xs, d)
    assert p > 1e-3
    skewed = np.zeros(5000, dtype=np.int64)
    _, _, p_bad = goodness_of_fit(skewed, d)
    assert p_bad < 1e-12
    outside = np.full(100, 7)
    _, _, p_out = goodness_of_fit(outside, d)
    assert p_out == 0.0


def test_two_sample_chi_square_behaviour():
    rng = np.random.default_rng(1)
    xs = rng.binomial(10, 0.5, size=8000)
    ys = rng.binomial(10, 0.5, size=8000)
    zs = rng.binomial(10, 0.6, size=8000)
    _, _, p_same = two_sample_chi_square(xs, ys)
    _, _, p_diff = two_sample_chi_square(xs, zs)
    assert p_same > 1e-3
    assert p_diff < 1e-6
