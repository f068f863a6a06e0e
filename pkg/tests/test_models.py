import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from otabc._random import stream
from otabc.exceptions import InvalidInput, Unsupported
from otabc.models import (
    ConstantNormal,
    NormalLocation,
    ParameterSpace,
    PreferentialAttachment,
    Prior,
    make_model,
    normal_true_posterior,
    simulate_pref_attach,
)


def test_normal_location_reproducible():
    m = NormalLocation()
    a = m.simulate(0.0, 4, np.random.default_rng(5))
    b = m.simulate(0.0, 4, np.random.default_rng(5))
    assert a.shape == (4,) and np.all(np.isfinite(a))
    np.testing.assert_array_equal(a, b)


def test_batch_matches_row_count_and_is_deterministic():
    m = NormalLocation(sigma=2.0)
    thetas = np.array([[0.0], [5.0], [-5.0]])
    Z = m.simulate_batch(thetas, 1000, np.random.default_rng(0))
    assert Z.shape == (3, 1000)
    np.testing.assert_allclose(Z.mean(axis=1), [0, 5, -5], atol=5 * 2 / math.sqrt(1000))
    np.testing.assert_array_equal(Z, m.simulate_batch(thetas, 1000, np.random.default_rng(0)))


def test_large_location():
    z = NormalLocation().simulate(1e6, 50, np.random.default_rng(1))
    assert np.all(np.abs(z - 1e6) < 10)
    assert abs(z.mean() - 1e6) < 5 / math.sqrt(50)


def test_sample_mean_concentration():
    m = NormalLocation()
    Z = m.simulate_batch(np.full((1000, 1), 0.3), 100, np.random.default_rng(2))
    assert np.sum(np.abs(Z.mean(axis=1) - 0.3) <= 0.5) >= 999


def test_log_density_formula():
    m = NormalLocation()
    assert m.log_density(0.0, [0.0]) == pytest.approx(-0.5 * math.log(2 * math.pi))
    z = np.array([0.3, -1.2, 2.0])
    expected = np.sum(-0.5 * np.log(2 * np.pi) - (z - 0.5) ** 2 / 2)
    assert m.log_density(0.5, z) == pytest.approx(expected)
    np.testing.assert_allclose(m.log_density_many([0.5, 0.0], z), [expected, m.log_density(0.0, z)])
    # the mode sits at the observation
    grid = np.linspace(-2, 2, 41)
    assert grid[np.argmax(m.log_density_many(grid, [0.7]))] == pytest.approx(0.7)


def test_log_density_matches_scipy_for_other_sigma():
    m = NormalLocation(sigma=2.0)
    z = np.array([0.1, 4.0])
    assert m.log_density(1.0, z) == pytest.approx(stats.norm(1.0, 2.0).logpdf(z).sum())


def test_likelihood_free_models_refuse_density():
    with pytest.raises(Unsupported):
        PreferentialAttachment().log_density(1.0, [1, 1])
    with pytest.raises(Unsupported):
        ConstantNormal().log_density(0.0, [0.0])


def test_parameter_space_enforced():
    m = PreferentialAttachment()
    with pytest.raises(InvalidInput):
        m.simulate(3.5, 10, np.random.default_rng(0))
    with pytest.raises(InvalidInput):
        m.simulate_batch(np.array([[1.0], [-0.1]]), 10, np.random.default_rng(0))
    with pytest.raises(InvalidInput):
        m.simulate(1.0, 1, np.random.default_rng(0))
    with pytest.raises(InvalidInput):
        NormalLocation().simulate(0.0, 0, np.random.default_rng(0))
    with pytest.raises(InvalidInput):
        ParameterSpace(1, ((1.0, 0.0),))


def test_constant_normal_repeats_one_value():
    z = ConstantNormal().simulate(2.0, 7, np.random.default_rng(0))
    assert np.all(z == z[0])
    Z = ConstantNormal().simulate_batch(np.zeros((5, 1)), 3, np.random.default_rng(0))
    assert np.all(Z == Z[:, :1])


def test_pref_attach_examples():
    np.testing.assert_array_equal(simulate_pref_attach(1.3, 2, np.random.default_rng(0)), [1.0, 1.0])
    deg = PreferentialAttachment().simulate(1.0, 500, np.random.default_rng(0))
    assert deg.sum() == 2 * 499
    assert np.all(deg >= 1) and np.all(deg == np.round(deg))
    with pytest.raises(InvalidInput):
        simulate_pref_attach(1.0, 1, np.random.default_rng(0))


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 3), st.integers(2, 300), st.integers(0, 2**32 - 1))
def test_handshake_identity(theta, n_nodes, seed):
    deg = simulate_pref_attach(theta, n_nodes, np.random.default_rng(seed))
    assert deg.sum() == 2 * (n_nodes - 1)


def test_make_model():
    assert make_model("normal_location", sigma=2.0).sigma == 2.0
    assert make_model("pref_attach").min_n == 2
    with pytest.raises(InvalidInput):
        make_model("ising")


@pytest.mark.parametrize(
    "params",
    [
        {"kind": "uniform", "low": -1.0, "high": 2.0},
        {"kind": "gaussian", "mean": 0.5, "sd": 2.0},
        {"kind": "truncated_gaussian", "mean": 0.0, "sd": 1.0, "low": -0.5, "high": 3.0},
    ],
)
def test_prior_probability_integrates_to_one(params):
    prior = Prior.from_dict(params)
    assert abs(prior.interval_prob(-np.inf, np.inf) - 1.0) <= 1e-9
    draws = prior.sample(stream(0, 99), 20_000)
    assert draws.shape == (20_000, 1)
    assert np.all(draws >= prior.low) and np.all(draws <= prior.high)
    # the interval evaluator matches a numerical integral of the density
    a, b = -0.3, 0.8
    dens = prior._dists[0].pdf
    assert prior.interval_prob(a, b) == pytest.approx(integrate.quad(dens, a, b)[0], abs=1e-9)
    assert stats.kstest(draws[:, 0], prior.cdf).pvalue > 1e-3


def test_prior_interval_edge_cases():
    prior = Prior("uniform", low=0.0, high=1.0)
    assert prior.interval_prob(0.5, 0.2) == 0.0
    assert prior.interval_prob(0.25, 0.5) == pytest.approx(0.25)
    assert prior.contained_in(PreferentialAttachment().parameter_space)
    assert not Prior("gaussian", mean=0, sd=1).contained_in(PreferentialAttachment().parameter_space)


def test_product_prior():
    prior = Prior("uniform", low=[0, 0], high=[1, 2])
    assert prior.dim == 2
    assert prior.interval_prob([0, 0], [0.5, 1]) == pytest.approx(0.25)
    with pytest.raises(Unsupported):
        prior.cdf(0.5)


@pytest.mark.parametrize(
    "params",
    [
        {"kind": "beta"},
        {"kind": "uniform", "low": 1.0, "high": 0.0},
        {"kind": "uniform", "low": -np.inf, "high": 0.0},
        {"kind": "gaussian", "mean": 0.0, "sd": 0.0},
        {"kind": "gaussian", "mean": 0.0},
        {"kind": "truncated_gaussian", "mean": 0.0, "sd": 1.0, "low": 2.0, "high": 1.0},
    ],
)
def test_invalid_priors(params):
    with pytest.raises(InvalidInput):
        Prior.from_dict(params)


def test_conjugate_posterior_examples():
    prior = Prior("gaussian", mean=0.0, sd=1.0)
    post = normal_true_posterior(prior, np.zeros(4))
    assert post.mean == 0.0 and post.sd**2 == pytest.approx(1 / 5)
    assert post.cdf(0.0) == 0.5
    assert normal_true_posterior(prior, np.ones(4)).mean == pytest.approx(4 / 5)
    same = normal_true_posterior(prior, [])
    assert (same.mean, same.sd) == (0.0, 1.0)
    with pytest.raises(InvalidInput):
        normal_true_posterior(Prior("uniform", low=0, high=1), [0.0])


def test_conjugate_posterior_matches_quadrature():
    prior = Prior("gaussian", mean=0.5, sd=2.0)
    data = np.array([-0.6, 0.1, 0.4, 0.7, 1.4])
    post = normal_true_posterior(prior, data)
    m = NormalLocation()

    def unnorm(t):
        return math.exp(m.log_density(t, data) + prior._dists[0].logpdf(t))

    z = integrate.quad(unnorm, -10, 10)[0]
    below = integrate.quad(unnorm, -10, 0)[0]
    assert post.interval_prob(-np.inf, 0.0) == pytest.approx(below / z, abs=1e-8)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=20), st.floats(-3, 3), st.floats(0.1, 5))
def test_posterior_cdf_monotone_and_centered(data, m0, s0):
    post = normal_true_posterior(Prior("gaussian", mean=m0, sd=s0), data)
    assert abs(post.cdf(post.mean) - 0.5) <= 1e-12
    xs = np.linspace(post.mean - 5, post.mean + 5, 50)
    assert np.all(np.diff(post.cdf(xs)) >= 0)
    assert post.sd <= s0
