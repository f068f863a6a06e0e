import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from otabc.exceptions import InvalidInput, TooLarge
from otabc.measures import EmpiricalMeasure, SampleSpaceConfig, cdf, empirical_from_samples, point_mass
from otabc.transport import (
    CostFunction,
    Discrepancy,
    DiscrepancyTransformer,
    DiscreteCoupling,
    kantorovich_discrete,
    radon_distance,
    sliced_wasserstein,
    wasserstein_1d,
    wasserstein_p,
)

from conftest import random_measure

finite = st.floats(-100, 100, allow_nan=False)
samples_1d = st.lists(finite, min_size=1, max_size=25)


def cdf_gap_integral(mu, nu):
    """Independent W1 oracle: integral of |F - G| over the line, piecewise constant."""
    pts = np.union1d(mu.atoms, nu.atoms)
    gaps = np.abs(cdf(mu, pts[:-1]) - cdf(nu, pts[:-1]))
    return float(np.sum(gaps * np.diff(pts)))


def brute_force_matching(x, y, p=1.0):
    n = x.shape[0]
    dist = np.linalg.norm(x[:, None, :] - y[None, :, :], axis=-1) ** p
    return min(dist[np.arange(n), list(perm)].mean() for perm in itertools.permutations(range(n)))


def test_point_masses():
    assert wasserstein_1d(point_mass(0.0), point_mass(1.5)) == 1.5
    assert wasserstein_1d(point_mass(0.0), point_mass(1.5), p=2) == 1.5
    assert wasserstein_p(point_mass([0.0, 0.0]), point_mass([3.0, 4.0])) == pytest.approx(5.0)


def test_two_point_examples():
    mu = EmpiricalMeasure([0.0, 1.0])
    nu = EmpiricalMeasure([0.0, 2.0])
    # quantile difference is 0 on half the mass and 1 on the other half
    assert wasserstein_1d(mu, nu, 1) == pytest.approx(0.5)
    assert wasserstein_1d(mu, nu, 2) == pytest.approx(math.sqrt(0.5))
    mu = EmpiricalMeasure([0.0, 1.0], [0.25, 0.75])
    assert wasserstein_1d(mu, point_mass(0.0)) == pytest.approx(0.75)


def test_kantorovich_returns_valid_coupling():
    rng = np.random.default_rng(1)
    mu = random_measure(rng, 5)
    nu = random_measure(rng, 7)
    value, coupling = kantorovich_discrete(mu, nu)
    assert isinstance(coupling, DiscreteCoupling)
    np.testing.assert_allclose(coupling.mass.sum(axis=1), mu.weights, atol=1e-9)
    np.testing.assert_allclose(coupling.mass.sum(axis=0), nu.weights, atol=1e-9)
    assert np.all(coupling.mass >= 0)
    cost = np.abs(mu.atoms[:, None] - nu.atoms[None, :])
    assert value == pytest.approx(np.sum(coupling.mass * cost))


def test_kantorovich_single_atom_uses_product_coupling():
    mu = EmpiricalMeasure([0.0, 2.0], [0.5, 0.5])
    value, coupling = kantorovich_discrete(mu, point_mass(1.0))
    assert value == 1.0
    np.testing.assert_array_equal(coupling.mass, [[0.5], [0.5]])


def test_custom_cost_table():
    mu = EmpiricalMeasure([0.0, 1.0])
    nu = EmpiricalMeasure([5.0, 6.0])
    table = np.array([[0.0, 10.0], [10.0, 0.0]])
    value, coupling = kantorovich_discrete(mu, nu, CostFunction("custom_table", table=table))
    assert value == pytest.approx(0.0)
    np.testing.assert_allclose(coupling.mass, np.diag([0.5, 0.5]), atol=1e-12)
    with pytest.raises(InvalidInput):
        kantorovich_discrete(mu, nu, CostFunction("custom_table", table=np.ones((3, 2))))
    with pytest.raises(InvalidInput):
        CostFunction("custom_table", table=-np.ones((2, 2)))


def test_cost_validation():
    with pytest.raises(InvalidInput):
        CostFunction(p=0.5)
    with pytest.raises(InvalidInput):
        CostFunction(kind="euclid")


def test_coupling_validation():
    with pytest.raises(InvalidInput):
        DiscreteCoupling(np.array([[0.5, 0.0], [0.0, 0.4]]), np.array([0.5, 0.5]), np.array([0.5, 0.5]))
    with pytest.raises(InvalidInput):
        DiscreteCoupling(np.array([[-0.1, 0.6], [0.6, -0.1]]), np.array([0.5, 0.5]), np.array([0.5, 0.5]))


def test_size_cap():
    mu = EmpiricalMeasure(np.arange(200.0))
    with pytest.raises(TooLarge):
        kantorovich_discrete(mu, mu, cap=1000)
    big = empirical_from_samples(np.random.default_rng(0).normal(size=(200, 2)))
    with pytest.raises(TooLarge, match="sliced"):
        wasserstein_p(big, big, cap=1000)


def test_dimension_mismatch():
    with pytest.raises(InvalidInput):
        wasserstein_p(point_mass(0.0), point_mass([0.0, 0.0]))
    with pytest.raises(InvalidInput):
        radon_distance(point_mass(0.0), np.array([0.0]))


def test_lp_matches_closed_form_on_a_few_instances():
    rng = np.random.default_rng(3)
    for _ in range(20):
        mu = random_measure(rng, rng.integers(1, 15))
        nu = random_measure(rng, rng.integers(1, 15))
        for p in (1, 2, 3):
            lp, _ = kantorovich_discrete(mu, nu, CostFunction(p=p))
            assert abs(wasserstein_1d(mu, nu, p) ** p - lp) <= 1e-9


@pytest.mark.parametrize("dim", [1, 2])
def test_lp_matches_permutation_brute_force(dim):
    rng = np.random.default_rng(dim)
    for _ in range(15):
        n = int(rng.integers(1, 6))
        x, y = rng.normal(size=(n, dim)), rng.normal(size=(n, dim))
        lp, _ = kantorovich_discrete(empirical_from_samples(x), empirical_from_samples(y))
        assert abs(lp - brute_force_matching(x, y)) <= 1e-9


def test_two_dimensional_wasserstein2_brute_force():
    rng = np.random.default_rng(8)
    x, y = rng.normal(size=(5, 2)), rng.normal(size=(5, 2))
    w2 = wasserstein_p(empirical_from_samples(x), empirical_from_samples(y), p=2)
    assert w2 == pytest.approx(math.sqrt(brute_force_matching(x, y, p=2)), abs=1e-9)


def test_absolute_ground_metric():
    space = SampleSpaceConfig(dim_y=2, metric_kind="absolute")
    assert wasserstein_p(point_mass([0.0, 0.0]), point_mass([3.0, 4.0]), space=space) == pytest.approx(7.0)


def test_sliced_is_exact_in_one_dimension():
    rng = np.random.default_rng(4)
    mu, nu = random_measure(rng, 9), random_measure(rng, 4)
    assert sliced_wasserstein(mu, nu, p=2, n_projections=7, seed=3) == wasserstein_1d(mu, nu, 2)


def test_sliced_bounded_by_wasserstein_and_seeded():
    rng = np.random.default_rng(5)
    mu = empirical_from_samples(rng.normal(size=(6, 3)))
    nu = empirical_from_samples(rng.normal(size=(6, 3)) + 1.0)
    sw = sliced_wasserstein(mu, nu, n_projections=200, seed=1)
    assert 0 < sw <= wasserstein_p(mu, nu) + 1e-12
    assert sw == sliced_wasserstein(mu, nu, n_projections=200, seed=1)
    assert sw != sliced_wasserstein(mu, nu, n_projections=200, seed=2)


def test_sliced_translation():
    # projecting a pure shift by v gives |<u, v>|; its mean over the sphere in 2D is 2|v|/pi
    rng = np.random.default_rng(6)
    x = rng.normal(size=(30, 2))
    mu = empirical_from_samples(x)
    nu = empirical_from_samples(x + np.array([1.0, 0.0]))
    assert sliced_wasserstein(mu, nu, n_projections=20_000, seed=0) == pytest.approx(2 / math.pi, rel=0.02)


def test_radon_examples():
    mu = EmpiricalMeasure([0.0, 1.0])
    assert radon_distance(mu, mu) == 0.0
    assert radon_distance(mu, EmpiricalMeasure([2.0, 3.0])) == 2.0
    assert radon_distance(mu, EmpiricalMeasure([0.0, 1.0], [0.75, 0.25])) == 0.5


def test_discrepancy_dispatch_and_description():
    mu, nu = EmpiricalMeasure([0.0, 1.0]), EmpiricalMeasure([0.5, 3.0])
    assert Discrepancy()(mu, nu) == wasserstein_1d(mu, nu)
    assert Discrepancy("radon")(mu, nu) == 2.0
    assert Discrepancy("sliced_wasserstein", p=2)(mu, nu) == wasserstein_1d(mu, nu, 2)
    assert Discrepancy("radon").describe() == {"kind": "radon"}
    assert Discrepancy("sliced_wasserstein").describe()["n_projections"] == 50
    assert not Discrepancy("radon").is_sorted_matching
    with pytest.raises(InvalidInput):
        Discrepancy("energy")
    with pytest.raises(InvalidInput):
        Discrepancy(p=0.9)


def test_transformer_pipeline_shape():
    rng = np.random.default_rng(0)
    y = rng.normal(size=20)
    batch = rng.normal(size=(4, 20)) + np.arange(4)[:, None]
    tr = DiscrepancyTransformer(p=1).fit(y)
    out = tr.transform(batch)
    assert out.shape == (4, 1)
    ref = empirical_from_samples(y)
    for row, z in zip(out[:, 0], batch):
        assert row == wasserstein_1d(ref, empirical_from_samples(z))
    assert clone(tr).get_params() == {"kind": "wasserstein", "p": 1, "n_projections": 50, "random_state": 0}


# -- properties ---------------------------------------------------------------

@settings(max_examples=100, deadline=None)
@given(samples_1d, samples_1d)
def test_w1_equals_cdf_gap_integral(xs, ys):
    mu, nu = empirical_from_samples(xs), empirical_from_samples(ys)
    oracle = cdf_gap_integral(mu, nu)
    assert wasserstein_1d(mu, nu) == pytest.approx(oracle, rel=1e-9, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(samples_1d, st.floats(-50, 50), st.sampled_from([1.0, 2.0, 3.5]))
def test_shift_moves_by_shift(xs, c, p):
    x = np.asarray(xs)
    w = wasserstein_1d(empirical_from_samples(x), empirical_from_samples(x + c), p)
    # adding c can merge or split float-distinct atoms, so compare loosely
    assert w == pytest.approx(abs(c), rel=1e-6, abs=1e-6)


@settings(max_examples=100, deadline=None)
@given(samples_1d, samples_1d, st.floats(0.01, 10), st.sampled_from([1.0, 2.0]))
def test_homogeneous_under_scaling(xs, ys, a, p):
    mu, nu = empirical_from_samples(xs), empirical_from_samples(ys)
    mua = empirical_from_samples(a * np.asarray(xs))
    nua = empirical_from_samples(a * np.asarray(ys))
    assert wasserstein_1d(mua, nua, p) == pytest.approx(a * wasserstein_1d(mu, nu, p), rel=1e-9, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(samples_1d, samples_1d)
def test_wasserstein_order_monotone(xs, ys):
    mu, nu = empirical_from_samples(xs), empirical_from_samples(ys)
    w1, w2, w3 = (wasserstein_1d(mu, nu, p) for p in (1, 2, 3))
    assert w1 <= w2 * (1 + 1e-12) + 1e-12
    assert w2 <= w3 * (1 + 1e-12) + 1e-12


@settings(max_examples=100, deadline=None)
@given(samples_1d, samples_1d, samples_1d)
def test_radon_metric_axioms(xs, ys, zs):
    a, b, c = (empirical_from_samples(s) for s in (xs, ys, zs))
    assert radon_distance(a, b) == radon_distance(b, a)
    assert 0 <= radon_distance(a, b) <= 2
    assert radon_distance(a, c) <= radon_distance(a, b) + radon_distance(b, c) + 1e-12
