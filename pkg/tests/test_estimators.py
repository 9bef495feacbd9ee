import math

import numpy as np
import pytest
from scipy import integrate, stats

from abcerr import (
    AllWeightsZero,
    DiscreteOracleModel,
    EvidenceEstimate,
    Gaussian,
    RejectionConfig,
    ToyPosterior,
    UniformBall,
    WeightedSample,
    ZeroDenominator,
    bayes_factor,
    estimate_evidence,
    make_stream,
    run_algorithm_a,
    run_rejection,
    run_weighted,
    weighted_expectation,
    weighted_standard_error,
)
from abcerr.estimators import effective_sample_size

TOY_KERNEL = Gaussian(1 / math.sqrt(3))


@pytest.fixture(scope="module")
def toy_sample():
    from abcerr.models import toy_model

    toy = toy_model()
    return run_rejection(toy.prior, toy.simulator, toy.obs, RejectionConfig(TOY_KERNEL, n_target=100_000, seed=21))


def test_constant_function_gives_one(toy_sample):
    assert weighted_expectation(toy_sample, lambda th: np.ones(len(th))) == 1.0
    assert weighted_expectation(toy_sample, lambda th: 1.0) == 1.0


def test_posterior_mean_is_zero(toy_sample):
    f = lambda th: th[:, 0]
    assert abs(weighted_expectation(toy_sample, f)) < 3 * weighted_standard_error(toy_sample, f)


def test_posterior_second_moment_matches_quadrature(toy_sample):
    f = lambda th: th[:, 0] ** 2
    post = ToyPosterior("gaussian", 1.0)
    z, _ = integrate.quad(lambda t: 0.5 * stats.norm.pdf(t, 0, math.sqrt(4 / 3))
                          + 0.5 * stats.norm.pdf(t, 0, math.sqrt(0.01 + 1 / 3)), -10, 10, points=[0.0])
    m2, _ = integrate.quad(lambda t: t * t * (0.5 * stats.norm.pdf(t, 0, math.sqrt(4 / 3))
                                              + 0.5 * stats.norm.pdf(t, 0, math.sqrt(0.01 + 1 / 3))) / z,
                           -10, 10, points=[0.0])
    assert post.moment(2) == pytest.approx(m2, rel=1e-9)
    assert abs(weighted_expectation(toy_sample, f) - m2) < 3 * weighted_standard_error(toy_sample, f)


def test_weighted_sample_expectations(toy):
    s = run_weighted(toy.prior, toy.simulator, toy.obs, RejectionConfig(TOY_KERNEL, n_proposals=400_000, seed=22))
    f = lambda th: th[:, 0] ** 2
    m2 = ToyPosterior("gaussian", 1.0).moment(2)
    assert abs(weighted_expectation(s, f) - m2) < 3 * weighted_standard_error(s, f)
    assert effective_sample_size(s) == s.meta["effective_sample_size"]
    # expectations of the stored outputs
    gap = weighted_expectation(s, lambda th, x: x[:, 0] - th[:, 0], on="both")
    assert abs(gap) < 3 * weighted_standard_error(s, lambda th, x: x[:, 0] - th[:, 0], on="both")
    assert weighted_expectation(s, lambda x: x[:, 0] ** 0, on="x") == pytest.approx(1.0)


def test_rescaling_weights_changes_nothing():
    rng = make_stream(1)
    theta, w = rng.normal(size=(500, 2)), rng.random(500)
    f = lambda th: th**2
    base = weighted_expectation(WeightedSample(theta, w), f)
    for k in (1e-8, 3.0, 1e9):
        np.testing.assert_allclose(weighted_expectation(WeightedSample(theta, w * k), f), base, rtol=1e-12)


def test_indicator_expectation_is_a_probability(toy_sample):
    p = weighted_expectation(toy_sample, lambda th: (th[:, 0] > 0.5).astype(float))
    assert 0.0 <= p <= 1.0
    post = ToyPosterior("gaussian", 1.0)
    assert p == pytest.approx(1 - float(post.cdf(0.5)), abs=0.01)


def test_all_zero_weights_raise():
    with pytest.raises(AllWeightsZero):
        weighted_expectation(WeightedSample(np.zeros((3, 1)), np.zeros(3)), lambda th: th[:, 0])


def test_constant_summands_give_c():
    from abcerr import DataVector, FunctionSimulator, UniformPrior

    prior = UniformPrior([0.0], [1.0])
    sim = FunctionSimulator(lambda th, rng: np.zeros((len(th), 1)), 1)
    for k in (UniformBall(0.2), Gaussian(0.5)):
        est = estimate_evidence(prior, sim, DataVector([0.0]), k, n=100, m=3)
        assert est.value == pytest.approx(k.c, rel=1e-14)
        assert est.std_error < 1e-15


def test_discrete_evidence_matches_enumeration(discrete):
    model = discrete.as_model()
    k = Gaussian(1.5)
    est = estimate_evidence(model.prior, model.simulator, model.obs, k, n=10_000, m=10, seed=23)
    assert abs(est.value - discrete.evidence(k)) < 3 * est.std_error
    assert (est.n, est.m, est.seed) == (10_000, 10, 23)
    assert est.to_dict()["kernel"]["family"] == "gaussian"


def test_toy_evidence_matches_quadrature(toy):
    s2 = 1 / 3
    exact, _ = integrate.quad(lambda t: (0.5 * stats.norm.pdf(0, t, math.sqrt(1 + s2))
                                         + 0.5 * stats.norm.pdf(0, t, math.sqrt(0.01 + s2))) / 20, -10, 10,
                              points=[0.0])
    est = estimate_evidence(toy.prior, toy.simulator, toy.obs, TOY_KERNEL, n=20_000, m=10, seed=24)
    assert abs(est.value - exact) < 3 * est.std_error


def test_uniform_evidence_is_scaled_acceptance_rate(toy):
    delta, n, m, seed = 0.5, 3000, 7, 25
    est = estimate_evidence(toy.prior, toy.simulator, toy.obs, UniformBall(delta), n=n, m=m, seed=seed)
    # replay the stream: per batch of outer draws, parameters then every inner simulation
    rng = make_stream(seed, 0)
    hits, done, outer = 0, 0, 10_000 // m
    while done < n:
        b = min(outer, n - done)
        theta = toy.prior.sample(rng, b)
        x = toy.simulator.simulate(np.repeat(theta, m, axis=0), rng)
        hits += int(np.count_nonzero(np.abs(x[:, 0]) <= delta))
        done += b
    assert est.value == pytest.approx(hits / (n * m) / (2 * delta), rel=1e-12)
    # with one inner draw the proposals are the hard-cutoff sampler's own
    est1 = estimate_evidence(toy.prior, toy.simulator, toy.obs, UniformBall(delta), n=10_000, m=1, seed=26)
    a = run_algorithm_a(toy.prior, toy.simulator, toy.obs,
                        RejectionConfig(UniformBall(delta), n_proposals=10_000, seed=26))
    assert est1.value == pytest.approx(a.acceptance_rate / (2 * delta), rel=1e-12)


def test_standard_error_shrinks_with_inner_draws(toy):
    ses = [estimate_evidence(toy.prior, toy.simulator, toy.obs, TOY_KERNEL, n=2000, m=m, seed=27).std_error
           for m in (1, 10, 100)]
    assert ses[0] > ses[1] > ses[2]


def test_single_outer_draw_has_infinite_error(toy):
    est = estimate_evidence(toy.prior, toy.simulator, toy.obs, TOY_KERNEL, n=1, m=5)
    assert math.isinf(est.std_error)


def test_evidence_workers_are_deterministic(toy):
    a = estimate_evidence(toy.prior, toy.simulator, toy.obs, TOY_KERNEL, n=1001, m=3, seed=3, workers=3)
    b = estimate_evidence(toy.prior, toy.simulator, toy.obs, TOY_KERNEL, n=1001, m=3, seed=3, workers=3)
    assert a == b


def test_evidence_estimate_rejects_negative_values():
    with pytest.raises(ValueError):
        EvidenceEstimate(-1.0, 0.1, 10, 1)


def test_bayes_factor_of_identical_runs_is_one(discrete):
    model = discrete.as_model()
    e = [estimate_evidence(model.prior, model.simulator, model.obs, Gaussian(1.5), n=2000, m=5, seed=28)
         for _ in range(2)]
    bf = bayes_factor(*e)
    assert bf.value == 1.0
    assert bf.std_error == pytest.approx(math.sqrt(2) * e[0].std_error / e[0].value)


def test_bayes_factor_matches_enumerated_ratio():
    k = Gaussian(1.5)
    m1, m2 = DiscreteOracleModel.default(seed=1), DiscreteOracleModel.default(seed=2)
    e1 = estimate_evidence(m1.prior, m1.simulator, m1.obs, k, n=20_000, m=10, seed=29)
    e2 = estimate_evidence(m2.prior, m2.simulator, m2.obs, k, n=20_000, m=10, seed=30)
    bf = bayes_factor(e1, e2)
    assert abs(bf.value - m1.evidence(k) / m2.evidence(k)) < 3 * bf.std_error


def test_bayes_factor_zero_denominator():
    with pytest.raises(ZeroDenominator):
        bayes_factor(EvidenceEstimate(0.1, 0.01, 10, 1), EvidenceEstimate(0.0, 0.0, 10, 1))
    assert bayes_factor(EvidenceEstimate(0.0, 0.01, 10, 1), EvidenceEstimate(0.5, 0.1, 10, 1)).value == 0.0
