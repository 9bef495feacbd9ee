import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from abcerr import (
    DataVector,
    DimensionMismatch,
    DivisionByZero,
    Epanechnikov,
    Gaussian,
    InvalidBound,
    Product,
    UniformBall,
    Unsupported,
    make_kernel,
    make_stream,
    max_relative_error_metric,
)

OBS = (1.149, 0.6358, 316.0)
small = st.floats(-5, 5, allow_nan=False)
scale = st.floats(0.01, 10)


def scalar(k, r):
    return float(k.density(np.array([r]))[0])


def test_density_examples():
    assert scalar(Epanechnikov(1.0), 0.0) == pytest.approx(0.75, rel=1e-15)
    assert scalar(Epanechnikov(1.0), 1.0) == 0.0
    assert scalar(UniformBall(0.1), 0.05) == pytest.approx(5.0, rel=1e-12)
    assert scalar(Gaussian(0.7), 0.0) == pytest.approx(1 / (0.7 * math.sqrt(2 * math.pi)), rel=1e-14)


def test_density_accepts_datavector_and_checks_dimension():
    k = Gaussian([1.0, 2.0])
    assert k.density(DataVector([0.0, 0.0]))[0] == pytest.approx(1 / (2 * 2 * math.pi))
    with pytest.raises(DimensionMismatch):
        k.density(np.zeros((4, 3)))


def test_acceptance_examples():
    for k in (UniformBall(0.3), Epanechnikov(2.0), Gaussian(0.5), Product([UniformBall(1.0), Gaussian(2.0)])):
        assert k.acceptance_prob(np.zeros(k.dim))[0] == 1.0
    assert UniformBall(1.0).acceptance_prob(np.array([1.5]))[0] == 0.0
    assert Gaussian(1.0).acceptance_prob(np.array([1.0]))[0] == pytest.approx(math.exp(-0.5), rel=1e-14)


def test_error_variances():
    assert UniformBall(1.0).error_variance() == pytest.approx(1 / 3, rel=1e-15)
    assert Epanechnikov(1.0).error_variance() == pytest.approx(1 / 5, rel=1e-15)
    delta = 0.3
    assert Gaussian(math.sqrt(delta**2 / 3)).error_variance() == pytest.approx(0.03, rel=1e-12)
    with pytest.raises(Unsupported):
        Product([UniformBall(1.0), Gaussian(1.0)]).error_variance()
    assert Product([UniformBall(1.0), Epanechnikov(1.0)]).child_variances() == pytest.approx([1 / 3, 1 / 5])


@pytest.mark.parametrize("delta", [0.1, 1.0, 3.7])
def test_variance_ratio_is_three_fifths(delta):
    ratio = Epanechnikov(delta).error_variance() / UniformBall(delta).error_variance()
    assert ratio == pytest.approx(0.6, rel=1e-15)


@pytest.mark.parametrize("k", [UniformBall(0.4), Epanechnikov(0.4), Gaussian(0.4), UniformBall(0.2, metric="max")])
def test_scalar_normalization(k):
    lim = 12 * 0.4
    total, _ = integrate.quad(lambda r: scalar(k, r), -lim, lim, points=[-0.4, -0.2, 0.2, 0.4], limit=200)
    assert total == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("family", ["uniform", "epanechnikov"])
@pytest.mark.parametrize("metric", ["euclidean", "max"])
def test_two_dimensional_normalization(family, metric):
    k = make_kernel(family, delta=0.8, metric=metric, dim=2)

    def f(y, x):
        return float(k.density(np.array([[x, y]]))[0])

    if metric == "max":
        total, _ = integrate.dblquad(f, -0.8, 0.8, -0.8, 0.8, epsabs=1e-10)
    else:
        total, _ = integrate.dblquad(f, -0.8, 0.8, lambda x: -math.sqrt(0.64 - x * x),
                                     lambda x: math.sqrt(0.64 - x * x), epsabs=1e-10)
    assert total == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("k", [UniformBall(0.5), Epanechnikov(0.5), Gaussian(0.5)], ids=["uniform", "epan", "gauss"])
def test_monte_carlo_variance(k):
    e = k.sample(make_stream(12), 1_000_000)[:, 0]
    sq = e**2
    se = sq.std(ddof=1) / math.sqrt(e.size)
    assert abs(sq.mean() - k.error_variance()) < 3 * se
    assert np.all(k.density(e[:1000]) > 0)


@settings(max_examples=200)
@given(small, scale)
def test_uniform_acceptance_is_the_cutoff_indicator(r, delta):
    k = UniformBall(delta)
    assert k.acceptance_prob(np.array([r]))[0] == (1.0 if abs(r) <= delta else 0.0)


@settings(max_examples=100)
@given(st.lists(small, min_size=3, max_size=3), scale, scale)
def test_product_density_is_product_of_children(v, d1, s2):
    children = [UniformBall(d1, metric="max", dim=2), Gaussian(s2)]
    k = Product(children)
    diff = np.array([v])
    expected = children[0].density(diff[:, :2])[0] * children[1].density(diff[:, 2:])[0]
    assert k.density(diff)[0] == pytest.approx(expected, rel=1e-12)


@settings(max_examples=200)
@given(small, st.sampled_from(["uniform", "epanechnikov", "gaussian"]), scale)
def test_density_bounded_by_c_and_even(r, family, s):
    k = make_kernel(family, sigma=s) if family == "gaussian" else make_kernel(family, delta=s)
    d = scalar(k, r)
    assert 0.0 <= d <= k.c * (1 + 1e-12)
    assert d == scalar(k, -r)
    if family != "gaussian" and abs(r) > s:
        assert d == 0.0


def test_random_search_for_density_above_c():
    rng = make_stream(99)
    for k in (UniformBall(0.3, dim=3), Epanechnikov(1.1, dim=2, metric="max"), Gaussian([0.2, 3.0])):
        diffs = rng.normal(scale=2.0, size=(20_000, k.dim)) * rng.random((20_000, 1))
        assert np.all(k.density(diffs) <= k.c * (1 + 1e-12))


def test_explicit_c():
    k = Gaussian(1.0, c=1.0)
    assert k.acceptance_prob(np.array([0.0]))[0] == pytest.approx(1 / math.sqrt(2 * math.pi))
    with pytest.raises(InvalidBound):
        Gaussian(1.0, c=0.1)
    with pytest.raises(InvalidBound):
        UniformBall(1.0, c=0.0)


def test_max_relative_metric_examples():
    r = max_relative_error_metric(DataVector(OBS), DataVector([1.0341, 0.58122, 284.0]))
    # the third coordinate sets the distance: 32 / 316
    assert r == pytest.approx(32 / 316, rel=1e-12)
    assert max_relative_error_metric(DataVector(OBS), DataVector(OBS)) == 0.0
    assert max_relative_error_metric(DataVector([2.0]), DataVector([1.0])) == 0.5
    with pytest.raises(DivisionByZero):
        max_relative_error_metric(DataVector([0.0, 1.0]), DataVector([1.0, 1.0]))


def test_max_relative_box_acceptance():
    from abcerr.kernels import MaxRelativeMetric

    assert UniformBall(0.1).acceptance_prob(np.array([0.1]))[0] == 1.0
    k = UniformBall(0.1, metric=MaxRelativeMetric(OBS), dim=3)
    diffs = np.array([
        [0.0, 0.0, 31.5],
        [1.149 - 1.0341, 0.0, 0.0],
        [0.0, 0.0, 32.0],
        [0.0, -0.0636, 0.0],
    ])
    assert k.acceptance_prob(diffs).tolist() == [1.0, 1.0, 0.0, 0.0]


def test_descriptor_round_trips_kernel_settings():
    d = UniformBall(0.25, metric="max").descriptor()
    assert d["family"] == "uniform" and d["delta"] == 0.25 and d["metric"] == "max"
    assert Gaussian([1.0, 2.0]).descriptor()["sigma"] == [1.0, 2.0]
