import math

import numpy as np
import pytest
from scipy import stats

from abcerr import (
    ChainState,
    DataVector,
    FunctionSimulator,
    Gaussian,
    GaussianRandomWalk,
    GridRandomWalk,
    IndependentGridProposal,
    InitFailure,
    InvalidState,
    McmcConfig,
    ProposalKernel,
    RejectionConfig,
    ToyPosterior,
    UniformBall,
    UniformPrior,
    make_stream,
    run_chain,
    run_rejection,
    step_algorithm_c,
    step_algorithm_d,
)
from abcerr.mcmc import (
    balance_violation,
    stationary_c,
    stationary_d,
    transition_matrix_c,
    transition_matrix_d,
)
from conftest import empirical_pmf, tv_distance

TOY_KERNEL = Gaussian(1 / math.sqrt(3))


class Shift(ProposalKernel):
    symmetric = False

    def __init__(self, by):
        self.by = by

    def propose(self, theta, rng):
        return theta + self.by

    def log_density(self, a, b):
        return np.where(np.all(np.isclose(b - a, self.by), axis=1), 0.0, -np.inf)


class Stay(ProposalKernel):
    symmetric = True

    def propose(self, theta, rng):
        return theta.copy()

    def log_density(self, a, b):
        return np.zeros(len(a))


def toy_chain(toy, algorithm, seed, n_steps=1200, burn_in=200, n_chains=200, thin=1, scale=1.0):
    cfg = McmcConfig(n_steps, GaussianRandomWalk([scale]), TOY_KERNEL, algorithm=algorithm, burn_in=burn_in,
                     thin=thin, seed=seed, n_chains=n_chains)
    return run_chain(cfg, toy.prior, toy.simulator, toy.obs)


def test_step_c_accepts_with_kernel_ratio_for_symmetric_moves(toy):
    n = 20_000
    state = ChainState(np.zeros((n, 1)))
    q = GaussianRandomWalk([0.5])
    new = step_algorithm_c(state, toy.obs, toy.prior, toy.simulator, q, TOY_KERNEL, make_stream(1))
    # replay the same stream by hand
    rng = make_stream(1)
    theta_p = q.propose(state.theta, rng)
    x_p = toy.simulator.simulate(theta_p, rng)
    u = rng.random(n)
    expected = u < TOY_KERNEL.acceptance_prob(toy.obs.values - x_p)
    assert np.array_equal(new.accepted, expected)
    assert np.array_equal(new.theta[expected], theta_p[expected])
    assert np.all(new.theta[~expected] == 0.0)


def test_out_of_support_proposals_are_rejected(toy):
    state = ChainState(np.full((500, 1), 9.5), x=np.zeros((500, 1)))
    for step in (step_algorithm_c, step_algorithm_d):
        new = step(state, toy.obs, toy.prior, toy.simulator, Shift(np.array([5.0])), UniformBall(100.0), make_stream(2))
        assert not new.accepted.any()
        assert np.all(new.theta == 9.5)


def test_identical_proposal_is_always_accepted():
    prior = UniformPrior([-1.0], [1.0])
    sim = FunctionSimulator(lambda th, rng: th.copy(), 1)
    state = ChainState(np.linspace(-0.5, 0.5, 101)[:, None], x=np.linspace(-0.5, 0.5, 101)[:, None])
    new = step_algorithm_d(state, DataVector([0.0]), prior, sim, Stay(), Gaussian(0.3), make_stream(3))
    assert new.accepted.all()


def test_zero_density_proposals_are_never_accepted(toy):
    cfg = McmcConfig(3000, GaussianRandomWalk([1.0]), UniformBall(0.3), algorithm="d", n_chains=50, seed=4)
    s = run_chain(cfg, toy.prior, toy.simulator, toy.obs)
    assert np.all(np.abs(s.x[:, 0]) <= 0.3)


def test_zero_density_state_is_invalid(toy):
    state = ChainState(np.zeros((2, 1)), x=np.array([[0.0], [5.0]]))
    with pytest.raises(InvalidState):
        step_algorithm_d(state, toy.obs, toy.prior, toy.simulator, GaussianRandomWalk([1.0]), UniformBall(1.0),
                         make_stream(0))
    with pytest.raises(InvalidState):
        step_algorithm_d(ChainState(np.zeros((1, 1))), toy.obs, toy.prior, toy.simulator,
                         GaussianRandomWalk([1.0]), UniformBall(1.0), make_stream(0))


def test_cached_log_weight_matches_recomputation(toy):
    state = ChainState(np.zeros((100, 1)), x=np.zeros((100, 1)))
    state.log_weight = TOY_KERNEL.log_weight(toy.obs.values, state.x)
    rng = make_stream(5)
    for _ in range(50):
        state = step_algorithm_d(state, toy.obs, toy.prior, toy.simulator, GaussianRandomWalk([1.0]), TOY_KERNEL, rng)
    np.testing.assert_array_equal(state.log_weight, TOY_KERNEL.log_weight(toy.obs.values, state.x))


def test_nonfinite_ratios_reject_and_count():
    prior = UniformPrior([-1.0], [1.0])
    sim = FunctionSimulator(lambda th, rng: np.where(th > 0, np.nan, th), 1)
    state = ChainState(np.full((400, 1), -0.5), x=np.full((400, 1), -0.01))
    state.log_weight = Gaussian(1.0).log_weight(np.zeros(1), state.x)
    new = step_algorithm_d(state, DataVector([0.0]), prior, sim, GaussianRandomWalk([0.6]), Gaussian(1.0),
                           make_stream(6))
    assert new.n_nonfinite > 0
    assert np.all(new.theta[new.accepted] <= 0)
    new_c = step_algorithm_c(ChainState(state.theta), DataVector([0.0]), prior, sim, GaussianRandomWalk([0.6]),
                             Gaussian(1.0), make_stream(6))
    assert new_c.n_nonfinite == new.n_nonfinite


def test_toy_chain_c_matches_oracle(toy):
    s = toy_chain(toy, "c", seed=7)
    assert len(s) == 200_000
    assert stats.kstest(s.theta[:, 0], ToyPosterior("gaussian", 1.0).cdf).statistic < 0.03


def test_chains_c_and_d_agree_and_d_accepts_more(toy):
    c = toy_chain(toy, "c", seed=8)
    d = toy_chain(toy, "d", seed=9)
    assert stats.ks_2samp(c.theta[:, 0], d.theta[:, 0]).statistic < 0.03
    assert d.meta["acceptance_rate"] >= c.meta["acceptance_rate"]
    # fixed-seed regression bounds for the reported diagnostics
    assert c.meta["acceptance_rate"] == pytest.approx(0.36542916666666664, rel=1e-12)
    assert d.meta["acceptance_rate"] == pytest.approx(0.44501666666666667, rel=1e-12)


def test_thinning_keeps_the_target(toy):
    plain = toy_chain(toy, "d", seed=10, n_steps=600, burn_in=100, n_chains=100)
    thinned = toy_chain(toy, "d", seed=11, n_steps=2600, burn_in=100, n_chains=100, thin=5)
    assert len(plain) == len(thinned) == 50_000
    assert stats.ks_2samp(plain.theta[:, 0], thinned.theta[:, 0]).statistic < 0.03


def test_rejection_and_chains_agree(toy):
    r = run_rejection(toy.prior, toy.simulator, toy.obs, RejectionConfig(TOY_KERNEL, n_target=100_000, seed=12))
    for algorithm, seed in (("c", 13), ("d", 14)):
        s = toy_chain(toy, algorithm, seed=seed)
        assert stats.ks_2samp(r.theta[:, 0], s.theta[:, 0]).statistic < 0.03


def test_burn_in_plus_one_keeps_one_state(toy):
    cfg = McmcConfig(11, GaussianRandomWalk([1.0]), TOY_KERNEL, burn_in=10)
    s = run_chain(cfg, toy.prior, toy.simulator, toy.obs)
    assert len(s) == 1
    cfg = McmcConfig(11, GaussianRandomWalk([1.0]), TOY_KERNEL, burn_in=10, n_chains=4)
    assert len(run_chain(cfg, toy.prior, toy.simulator, toy.obs)) == 4


def test_config_validation():
    q = GaussianRandomWalk([1.0])
    with pytest.raises(ValueError):
        McmcConfig(10, q, TOY_KERNEL, burn_in=10)
    with pytest.raises(ValueError):
        McmcConfig(10, q, TOY_KERNEL, thin=0)
    with pytest.raises(ValueError):
        McmcConfig(10, q, TOY_KERNEL, algorithm="e")


def test_initialization_failure(toy):
    far = DataVector([500.0])
    cfg = McmcConfig(10, GaussianRandomWalk([1.0]), UniformBall(0.1), algorithm="d", init_budget=10_000)
    with pytest.raises(InitFailure):
        run_chain(cfg, toy.prior, toy.simulator, far)
    cfg = McmcConfig(10, GaussianRandomWalk([1.0]), UniformBall(0.1), algorithm="c", init_budget=10_000)
    assert len(run_chain(cfg, toy.prior, toy.simulator, far)) == 10


def test_explicit_init_and_workers(toy):
    init = ChainState(np.linspace(-1, 1, 6)[:, None], x=np.zeros((6, 1)))
    cfg = McmcConfig(40, GaussianRandomWalk([1.0]), TOY_KERNEL, init=init, n_chains=6, workers=2, seed=15)
    a = run_chain(cfg, toy.prior, toy.simulator, toy.obs)
    b = run_chain(cfg, toy.prior, toy.simulator, toy.obs)
    assert np.array_equal(a.theta, b.theta)
    assert a.meta["chain"].tolist() == np.repeat(np.arange(6), 40).tolist()
    assert len(a.meta["acceptance_rate_per_chain"]) == 6
    assert a.meta["total_proposals"] == 240


# --- enumeration ---------------------------------------------------------


def _proposals(discrete):
    walk = GridRandomWalk(discrete.prior).matrix()
    indep = IndependentGridProposal(discrete.prior, [1, 2, 3, 4, 5]).matrix()
    return {"symmetric": walk, "asymmetric": indep}


@pytest.mark.parametrize("kind", ["symmetric", "asymmetric"])
@pytest.mark.parametrize("kernel", [Gaussian(1.5), UniformBall(1.5)], ids=["gaussian", "uniform"])
def test_detailed_balance(discrete, kind, kernel):
    Q = _proposals(discrete)[kind]
    w = discrete.kernel_weights(kernel)
    Pc = transition_matrix_c(discrete.prior_probs, discrete.transition, w, Q, kernel.c)
    pic = stationary_c(discrete.prior_probs, discrete.transition, w)
    np.testing.assert_allclose(Pc.sum(axis=1), 1.0, atol=1e-14)
    assert balance_violation(Pc, pic) < 1e-12
    np.testing.assert_allclose(pic, discrete.posterior(kernel), rtol=1e-12)
    Pd, states = transition_matrix_d(discrete.prior_probs, discrete.transition, w, Q)
    pid = stationary_d(discrete.prior_probs, discrete.transition, w, states)
    assert balance_violation(Pd, pid) < 1e-12
    np.testing.assert_allclose(pid @ Pd, pid, atol=1e-14)


def test_balance_violation_detects_a_broken_chain():
    P = np.array([[0.5, 0.5], [0.1, 0.9]])
    assert balance_violation(P, np.array([0.5, 0.5])) > 0.5


@pytest.mark.parametrize("kind", ["symmetric", "asymmetric"])
def test_chain_transitions_match_enumeration(discrete, kind):
    # empirical one-step transitions of the sampler against the enumerated matrix
    model = discrete.as_model()
    k = Gaussian(1.5)
    Q = _proposals(discrete)[kind]
    q = GridRandomWalk(discrete.prior) if kind == "symmetric" else IndependentGridProposal(discrete.prior, [1, 2, 3, 4, 5])
    P = transition_matrix_c(discrete.prior_probs, discrete.transition, discrete.kernel_weights(k), Q, k.c)
    n = 200_000
    start = 2
    state = ChainState(np.full((n, 1), discrete.theta_grid[start]))
    new = step_algorithm_c(state, model.obs, model.prior, model.simulator, q, k, make_stream(16))
    freq = empirical_pmf(new.theta, discrete.theta_grid)
    se = np.sqrt(P[start] * (1 - P[start]) / n)
    assert np.all(np.abs(freq - P[start]) <= 4 * se + 1e-12)


def test_joint_occupancy_of_chain_d(discrete):
    model = discrete.as_model()
    k = Gaussian(1.5)
    cfg = McmcConfig(10_100, GridRandomWalk(discrete.prior), k, algorithm="d", burn_in=100, n_chains=100, seed=17)
    s = run_chain(cfg, model.prior, model.simulator, model.obs)
    assert len(s) == 1_000_000
    i = np.searchsorted(discrete.theta_grid, s.theta[:, 0])
    j = np.searchsorted(discrete.alphabet, s.x[:, 0])
    occ = np.bincount(i * discrete.alphabet.size + j, minlength=discrete.transition.size) / len(s)
    assert tv_distance(occ, discrete.joint_posterior(k).ravel()) <= 0.02
