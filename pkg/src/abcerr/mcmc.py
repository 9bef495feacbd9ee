"""Metropolis-type chains for the error-augmented posterior.

Two samplers:

* ``algorithm="c"`` runs on parameter space.  A move to ``theta'`` is
  accepted with probability
  ``k(obs - X')/c * min(1, q(theta', theta) pi(theta') / (q(theta, theta') pi(theta)))``
  where ``X'`` is a fresh simulation at ``theta'``.
* ``algorithm="d"`` runs on the joint space of parameters and simulated
  outputs and accepts ``(theta', X')`` with probability
  ``min(1, k(obs - X') q(theta', theta) pi(theta') / (k(obs - X) q(theta, theta') pi(theta)))``.
  No bound ``c`` is needed.

States are batched: a :class:`ChainState` holds ``k`` chains that advance
in lockstep from one random stream, which keeps long runs vectorized.
``run_chain`` splits ``n_chains`` into ``workers`` such ensembles, ensemble
``g`` drawing from ``make_stream(seed, g, 0)`` for initialization and
``make_stream(seed, g, 1)`` for the chain itself.

The module also builds exact transition matrices for finite models so the
balance identity ``pi(s) P(s, t) = pi(t) P(t, s)`` can be checked directly.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from .core import DataVector, ProposalKernel, WeightedSample, make_stream, split_count
from .errors import InitFailure, InvalidState
from .rejection import log_acceptance, prepare_observation

__all__ = [
    "ChainState",
    "McmcConfig",
    "step_algorithm_c",
    "step_algorithm_d",
    "run_chain",
    "transition_matrix_c",
    "transition_matrix_d",
    "stationary_c",
    "stationary_d",
    "balance_violation",
]


@dataclass
class ChainState:
    """Current position of ``k`` chains.

    ``x`` and ``log_weight`` (the cached ``log k(obs - x)``) are only
    carried by joint-space chains.  ``accepted`` records which chains moved
    on the step that produced this state and ``n_nonfinite`` how many
    proposals were rejected because their log ratio was NaN.
    """

    theta: np.ndarray
    x: Optional[np.ndarray] = None
    log_weight: Optional[np.ndarray] = None
    accepted: Optional[np.ndarray] = None
    n_nonfinite: int = 0

    def __post_init__(self):
        self.theta = np.atleast_2d(np.asarray(self.theta, dtype=float))
        if self.x is not None:
            self.x = np.asarray(self.x, dtype=float).reshape(len(self.theta), -1)
        if self.log_weight is not None:
            self.log_weight = np.asarray(self.log_weight, dtype=float).reshape(len(self.theta))

    def __len__(self):
        return len(self.theta)


@dataclass
class McmcConfig:
    n_steps: int
    proposal: ProposalKernel
    kernel: Any
    algorithm: str = "d"
    burn_in: int = 0
    thin: int = 1
    init: Optional[ChainState] = None
    seed: int = 0
    n_chains: int = 1
    workers: int = 1
    init_budget: int = 10**6

    def __post_init__(self):
        self.algorithm = self.algorithm.lower()
        if self.algorithm not in ("c", "d"):
            raise ValueError(f"algorithm must be 'c' or 'd', got {self.algorithm!r}")
        if not 0 <= self.burn_in < self.n_steps:
            raise ValueError("need 0 <= burn_in < n_steps")
        if self.thin < 1:
            raise ValueError("thin must be at least 1")
        if self.n_chains < 1 or self.workers < 1 or self.workers > self.n_chains:
            raise ValueError("need 1 <= workers <= n_chains")


def _obs_values(obs):
    return np.asarray(getattr(obs, "values", obs), dtype=float)


def _propose(state, prior, sim, proposal, rng):
    theta = state.theta
    theta_p = proposal.propose(theta, rng)
    lp_new = prior.log_density(theta_p)
    ok = lp_new > -np.inf
    x_p = np.full((len(theta), sim.output_dim), np.nan)
    if ok.any():
        x_p[ok] = sim.simulate(theta_p[ok], rng)
    u = rng.random(len(theta))
    log_mh = lp_new - prior.log_density(theta)
    if not proposal.symmetric:
        log_mh = log_mh + proposal.log_density(theta_p, theta) - proposal.log_density(theta, theta_p)
    return theta_p, x_p, ok, u, log_mh


def _decide(log_ratio, u):
    nonfinite = np.isnan(log_ratio)
    with np.errstate(over="ignore"):
        accept = ~nonfinite & (u < np.exp(np.minimum(np.where(nonfinite, -np.inf, log_ratio), 0.0)))
    return accept, int(nonfinite.sum())


def step_algorithm_c(state: ChainState, obs, prior, sim, proposal, kernel, rng) -> ChainState:
    """One parameter-space step for every chain in ``state``.

    Proposals outside the prior support are rejected without simulating.
    """
    d = _obs_values(obs)
    theta_p, x_p, ok, u, log_mh = _propose(state, prior, sim, proposal, rng)
    log_r = np.full(len(state), -np.inf)
    if ok.any():
        log_r[ok] = log_acceptance(kernel, d, x_p[ok], theta_p[ok]) + np.minimum(log_mh[ok], 0.0)
    accept, bad = _decide(log_r, u)
    theta = np.where(accept[:, None], theta_p, state.theta)
    return ChainState(theta, accepted=accept, n_nonfinite=bad)


def step_algorithm_d(state: ChainState, obs, prior, sim, proposal, kernel, rng) -> ChainState:
    """One joint-space step for every chain in ``state``.

    Raises
    ------
    InvalidState
        Some chain sits at an output with zero kernel density.
    """
    if state.x is None:
        raise InvalidState("joint-space chains need the current simulated output")
    d = _obs_values(obs)
    lw = state.log_weight
    if lw is None:
        lw = kernel.log_weight(d, state.x, state.theta)
    if np.any(~(lw > -np.inf)):
        raise InvalidState("a chain is at an output with zero kernel density")
    theta_p, x_p, ok, u, log_mh = _propose(state, prior, sim, proposal, rng)
    lw_p = np.full(len(state), -np.inf)
    if ok.any():
        lw_p[ok] = kernel.log_weight(d, x_p[ok], theta_p[ok])
    log_r = np.where(ok, lw_p - lw + log_mh, -np.inf)
    accept, bad = _decide(log_r, u)
    return ChainState(
        np.where(accept[:, None], theta_p, state.theta),
        np.where(accept[:, None], x_p, state.x),
        np.where(accept, lw_p, lw),
        accepted=accept,
        n_nonfinite=bad,
    )


def _initial_state(cfg, prior, sim, d, k, rng) -> ChainState:
    """Start ``k`` chains from accepted draws of a short rejection run."""
    thetas, xs = [], []
    have, tried = 0, 0
    batch = max(1000, 4 * k)
    while have < k and tried < cfg.init_budget:
        theta = prior.sample(rng, batch)
        x = sim.simulate(theta, rng)
        u = rng.random(batch)
        acc = u < np.exp(log_acceptance(cfg.kernel, d, x, theta))
        thetas.append(theta[acc])
        xs.append(x[acc])
        have += int(acc.sum())
        tried += batch
    if have < k:
        if cfg.algorithm == "c":
            return ChainState(prior.sample(rng, k))
        raise InitFailure(f"only {have} of {k} initial states accepted in {tried} proposals")
    theta, x = np.concatenate(thetas)[:k], np.concatenate(xs)[:k]
    if cfg.algorithm == "c":
        return ChainState(theta)
    return ChainState(theta, x, cfg.kernel.log_weight(d, x, theta))


def _run_group(cfg, prior, sim, d, group, chains, init):
    init_rng = make_stream(cfg.seed, group, 0)
    rng = make_stream(cfg.seed, group, 1)
    k = len(chains)
    if init is None:
        state = _initial_state(cfg, prior, sim, d, k, init_rng)
    else:
        state = ChainState(
            init.theta[chains],
            None if init.x is None else init.x[chains],
            None if init.log_weight is None else init.log_weight[chains],
        )
        if cfg.algorithm == "d" and state.x is None:
            state.x = sim.simulate(state.theta, init_rng)
        if cfg.algorithm == "d":
            state.log_weight = cfg.kernel.log_weight(d, state.x, state.theta)
    if cfg.algorithm == "d" and np.any(~(state.log_weight > -np.inf)):
        raise InvalidState("initial state has zero kernel density")

    step = step_algorithm_c if cfg.algorithm == "c" else step_algorithm_d
    n_keep = len(range(cfg.burn_in, cfg.n_steps, cfg.thin))
    theta_out = np.empty((n_keep, k, prior.dim))
    x_out = np.empty((n_keep, k, sim.output_dim)) if cfg.algorithm == "d" else None
    n_acc = np.zeros(k, dtype=np.int64)
    n_bad = 0
    j = 0
    for t in range(cfg.n_steps):
        state = step(state, d, prior, sim, cfg.proposal, cfg.kernel, rng)
        n_acc += state.accepted
        n_bad += state.n_nonfinite
        if t >= cfg.burn_in and (t - cfg.burn_in) % cfg.thin == 0:
            theta_out[j] = state.theta
            if x_out is not None:
                x_out[j] = state.x
            j += 1
    return theta_out, x_out, n_acc / cfg.n_steps, n_bad


def run_chain(cfg: McmcConfig, prior, sim, obs: DataVector) -> WeightedSample:
    """Run ``cfg.n_chains`` chains and return retained states with unit weights.

    Step ``t`` (counting from 0) is kept when ``t >= burn_in`` and
    ``(t - burn_in) % thin == 0``.  Entries are ordered by chain, then time;
    ``meta["chain"]`` gives each entry's chain index.
    """
    d = prepare_observation(sim, obs, None).values
    sizes = split_count(cfg.n_chains, cfg.workers)
    edges = np.cumsum([0] + sizes)
    groups = [np.arange(edges[g], edges[g + 1]) for g in range(cfg.workers)]

    def one(g):
        return _run_group(cfg, prior, sim, d, g, groups[g], cfg.init)

    if cfg.workers == 1:
        parts = [one(0)]
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(pool.map(one, range(cfg.workers)))

    thetas = [p[0].transpose(1, 0, 2).reshape(-1, prior.dim) for p in parts]
    theta = np.concatenate(thetas)
    x = None
    if cfg.algorithm == "d":
        x = np.concatenate([p[1].transpose(1, 0, 2).reshape(-1, sim.output_dim) for p in parts])
    n_keep = parts[0][0].shape[0]
    rates = np.concatenate([p[2] for p in parts])
    meta = {
        "algorithm": f"mcmc-{cfg.algorithm}",
        "total_proposals": cfg.n_steps * cfg.n_chains,
        "n_steps": cfg.n_steps,
        "burn_in": cfg.burn_in,
        "thin": cfg.thin,
        "n_chains": cfg.n_chains,
        "seed": cfg.seed,
        "workers": cfg.workers,
        "acceptance_rate_per_chain": rates.tolist(),
        "acceptance_rate": float(rates.mean()),
        "n_nonfinite": int(sum(p[3] for p in parts)),
        "chain": np.repeat(np.arange(cfg.n_chains), n_keep),
        "kernel": cfg.kernel.descriptor() if hasattr(cfg.kernel, "descriptor") else {},
    }
    return WeightedSample(theta, np.ones(len(theta)), x, labels=prior.labels, meta=meta)


# --------------------------------------------------------------------------
# Exact transition matrices for finite models
# --------------------------------------------------------------------------


def _mh_factor(prior_probs, Q):
    """``min(1, Q[t, s] pi(t) / (Q[s, t] pi(s)))`` for every pair ``(s, t)``."""
    num = Q.T * prior_probs[None, :]
    den = Q * prior_probs[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(den > 0, num / den, 0.0)
    return np.minimum(1.0, ratio)


def transition_matrix_c(prior_probs, likelihood, weights, Q, c) -> np.ndarray:
    """Parameter-space transition matrix with the simulated output summed out.

    ``likelihood[i, j] = P(x_j | theta_i)``, ``weights[j] = k(obs - x_j)``
    and ``Q[s, t]`` the proposal probability of ``s -> t``.
    """
    prior_probs, likelihood, weights, Q = map(np.asarray, (prior_probs, likelihood, weights, Q))
    accept_x = likelihood @ (weights / c)  # E[k(obs - X')/c | theta']
    P = Q * accept_x[None, :] * _mh_factor(prior_probs, Q)
    np.fill_diagonal(P, 0.0)
    np.fill_diagonal(P, 1.0 - P.sum(axis=1))
    return P


def stationary_c(prior_probs, likelihood, weights) -> np.ndarray:
    p = np.asarray(prior_probs) * (np.asarray(likelihood) @ np.asarray(weights))
    return p / p.sum()


def transition_matrix_d(prior_probs, likelihood, weights, Q):
    """Joint-space transition matrix over states ``(theta_i, x_j)`` with ``weights[j] > 0``.

    Returns ``(P, states)`` where ``states`` is the ``(n, 2)`` array of
    ``(i, j)`` index pairs labelling the rows of ``P``.
    """
    prior_probs, likelihood, weights, Q = map(np.asarray, (prior_probs, likelihood, weights, Q))
    states = np.array([(i, j) for i in range(len(prior_probs)) for j in range(len(weights)) if weights[j] > 0])
    si, sj = states[:, 0], states[:, 1]
    # target up to a constant, per state
    target_theta = prior_probs[si]
    w = weights[sj]
    P = np.zeros((len(states), len(states)))
    for a in range(len(states)):
        i, wa = si[a], w[a]
        prop = Q[i, si] * likelihood[si, sj]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = (w * Q[si, i] * target_theta) / (wa * Q[i, si] * target_theta[a])
        ratio = np.where(Q[i, si] > 0, ratio, 0.0)
        P[a] = prop * np.minimum(1.0, ratio)
    np.fill_diagonal(P, 0.0)
    np.fill_diagonal(P, 1.0 - P.sum(axis=1))
    return P, states


def stationary_d(prior_probs, likelihood, weights, states) -> np.ndarray:
    si, sj = states[:, 0], states[:, 1]
    p = np.asarray(prior_probs)[si] * np.asarray(likelihood)[si, sj] * np.asarray(weights)[sj]
    return p / p.sum()


def balance_violation(P, pi) -> float:
    """Largest relative gap ``|pi_s P_st - pi_t P_ts| / max(...)`` over pairs with flow."""
    flow = np.asarray(pi)[:, None] * np.asarray(P)
    back = flow.T
    scale = np.maximum(np.abs(flow), np.abs(back))
    mask = scale > 0
    if not mask.any():
        return 0.0
    return float(np.max(np.abs(flow - back)[mask] / scale[mask]))
