"""Built-in simulators and their analytic or enumerable oracles.

* ``toy``: normal mixture ``0.5 N(theta, 1) + 0.5 N(theta, 0.01)`` with a
  uniform prior on ``[-10, 10]`` and an observation of 0; both error models
  have closed form posteriors.
* ``fossil``: birth-death tree observed through binomial fossil sampling,
  where the sampling step can be done exactly in the acceptance rule.
* ``pritchard``: three-summary synthetic stand-in around
  ``(V, H, N) = (1.149, 0.6358, 316)``.
* ``discrete``: finite parameter grid and output alphabet, small enough to
  enumerate every posterior and transition probability.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, NamedTuple, Optional

import numpy as np
from scipy import stats
from scipy.special import ndtr

from .core import DataVector, DiscretePrior, Prior, Simulator, UniformPrior
from .kernels import max_relative_error_metric

__all__ = [
    "Model",
    "MixtureSimulator",
    "toy_model",
    "toy_posterior_uniform_error",
    "toy_posterior_gaussian_error",
    "ToyPosterior",
    "FossilCounts",
    "simulate_fossil_counts",
    "simulate_fossil_batch",
    "fossil_acceptance_prob",
    "FossilSampling",
    "FossilSimulator",
    "fossil_model",
    "PRITCHARD_OBS",
    "PritchardSimulator",
    "pritchard_model",
    "pritchard_model_simulate",
    "relative_error_box",
    "DiscreteOracleModel",
    "MODELS",
    "make_model",
]


@dataclass
class Model:
    """A prior, a simulator and an observation, plus an optional custom acceptance rule."""

    name: str
    prior: Prior
    simulator: Simulator
    obs: DataVector
    rule: Any = None
    params: dict = field(default_factory=dict)


# --------------------------------------------------------------------------
# Normal mixture toy
# --------------------------------------------------------------------------

TOY_BOUNDS = (-10.0, 10.0)


class MixtureSimulator(Simulator):
    """``X ~ 0.5 N(theta, 1) + 0.5 N(theta, 1/100)``."""

    output_dim = 1

    def simulate(self, theta, rng):
        theta = np.atleast_2d(theta)
        n = len(theta)
        wide = rng.random(n) < 0.5
        z = rng.standard_normal(n)
        return theta + np.where(wide, 1.0, 0.1)[:, None] * z[:, None]


def toy_model(**params) -> Model:
    prior = UniformPrior([TOY_BOUNDS[0]], [TOY_BOUNDS[1]], labels=("theta",))
    return Model("toy", prior, MixtureSimulator(), DataVector([0.0]), params=params)


def _in_toy_support(theta):
    return (theta >= TOY_BOUNDS[0]) & (theta <= TOY_BOUNDS[1])


def toy_posterior_uniform_error(theta, delta):
    """Unnormalized posterior under ``U[-delta, delta]`` error, i.e. ``P(|X| <= delta | theta)``."""
    theta = np.asarray(theta, dtype=float)
    p = 0.5 * (ndtr(delta - theta) - ndtr(-delta - theta)) + 0.5 * (
        ndtr(10 * (delta - theta)) - ndtr(10 * (-delta - theta))
    )
    return np.where(_in_toy_support(theta), p, 0.0)


def toy_posterior_gaussian_error(theta, delta):
    """Unnormalized posterior under ``N(0, delta^2/3)`` error, truncated to the prior."""
    theta = np.asarray(theta, dtype=float)
    s2 = delta**2 / 3.0
    p = 0.5 * stats.norm.pdf(theta, 0.0, np.sqrt(1 + s2)) + 0.5 * stats.norm.pdf(
        theta, 0.0, np.sqrt(0.01 + s2)
    )
    return np.where(_in_toy_support(theta), p, 0.0)


def _psi(x):
    # antiderivative of the standard normal CDF
    return x * ndtr(x) + stats.norm.pdf(x)


class ToyPosterior:
    """Normalized toy posterior with closed-form pdf and CDF.

    ``kind`` is ``"uniform"`` or ``"gaussian"``, naming the error model.
    """

    def __init__(self, kind: str, delta: float):
        if kind not in ("uniform", "gaussian"):
            raise ValueError(f"unknown toy error model {kind!r}")
        self.kind = kind
        self.delta = float(delta)
        lo, hi = TOY_BOUNDS
        self._lo_mass = self._antiderivative(lo)
        self.normalizer = float(self._antiderivative(hi) - self._lo_mass)

    def _antiderivative(self, theta):
        d = self.delta
        theta = np.asarray(theta, dtype=float)
        if self.kind == "uniform":
            return 0.5 * (_psi(-d - theta) - _psi(d - theta)) + 0.05 * (
                _psi(10 * (-d - theta)) - _psi(10 * (d - theta))
            )
        s2 = d**2 / 3.0
        return 0.5 * stats.norm.cdf(theta, 0, np.sqrt(1 + s2)) + 0.5 * stats.norm.cdf(
            theta, 0, np.sqrt(0.01 + s2)
        )

    def unnormalized(self, theta):
        fn = toy_posterior_uniform_error if self.kind == "uniform" else toy_posterior_gaussian_error
        return fn(theta, self.delta)

    def pdf(self, theta):
        return self.unnormalized(theta) / self.normalizer

    def cdf(self, theta):
        theta = np.clip(np.asarray(theta, dtype=float), *TOY_BOUNDS)
        return np.clip((self._antiderivative(theta) - self._lo_mass) / self.normalizer, 0.0, 1.0)

    def moment(self, power: int) -> float:
        from scipy.integrate import quad

        val, _ = quad(lambda t: t**power * float(self.pdf(t)), *TOY_BOUNDS, points=[0.0], limit=200)
        return val


# --------------------------------------------------------------------------
# Fossil branching process
# --------------------------------------------------------------------------


class FossilCounts(NamedTuple):
    counts: np.ndarray
    extant: np.ndarray
    extinct: np.ndarray


def _per_epoch(rate, n, k):
    """Broadcast a rate to ``(n, k + 1)``: scalar, per tree ``(n,)``, per epoch ``(k,)`` or ``(n, k)``."""
    rate = np.asarray(rate, dtype=float)
    if rate.ndim == 1 and rate.size == n:
        rate = rate[:, None]
    rate = np.broadcast_to(rate, (n, k))
    # the stretch older than the last boundary uses the oldest epoch's rate
    return np.hstack([rate, rate[:, -1:]])


def simulate_fossil_batch(lam, tau, epochs, rng, mu=0.0, size: Optional[int] = None) -> FossilCounts:
    """Simulate many birth-death trees at once.

    Parameters
    ----------
    lam, mu : float or array
        Speciation and extinction rates.  Scalars, one value per tree
        ``(n,)``, one value per epoch ``(k,)`` or ``(n, k)``.
    tau : float or array
        Age of the root (time before present), ``> 0``.
    epochs : sequence of float
        Increasing epoch boundaries ``a_1 < ... < a_k`` as ages; epoch ``i``
        covers ages ``[a_{i-1}, a_i)`` with ``a_0 = 0``.  Time older than
        ``a_k`` belongs to no epoch.
    size : int, optional
        Number of trees when every other argument is scalar.

    Returns
    -------
    FossilCounts
        ``counts[j, i]`` is the number of lineages alive at any point during
        epoch ``i`` of tree ``j``; ``extant`` the number alive at age 0;
        ``extinct`` flags trees that died out.
    """
    bounds = np.asarray(epochs, dtype=float)
    if bounds.ndim != 1 or bounds.size == 0 or np.any(bounds <= 0) or np.any(np.diff(bounds) <= 0):
        raise ValueError("epochs must be increasing positive ages")
    k = bounds.size
    tau = np.asarray(tau, dtype=float)
    n = int(size) if size is not None else tau.size
    tau = np.broadcast_to(tau, (n,)).astype(float)
    if np.any(tau <= 0):
        raise ValueError("tau must be positive")
    birth = _per_epoch(lam, n, k)
    death = _per_epoch(mu, n, k)
    if np.any(birth < 0) or np.any(death < 0):
        raise ValueError("rates must be nonnegative")

    lower = np.concatenate([[0.0], bounds])  # lower age edge of segment s
    age = tau.copy()
    seg = np.searchsorted(bounds, age, side="right")
    alive = np.ones(n, dtype=np.int64)
    counts = np.zeros((n, k + 1), dtype=np.int64)
    counts[np.arange(n), seg] += 1
    active = np.ones(n, dtype=bool)
    rows = np.arange(n)

    while active.any():
        idx = rows[active]
        s = seg[idx]
        b, d = birth[idx, s], death[idx, s]
        total = (b + d) * alive[idx]
        with np.errstate(divide="ignore"):
            dt = rng.standard_exponential(idx.size) / total
        u = rng.random(idx.size)
        edge = lower[s]
        cross = age[idx] - dt <= edge

        c_idx = idx[cross]
        age[c_idx] = edge[cross]
        at_present = seg[c_idx] == 0
        active[c_idx[at_present]] = False
        moved = c_idx[~at_present]
        seg[moved] -= 1
        counts[moved, seg[moved]] += alive[moved]

        e_idx = idx[~cross]
        age[e_idx] -= dt[~cross]
        is_birth = u[~cross] * (b[~cross] + d[~cross]) < b[~cross]
        born = e_idx[is_birth]
        alive[born] += 1
        counts[born, seg[born]] += 1
        died = e_idx[~is_birth]
        alive[died] -= 1
        active[died[alive[died] == 0]] = False

    return FossilCounts(counts[:, :k].astype(float), alive.astype(float), alive == 0)


def simulate_fossil_counts(lam, tau, epochs, rng, mu=0.0) -> FossilCounts:
    """One tree; see :func:`simulate_fossil_batch`.  Extinction is reported, not raised."""
    out = simulate_fossil_batch(lam, tau, epochs, rng, mu=mu, size=1)
    return FossilCounts(out.counts[0], out.extant[0], bool(out.extinct[0]))


def fossil_acceptance_prob(N, D, alpha):
    """``prod_i Binomial(D_i; N_i, alpha)``, zero whenever some ``D_i > N_i``.

    ``N`` and ``D`` share a trailing epoch axis; ``alpha`` is a scalar or has
    the shape of the leading axes.
    """
    N, D = np.asarray(N, dtype=float), np.asarray(D, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if np.any((alpha < 0) | (alpha > 1)):
        raise ValueError("alpha must lie in [0, 1]")
    logp = stats.binom.logpmf(D, N, alpha[..., None])
    return np.exp(np.sum(logp, axis=-1))


class FossilSampling:
    """Acceptance rule that applies the binomial fossil sampling exactly.

    Reads ``alpha`` from column ``alpha_index`` of ``theta`` (or uses the
    fixed ``alpha``).  The bound is ``c = 1``.
    """

    log_c = 0.0

    def __init__(self, alpha_index: Optional[int] = 2, alpha: Optional[float] = None):
        self.alpha_index = alpha_index
        self.alpha = alpha

    def log_weight(self, obs, x, theta):
        alpha = np.full(len(x), self.alpha) if self.alpha is not None else theta[:, self.alpha_index]
        return np.sum(stats.binom.logpmf(obs[None, :], x, alpha[:, None]), axis=1)

    def descriptor(self):
        return {"family": "fossil_binomial", "alpha": self.alpha, "alpha_index": self.alpha_index}


class FossilSimulator(Simulator):
    """Per-epoch lineage counts ``N`` for ``theta = (lambda, tau, ...)``."""

    integral = True

    def __init__(self, epochs, mu=0.0):
        self.epochs = tuple(float(e) for e in epochs)
        self.mu = mu
        self.output_dim = len(self.epochs)

    def simulate(self, theta, rng):
        theta = np.atleast_2d(theta)
        return simulate_fossil_batch(theta[:, 0], theta[:, 1], self.epochs, rng, mu=self.mu,
                                     size=len(theta)).counts


def fossil_model(epochs=(0.5, 2.0), counts=(2, 1), lam=(0.5, 1.0), tau=(1.0, 1.8), alpha=(0.3, 0.6),
                 mu=0.0, **_) -> Model:
    """Miniature fossil study on a discrete ``(lambda, tau, alpha)`` grid prior."""
    grid = np.array([(a, b, c) for a in lam for b in tau for c in alpha], dtype=float)
    prior = DiscretePrior(grid, labels=("lambda", "tau", "alpha"))
    sim = FossilSimulator(epochs, mu=mu)
    obs = DataVector.from_counts(counts)
    params = {"epochs": list(epochs), "counts": list(counts), "lam": list(lam), "tau": list(tau),
              "alpha": list(alpha), "mu": mu}
    return Model("fossil", prior, sim, obs, rule=FossilSampling(alpha_index=2), params=params)


# --------------------------------------------------------------------------
# Three-summary demographic stand-in
# --------------------------------------------------------------------------

PRITCHARD_OBS = (1.149, 0.6358, 316.0)


class PritchardSimulator(Simulator):
    """Synthetic ``(V, H, N)`` around location parameters ``theta = (v, h, n)``.

    ``V`` is gamma with mean ``v``, ``H`` beta with mean ``h`` and ``N``
    Poisson with mean ``n``; the shape constants set the spread.
    """

    output_dim = 3

    def __init__(self, v_shape=100.0, h_concentration=400.0):
        self.v_shape = v_shape
        self.h_concentration = h_concentration

    def simulate(self, theta, rng):
        theta = np.atleast_2d(theta)
        v = theta[:, 0] * rng.gamma(self.v_shape, 1.0 / self.v_shape, len(theta))
        kappa = self.h_concentration
        h = rng.beta(theta[:, 1] * kappa, (1 - theta[:, 1]) * kappa)
        n = rng.poisson(theta[:, 2]).astype(float)
        return np.column_stack([v, h, n])


def pritchard_model(v_shape=100.0, h_concentration=400.0, **_) -> Model:
    prior = UniformPrior([0.5, 0.3, 200.0], [2.0, 0.9, 450.0], labels=("v", "h", "n"))
    sim = PritchardSimulator(v_shape, h_concentration)
    return Model("pritchard", prior, sim, DataVector(PRITCHARD_OBS),
                 params={"v_shape": v_shape, "h_concentration": h_concentration})


def pritchard_model_simulate(theta, rng, simulator: Optional[PritchardSimulator] = None) -> DataVector:
    sim = simulator or PritchardSimulator()
    return sim.run(theta, rng)


def relative_error_box(obs, delta: float, tol: float = 1e-13) -> list:
    """Per-coordinate acceptance interval of ``max_relative_error_metric <= delta``.

    Each interval is found by bisection on the metric along one axis with
    the other coordinates held at the observation.
    """
    d = np.asarray(getattr(obs, "values", obs), dtype=float)
    box = []
    for i in range(d.size):
        ends = []
        for sign in (-1.0, 1.0):
            inside, outside = d[i], d[i] + sign * 2 * abs(d[i]) * (delta + 1)
            while abs(outside - inside) > tol * max(1.0, abs(d[i])):
                mid = 0.5 * (inside + outside)
                x = d.copy()
                x[i] = mid
                if max_relative_error_metric(d, x) <= delta:
                    inside = mid
                else:
                    outside = mid
            ends.append(inside)
        box.append((min(ends), max(ends)))
    return box


# --------------------------------------------------------------------------
# Finite oracle model
# --------------------------------------------------------------------------


class _TableSimulator(Simulator):
    def __init__(self, model: "DiscreteOracleModel"):
        self.model = model
        self.output_dim = 1
        self._cdf = np.cumsum(model.transition, axis=1)
        self._cdf[:, -1] = 1.0

    def simulate(self, theta, rng):
        idx = self.model.prior.index_of(theta)
        if np.any(idx < 0):
            raise ValueError("discrete model simulated off its parameter grid")
        u = rng.random(len(idx))
        j = (u[:, None] >= self._cdf[idx]).sum(axis=1)
        return self.model.alphabet[j][:, None]


class DiscreteOracleModel:
    """Finite grid of parameters, finite output alphabet, explicit likelihood table.

    ``transition[i, j]`` is ``P(X = alphabet[j] | theta = theta_grid[i])``.
    """

    def __init__(self, theta_grid, alphabet, transition, prior_weights=None, obs=None):
        self.theta_grid = np.asarray(theta_grid, dtype=float)
        self.alphabet = np.asarray(alphabet, dtype=float)
        self.transition = np.asarray(transition, dtype=float)
        if self.transition.shape != (self.theta_grid.size, self.alphabet.size):
            raise ValueError("transition table must be (len(theta_grid), len(alphabet))")
        if np.any(self.transition < 0) or np.any(np.abs(self.transition.sum(axis=1) - 1) > 1e-12):
            raise ValueError("each transition row must be a probability vector")
        self.prior = DiscretePrior(self.theta_grid, prior_weights, labels=("theta",))
        self.simulator = _TableSimulator(self)
        self.obs = DataVector([self.alphabet[len(self.alphabet) // 2]] if obs is None else np.atleast_1d(obs))

    @classmethod
    def default(cls, seed: int = 20090101, n_theta: int = 5, n_out: int = 8) -> "DiscreteOracleModel":
        rng = np.random.default_rng(seed)
        table = rng.dirichlet(np.ones(n_out), size=n_theta)
        table /= table.sum(axis=1, keepdims=True)
        weights = rng.dirichlet(2 * np.ones(n_theta))
        return cls(np.arange(n_theta, dtype=float), np.arange(n_out, dtype=float), table, weights)

    @property
    def prior_probs(self) -> np.ndarray:
        return np.array(self.prior.probs)

    def kernel_weights(self, kernel, obs=None) -> np.ndarray:
        """``k(obs - x)`` for every output ``x`` in the alphabet."""
        obs = self.obs if obs is None else obs
        d = np.asarray(getattr(obs, "values", obs), dtype=float)
        return kernel.density(d[None, :] - self.alphabet[:, None])

    def joint_posterior(self, kernel, obs=None) -> np.ndarray:
        """Enumerated ``p(theta, x | obs)`` as a ``(n_theta, n_out)`` table."""
        w = self.kernel_weights(kernel, obs)
        joint = self.prior_probs[:, None] * self.transition * w[None, :]
        return joint / joint.sum()

    def posterior(self, kernel, obs=None) -> np.ndarray:
        return self.joint_posterior(kernel, obs).sum(axis=1)

    def evidence(self, kernel, obs=None) -> float:
        w = self.kernel_weights(kernel, obs)
        return float(self.prior_probs @ (self.transition @ w))

    def as_model(self) -> Model:
        return Model("discrete", self.prior, self.simulator, self.obs)


def discrete_model(seed=20090101, n_theta=5, n_out=8, **_) -> Model:
    model = DiscreteOracleModel.default(seed=seed, n_theta=n_theta, n_out=n_out).as_model()
    model.params = {"seed": seed, "n_theta": n_theta, "n_out": n_out}
    return model


MODELS = {"toy": toy_model, "fossil": fossil_model, "pritchard": pritchard_model, "discrete": discrete_model}


def make_model(name: str, **params) -> Model:
    if name not in MODELS:
        raise KeyError(f"unknown model {name!r}; registered: {sorted(MODELS)}")
    return MODELS[name](**params)
