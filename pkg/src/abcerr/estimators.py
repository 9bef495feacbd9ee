"""Posterior expectations from weighted samples, and evidence estimates.

The evidence estimator is the nested average

    (1/n) sum_i (1/m) sum_j k(obs - X_i^j),   theta_i ~ prior, X_i^j ~ model(theta_i)

whose standard error is taken over the ``n`` per-parameter inner means.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable, NamedTuple

import numpy as np

from .core import WeightedSample, make_stream, split_count
from .errors import AllWeightsZero, ZeroDenominator
from .rejection import prepare_observation, weights

__all__ = [
    "weighted_expectation",
    "weighted_standard_error",
    "effective_sample_size",
    "EvidenceEstimate",
    "estimate_evidence",
    "BayesFactor",
    "bayes_factor",
]


def _weighted_values(sample: WeightedSample, f: Callable, on: str = "theta"):
    w = np.asarray(sample.weights, dtype=float)
    total = w.sum()
    if not total > 0:
        raise AllWeightsZero("all weights are zero; the sample carries no posterior mass")
    if on == "theta":
        vals = f(sample.theta)
    elif on in ("x", "both"):
        if sample.x is None:
            raise ValueError("the sample does not carry simulated outputs")
        vals = f(sample.x) if on == "x" else f(sample.theta, sample.x)
    else:
        raise ValueError(f"on must be 'theta', 'x' or 'both', got {on!r}")
    vals = np.asarray(vals, dtype=float)
    if vals.ndim == 0:
        vals = np.full(len(w), float(vals))
    return w, total, vals


def weighted_expectation(sample: WeightedSample, f: Callable, on: str = "theta"):
    """Self-normalized estimate ``sum f(theta_i) w_i / sum w_i``.

    ``f`` is applied once to the whole ``(n, p)`` parameter array and must
    return ``(n,)`` or ``(n, k)``.  The result is a float or a length-``k``
    array accordingly.  With ``on="x"`` it receives the stored simulated
    outputs instead, and with ``on="both"`` it is called as ``f(theta, x)``.
    """
    w, total, vals = _weighted_values(sample, f, on)
    est = np.tensordot(w, vals, axes=(0, 0)) / total
    return float(est) if np.ndim(est) == 0 else est


def weighted_standard_error(sample: WeightedSample, f: Callable, on: str = "theta"):
    """Delta-method standard error of :func:`weighted_expectation`.

    ``sqrt(sum w_i^2 (f_i - mu)^2) / sum w_i``; for unit weights this is the
    usual ``s / sqrt(n)`` up to the ``n - 1`` correction.
    """
    w, total, vals = _weighted_values(sample, f, on)
    mu = np.tensordot(w, vals, axes=(0, 0)) / total
    resid = vals - mu
    se = np.sqrt(np.tensordot(w**2, resid**2, axes=(0, 0))) / total
    return float(se) if np.ndim(se) == 0 else se


def effective_sample_size(sample: WeightedSample) -> float:
    return sample.effective_sample_size()


@dataclass(frozen=True)
class EvidenceEstimate:
    value: float
    std_error: float
    n: int
    m: int
    seed: int = 0
    kernel: dict = None

    def __post_init__(self):
        if self.value < 0 or self.std_error < 0:
            raise ValueError("evidence estimates and their errors are nonnegative")

    def to_dict(self) -> dict:
        return asdict(self)


def estimate_evidence(prior, sim, obs, kernel, n: int, m: int, seed: int = 0,
                      workers: int = 1, batch_size: int = 10_000) -> EvidenceEstimate:
    """Nested Monte Carlo estimate of the evidence under the error model.

    Worker ``w`` handles its share of the ``n`` outer draws with stream
    ``make_stream(seed, w)``.  Each batch draws its parameters, then all
    ``m`` simulations for every parameter in the batch (parameter-major).
    The standard error is ``inf`` when ``n == 1``.
    """
    if n < 1 or m < 1:
        raise ValueError("n and m must be at least 1")
    d = prepare_observation(sim, obs, None).values
    shares = split_count(n, workers)

    def one(w):
        rng = make_stream(seed, w)
        means = []
        done = 0
        outer = max(1, batch_size // m)
        while done < shares[w]:
            b = min(outer, shares[w] - done)
            theta = prior.sample(rng, b)
            reps = np.repeat(theta, m, axis=0)
            x = sim.simulate(reps, rng)
            dens = weights(kernel, d, x, reps)
            means.append(dens.reshape(b, m).mean(axis=1))
            done += b
        return np.concatenate(means) if means else np.empty(0)

    if workers == 1:
        parts = [one(0)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(one, range(workers)))
    inner = np.concatenate(parts)
    value = float(inner.mean())
    se = float(inner.std(ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    desc = kernel.descriptor() if hasattr(kernel, "descriptor") else {}
    return EvidenceEstimate(value, se, int(n), int(m), seed, desc)


class BayesFactor(NamedTuple):
    value: float
    std_error: float


def bayes_factor(e1: EvidenceEstimate, e2: EvidenceEstimate) -> BayesFactor:
    """Ratio ``e1 / e2`` with a first-order (delta-method) standard error.

    The two estimates are treated as independent.
    """
    if not e2.value > 0:
        raise ZeroDenominator("the denominator evidence is zero")
    ratio = e1.value / e2.value
    rel2 = (e2.std_error / e2.value) ** 2
    if e1.value > 0:
        se = abs(ratio) * math.sqrt((e1.std_error / e1.value) ** 2 + rel2)
    else:
        se = e1.std_error / e2.value
    return BayesFactor(ratio, se)
