"""Rejection samplers: hard cutoff, probabilistic acceptance and weighting.

All three share one proposal loop.  Within a worker, each batch draws
``theta`` from the prior, then simulates, then draws the acceptance
uniforms, always in that order and always ``batch_size`` at a time, so a
run is fully determined by ``(seed, workers, batch_size)``.  Worker ``w``
uses the stream ``make_stream(seed, w)`` and results are concatenated in
worker order.

The acceptance rule is any object with ``log_weight(obs, x, theta)`` and
``log_c``: every :class:`~abcerr.kernels.DiscrepancyKernel` qualifies, as
does the binomial fossil-sampling rule in :mod:`abcerr.models`.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Optional

import numpy as np

from .core import DataVector, Prior, Simulator, SummaryFn, WeightedSample, make_stream, split_count, validate_pair
from .errors import InvalidBound, ZeroAcceptance

__all__ = [
    "RejectionConfig",
    "log_acceptance",
    "weights",
    "prepare_observation",
    "run_rejection",
    "run_algorithm_a",
    "run_weighted",
]

_BOUND_SLACK = 1e-12


@dataclass
class RejectionConfig:
    """Settings for one rejection or weighting run.

    Set exactly one of ``n_target`` (stop after that many acceptances) and
    ``n_proposals`` (make exactly that many proposals).
    """

    kernel: Any
    n_target: Optional[int] = None
    n_proposals: Optional[int] = None
    summary: Optional[SummaryFn] = None
    seed: int = 0
    workers: int = 1
    batch_size: int = 10_000
    max_proposals: Optional[int] = None
    keep_x: bool = True
    record_trace: bool = False

    def __post_init__(self):
        if (self.n_target is None) == (self.n_proposals is None):
            raise ValueError("set exactly one of n_target and n_proposals")
        for name in ("n_target", "n_proposals"):
            value = getattr(self, name)
            if value is not None and value < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")

    @property
    def budget(self) -> int:
        """Proposals allowed in a row without any acceptance."""
        if self.max_proposals is not None:
            return int(self.max_proposals)
        return max(10**6, 10**4 * (self.n_target or 1))


def log_acceptance(rule, obs: np.ndarray, x: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """``log(k(obs - X) / c)``, raising :class:`InvalidBound` if it exceeds 0."""
    lw = rule.log_weight(obs, x, theta)
    if np.any(lw > rule.log_c + _BOUND_SLACK):
        raise InvalidBound(
            f"acceptance weight {math.exp(float(np.max(lw)))} exceeds c={math.exp(rule.log_c)}"
        )
    return np.minimum(lw - rule.log_c, 0.0)


def weights(rule, obs: np.ndarray, x: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Linear-space ``k(obs - X)``; values below 1e-300 become 0."""
    if hasattr(rule, "weight"):
        return np.asarray(rule.weight(obs, x, theta), dtype=float)
    w = np.exp(rule.log_weight(obs, x, theta))
    return np.where(w < 1e-300, 0.0, w)


def prepare_observation(sim: Simulator, obs: DataVector, summary: Optional[SummaryFn]) -> DataVector:
    """Project ``obs`` if a summary is configured and check it against the simulator."""
    if summary is not None:
        obs = summary.apply(obs) if not obs.is_summary else obs
        template = DataVector(np.zeros(summary.out_dim), is_summary=True)
    else:
        template = DataVector(np.zeros(sim.output_dim), is_summary=sim.is_summary)
    validate_pair(obs, template)
    return obs


def _simulate(sim, summary, theta, rng):
    x = sim.simulate(theta, rng)
    return summary.apply(x) if summary is not None else x


def _worker(prior, sim, obs, cfg, decide, worker, n_target, n_proposals):
    """Run one worker's stream; ``decide(x, theta, u)`` returns accept flags."""
    rng = make_stream(cfg.seed, worker)
    thetas, xs, flags_all, dists = [], [], [], []
    accepted = 0
    total = 0
    since_accept = 0
    budget = cfg.budget
    while True:
        if n_proposals is not None:
            b = min(cfg.batch_size, n_proposals - total)
            if b <= 0:
                break
        else:
            if accepted >= n_target:
                break
            b = cfg.batch_size
        theta = prior.sample(rng, b)
        x = _simulate(sim, cfg.summary, theta, rng)
        u = rng.random(b)
        flags, extra = decide(x, theta, u)

        if n_target is not None and accepted + flags.sum() >= n_target:
            # stop right after the n_target-th acceptance
            cut = int(np.flatnonzero(flags)[n_target - accepted - 1]) + 1
            theta, x, flags, extra = theta[:cut], x[:cut], flags[:cut], extra[:cut]
            b = cut

        hits = np.flatnonzero(flags)
        if hits.size:
            since_accept = b - 1 - int(hits[-1])
        else:
            since_accept += b
        total += b
        accepted += hits.size
        thetas.append(theta[hits])
        if cfg.keep_x:
            xs.append(x[hits])
        if cfg.record_trace:
            flags_all.append(flags)
            dists.append(extra)
        if since_accept >= budget and (n_target is not None or accepted == 0):
            raise ZeroAcceptance(
                f"worker {worker}: {since_accept} consecutive proposals without an acceptance "
                f"({accepted} accepted of {total})"
            )

    out = {
        "theta": np.concatenate(thetas) if thetas else np.empty((0, prior.dim)),
        "x": np.concatenate(xs) if xs else None,
        "total": total,
    }
    if cfg.record_trace:
        out["trace_accepted"] = np.concatenate(flags_all) if flags_all else np.empty(0, bool)
        out["trace_value"] = np.concatenate(dists) if dists else np.empty(0)
    return out


def _run_workers(cfg, fn):
    if cfg.workers == 1:
        return [fn(0)]
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(fn, range(cfg.workers)))


def _sampling_run(prior, sim, obs, cfg, decide, algorithm):
    obs_vec = prepare_observation(sim, obs, cfg.summary)
    d = obs_vec.values
    targets = split_count(cfg.n_target, cfg.workers) if cfg.n_target is not None else [None] * cfg.workers
    props = split_count(cfg.n_proposals, cfg.workers) if cfg.n_proposals is not None else [None] * cfg.workers

    def one(w):
        if targets[w] == 0 or props[w] == 0:
            return {"theta": np.empty((0, prior.dim)), "x": None, "total": 0,
                    "trace_accepted": np.empty(0, bool), "trace_value": np.empty(0)}
        return _worker(prior, sim, d, cfg, lambda x, th, u: decide(d, x, th, u), w, targets[w], props[w])

    parts = _run_workers(cfg, one)
    theta = np.concatenate([p["theta"] for p in parts])
    x = None
    if cfg.keep_x:
        x = np.concatenate([p["x"] for p in parts if p["x"] is not None] or [np.empty((0, d.size))])
    total = int(sum(p["total"] for p in parts))
    if len(theta) == 0:
        raise ZeroAcceptance(f"no acceptances in {total} proposals")
    meta = {
        "algorithm": algorithm,
        "total_proposals": total,
        "proposals_per_worker": [int(p["total"]) for p in parts],
        "n_accepted": int(len(theta)),
        "acceptance_rate": len(theta) / total,
        "seed": cfg.seed,
        "workers": cfg.workers,
        "batch_size": cfg.batch_size,
        "kernel": _describe(cfg.kernel),
    }
    if cfg.record_trace:
        meta["trace"] = {
            "accepted": np.concatenate([p["trace_accepted"] for p in parts]),
            "value": np.concatenate([p["trace_value"] for p in parts]),
        }
    return WeightedSample(theta, np.ones(len(theta)), x, labels=prior.labels, meta=meta)


def _describe(rule) -> dict:
    return rule.descriptor() if hasattr(rule, "descriptor") else {"family": type(rule).__name__}


def run_rejection(prior: Prior, sim: Simulator, obs: DataVector, cfg: RejectionConfig) -> WeightedSample:
    """Probabilistic rejection: accept ``theta`` with probability ``k(obs - X) / c``.

    Accepted parameters are exact posterior draws for the model in which the
    observation is the simulator output plus an independent error with the
    kernel's density.  With a :class:`~abcerr.kernels.UniformBall` kernel the
    acceptance probability is the 0-1 indicator, so this is the classic
    hard-cutoff sampler.

    The trace (``record_trace=True``) stores, per proposal, the accept flag
    and the log acceptance probability.

    Raises
    ------
    ZeroAcceptance
        No acceptance within ``cfg.budget`` consecutive proposals (or none at
        all in ``n_proposals`` mode).
    InvalidBound
        The kernel density exceeded ``c``.
    """

    def decide(d, x, theta, u):
        la = log_acceptance(cfg.kernel, d, x, theta)
        return u < np.exp(la), la

    return _sampling_run(prior, sim, obs, cfg, decide, "rejection")


def run_algorithm_a(prior: Prior, sim: Simulator, obs: DataVector, cfg: RejectionConfig) -> WeightedSample:
    """Hard cutoff ``metric(obs - x) <= delta`` using the kernel's metric and delta.

    The acceptance uniforms are still drawn (and ignored) so that a run with
    the same seed sees exactly the same proposals as :func:`run_rejection`.
    The trace value is the distance.
    """
    kernel = cfg.kernel
    if not hasattr(kernel, "metric") or not hasattr(kernel, "delta"):
        raise TypeError("the hard cutoff needs a radial kernel with a metric and delta")

    def decide(d, x, theta, u):
        r = kernel.metric(d - x)
        return r <= kernel.delta, r

    return _sampling_run(prior, sim, obs, cfg, decide, "algorithm_a")


def run_weighted(prior: Prior, sim: Simulator, obs: DataVector, cfg: RejectionConfig) -> WeightedSample:
    """Keep every proposal with weight ``k(obs - X_i)``; nothing is rejected."""
    if cfg.n_proposals is None:
        raise ValueError("run_weighted needs n_proposals")
    obs_vec = prepare_observation(sim, obs, cfg.summary)
    d = obs_vec.values
    shares = split_count(cfg.n_proposals, cfg.workers)

    def one(w):
        rng = make_stream(cfg.seed, w)
        thetas, xs, lws = [], [], []
        done = 0
        while done < shares[w]:
            b = min(cfg.batch_size, shares[w] - done)
            theta = prior.sample(rng, b)
            x = _simulate(sim, cfg.summary, theta, rng)
            thetas.append(theta)
            xs.append(x)
            lws.append(weights(cfg.kernel, d, x, theta))
            done += b
        return thetas, xs, lws

    parts = _run_workers(cfg, one)
    theta = np.concatenate([t for p in parts for t in p[0]])
    x = np.concatenate([t for p in parts for t in p[1]]) if cfg.keep_x else None
    w = np.concatenate([t for p in parts for t in p[2]])
    meta = {
        "algorithm": "weighted",
        "total_proposals": int(cfg.n_proposals),
        "seed": cfg.seed,
        "workers": cfg.workers,
        "batch_size": cfg.batch_size,
        "kernel": _describe(cfg.kernel),
    }
    sample = WeightedSample(theta, w, x, labels=prior.labels, meta=meta)
    sample.meta["effective_sample_size"] = sample.effective_sample_size()
    return sample
