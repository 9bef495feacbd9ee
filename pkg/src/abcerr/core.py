"""Domain types shared by every sampler.

Parameters and data are plain numpy arrays inside the samplers; the small
dataclasses here exist at the boundaries, where an observation or a single
parameter point needs to carry its metadata.  Batched callables always take
a leading sample axis: ``theta`` is ``(n, p)`` and simulator output is
``(n, d)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DimensionMismatch

__all__ = [
    "ParamVector",
    "DataVector",
    "validate_pair",
    "difference",
    "make_stream",
    "split_count",
    "Prior",
    "UniformPrior",
    "DiscretePrior",
    "Simulator",
    "FunctionSimulator",
    "SummaryFn",
    "identity_summary",
    "ProposalKernel",
    "GaussianRandomWalk",
    "GridRandomWalk",
    "IndependentGridProposal",
    "WeightedSample",
]


def _frozen(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ParamVector:
    values: np.ndarray
    labels: tuple = ()

    def __post_init__(self):
        values = _frozen(np.atleast_1d(self.values))
        if values.ndim != 1:
            raise ValueError("ParamVector must be one-dimensional")
        if not np.all(np.isfinite(values)):
            raise ValueError("ParamVector components must be finite")
        labels = tuple(self.labels) or tuple(f"theta_{i}" for i in range(values.size))
        if len(labels) != values.size:
            raise ValueError(f"{len(labels)} labels for {values.size} components")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)

    @property
    def dim(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class DataVector:
    """An observation or one simulator output.

    Counts are stored as reals; ``integral=True`` asserts on construction
    that every component is a whole number.
    """

    values: np.ndarray
    is_summary: bool = False
    integral: bool = False

    def __post_init__(self):
        values = _frozen(np.atleast_1d(self.values))
        if values.ndim != 1:
            raise ValueError("DataVector must be one-dimensional")
        if not np.all(np.isfinite(values)):
            raise ValueError("DataVector components must be finite")
        if self.integral and not np.all(values == np.round(values)):
            raise ValueError(f"integral DataVector has non-integer components: {values}")
        object.__setattr__(self, "values", values)

    @property
    def dim(self) -> int:
        return self.values.size

    @classmethod
    def from_counts(cls, counts, is_summary=False) -> "DataVector":
        return cls(np.asarray(counts, dtype=float), is_summary=is_summary, integral=True)


def validate_pair(d: DataVector, x: DataVector) -> None:
    """Raise :class:`DimensionMismatch` unless ``d`` and ``x`` are comparable."""
    if d.dim != x.dim:
        raise DimensionMismatch(f"observation has dimension {d.dim}, simulator output {x.dim}")
    if d.is_summary != x.is_summary:
        raise DimensionMismatch(
            "observation and simulator output disagree on summary projection "
            f"(is_summary={d.is_summary} vs {x.is_summary})"
        )


def difference(d: DataVector, x: DataVector) -> DataVector:
    validate_pair(d, x)
    return DataVector(d.values - x.values, is_summary=d.is_summary)


def make_stream(seed: int, *index: int) -> np.random.Generator:
    """Private random stream for worker/chain ``index`` of a run seeded ``seed``.

    The stream is ``default_rng(SeedSequence([seed, *index]))`` so any stream
    can be recreated from the base seed and its index alone.
    """
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, index)]))


def split_count(n: int, parts: int) -> list:
    """Split ``n`` into ``parts`` near-equal shares, larger shares first."""
    base, extra = divmod(int(n), int(parts))
    return [base + (i < extra) for i in range(parts)]


# --------------------------------------------------------------------------
# Priors
# --------------------------------------------------------------------------


class Prior:
    """Base prior.  Subclasses set ``low``/``high`` and implement the hooks."""

    labels: tuple
    low: np.ndarray
    high: np.ndarray

    @property
    def dim(self) -> int:
        return self.low.size

    @property
    def support(self) -> tuple:
        return self.low, self.high

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError

    def log_density(self, theta) -> np.ndarray:
        raise NotImplementedError

    def in_support(self, theta) -> np.ndarray:
        theta = np.atleast_2d(theta)
        return np.all((theta >= self.low) & (theta <= self.high), axis=1)


class UniformPrior(Prior):
    """Independent uniform components on the box ``[low, high]``."""

    def __init__(self, low, high, labels: Sequence[str] = ()):
        self.low = _frozen(np.atleast_1d(low))
        self.high = _frozen(np.atleast_1d(high))
        if self.low.shape != self.high.shape or np.any(self.high <= self.low):
            raise ValueError("UniformPrior needs matching bounds with high > low")
        if not (np.all(np.isfinite(self.low)) and np.all(np.isfinite(self.high))):
            raise ValueError("UniformPrior bounds must be finite")
        self.labels = tuple(labels) or tuple(f"theta_{i}" for i in range(self.low.size))
        self._log_norm = -float(np.sum(np.log(self.high - self.low)))

    def sample(self, rng, n):
        return self.low + (self.high - self.low) * rng.random((n, self.dim))

    def log_density(self, theta):
        inside = self.in_support(theta)
        return np.where(inside, self._log_norm, -np.inf)

    def __repr__(self):
        return f"UniformPrior(low={self.low.tolist()}, high={self.high.tolist()})"


class DiscretePrior(Prior):
    """Prior on a finite set of parameter points.

    ``points`` is ``(k, p)``; a point that is not exactly on the grid has
    zero prior mass.
    """

    def __init__(self, points, weights=None, labels: Sequence[str] = ()):
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            points = points[:, None]
        if weights is None:
            weights = np.ones(len(points))
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (len(points),) or np.any(weights < 0) or weights.sum() <= 0:
            raise ValueError("DiscretePrior weights must be nonnegative, one per point")
        self.points = _frozen(points)
        self.probs = _frozen(weights / weights.sum())
        self.low = _frozen(points.min(axis=0))
        self.high = _frozen(points.max(axis=0))
        self.labels = tuple(labels) or tuple(f"theta_{i}" for i in range(points.shape[1]))
        self._cdf = np.cumsum(self.probs)
        self._cdf[-1] = 1.0

    def index_of(self, theta) -> np.ndarray:
        """Grid index of each row of ``theta``; ``-1`` for off-grid rows."""
        theta = np.atleast_2d(theta)
        hit = np.all(theta[:, None, :] == self.points[None, :, :], axis=2)
        return np.where(hit.any(axis=1), hit.argmax(axis=1), -1)

    def sample_index(self, rng, n):
        return np.searchsorted(self._cdf, rng.random(n), side="right")

    def sample(self, rng, n):
        return self.points[self.sample_index(rng, n)]

    def log_density(self, theta):
        idx = self.index_of(theta)
        with np.errstate(divide="ignore"):
            logp = np.log(self.probs)
        return np.where(idx >= 0, logp[np.maximum(idx, 0)], -np.inf)

    def in_support(self, theta):
        return self.log_density(theta) > -np.inf

    def __repr__(self):
        return f"DiscretePrior({len(self.points)} points)"


# --------------------------------------------------------------------------
# Simulators and summaries
# --------------------------------------------------------------------------


class Simulator:
    """Stochastic map ``theta -> X``, batched over rows of ``theta``.

    Implementations must draw all randomness from the ``rng`` they are
    handed, so that a fixed stream state gives a fixed output.
    """

    output_dim: int = 1
    is_summary: bool = False
    integral: bool = False

    def simulate(self, theta: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def run(self, theta, rng) -> DataVector:
        """Simulate a single output as a :class:`DataVector`."""
        x = self.simulate(np.atleast_2d(theta), rng)[0]
        return DataVector(x, is_summary=self.is_summary, integral=self.integral)


class FunctionSimulator(Simulator):
    def __init__(self, fn: Callable, output_dim: int, integral: bool = False):
        self.fn = fn
        self.output_dim = int(output_dim)
        self.integral = integral

    def simulate(self, theta, rng):
        return np.asarray(self.fn(np.atleast_2d(theta), rng), dtype=float).reshape(
            len(np.atleast_2d(theta)), self.output_dim
        )


@dataclass(frozen=True)
class SummaryFn:
    """Deterministic projection ``S`` applied row-wise to simulator output."""

    fn: Callable
    out_dim: int
    name: str = "summary"

    def apply(self, x):
        if isinstance(x, DataVector):
            out = np.asarray(self.fn(x.values[None, :]), dtype=float).reshape(self.out_dim)
            return DataVector(out, is_summary=True)
        x = np.atleast_2d(x)
        return np.asarray(self.fn(x), dtype=float).reshape(len(x), self.out_dim)


def identity_summary(dim: int) -> SummaryFn:
    return SummaryFn(lambda x: x, dim, name="identity")


# --------------------------------------------------------------------------
# Proposals
# --------------------------------------------------------------------------


class ProposalKernel:
    """``q(theta_t, theta')``: ``propose`` draws, ``log_density(a, b)`` scores a -> b."""

    symmetric: bool = False

    def propose(self, theta, rng):
        raise NotImplementedError

    def log_density(self, a, b):
        raise NotImplementedError


class GaussianRandomWalk(ProposalKernel):
    symmetric = True

    def __init__(self, scales):
        self.scales = _frozen(np.atleast_1d(scales))
        if np.any(self.scales <= 0):
            raise ValueError("random-walk scales must be positive")

    def propose(self, theta, rng):
        theta = np.atleast_2d(theta)
        return theta + self.scales * rng.standard_normal(theta.shape)

    def log_density(self, a, b):
        z = (np.atleast_2d(b) - np.atleast_2d(a)) / self.scales
        return -0.5 * np.sum(z**2, axis=1) - np.sum(np.log(self.scales)) - 0.5 * z.shape[1] * np.log(
            2 * np.pi
        )

    def __repr__(self):
        return f"GaussianRandomWalk(scales={self.scales.tolist()})"


class _GridProposal(ProposalKernel):
    """Proposal on the points of a :class:`DiscretePrior`, given by a matrix."""

    def __init__(self, prior: DiscretePrior, matrix):
        self.prior = prior
        self.Q = _frozen(matrix)
        self._cdf = np.cumsum(self.Q, axis=1)
        self._cdf[:, -1] = 1.0

    def matrix(self) -> np.ndarray:
        return np.array(self.Q)

    def propose(self, theta, rng):
        idx = self.prior.index_of(theta)
        if np.any(idx < 0):
            raise ValueError("grid proposal started from an off-grid point")
        u = rng.random(len(idx))
        new = (u[:, None] >= self._cdf[idx]).sum(axis=1)
        return self.prior.points[new]

    def log_density(self, a, b):
        ia, ib = self.prior.index_of(a), self.prior.index_of(b)
        ok = (ia >= 0) & (ib >= 0)
        with np.errstate(divide="ignore"):
            out = np.log(self.Q[np.maximum(ia, 0), np.maximum(ib, 0)])
        return np.where(ok, out, -np.inf)


class GridRandomWalk(_GridProposal):
    """Step one grid index left or right (cyclically) with equal probability."""

    symmetric = True

    def __init__(self, prior: DiscretePrior):
        k = len(prior.points)
        Q = np.zeros((k, k))
        for i in range(k):
            Q[i, (i - 1) % k] += 0.5
            Q[i, (i + 1) % k] += 0.5
        super().__init__(prior, Q)


class IndependentGridProposal(_GridProposal):
    """Draw the next grid point from fixed probabilities, ignoring the current one."""

    def __init__(self, prior: DiscretePrior, probs):
        probs = np.asarray(probs, dtype=float)
        probs = probs / probs.sum()
        super().__init__(prior, np.tile(probs, (len(prior.points), 1)))


# --------------------------------------------------------------------------
# Samples
# --------------------------------------------------------------------------


@dataclass
class WeightedSample:
    """Parameter draws with nonnegative weights and run metadata.

    ``theta`` is ``(n, p)``, ``weights`` is ``(n,)`` and ``x`` (when kept) is
    ``(n, d)``.  ``meta["total_proposals"]`` counts every simulation the run
    made, so ``len(sample) / total_proposals`` is the acceptance rate of a
    rejection run.
    """

    theta: np.ndarray
    weights: np.ndarray
    x: Optional[np.ndarray] = None
    labels: tuple = ()
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.theta = np.atleast_2d(np.asarray(self.theta, dtype=float))
        if self.theta.size == 0:
            self.theta = self.theta.reshape(0, max(len(self.labels), 1))
        self.weights = np.asarray(self.weights, dtype=float).reshape(len(self.theta))
        if np.any(self.weights < 0) or not np.all(np.isfinite(self.weights)):
            raise ValueError("weights must be finite and nonnegative")
        if self.x is not None:
            self.x = np.asarray(self.x, dtype=float).reshape(len(self.theta), -1)
        if not self.labels:
            self.labels = tuple(f"theta_{i}" for i in range(self.theta.shape[1]))
        self.meta.setdefault("total_proposals", len(self.theta))
        if self.meta["total_proposals"] < len(self.theta):
            raise ValueError("total_proposals is smaller than the number of entries")
        self.meta["all_weights_zero"] = bool(len(self.weights) == 0 or not np.any(self.weights > 0))

    def __len__(self):
        return len(self.theta)

    def __getitem__(self, i):
        x = None if self.x is None else DataVector(self.x[i])
        return ParamVector(self.theta[i], self.labels), float(self.weights[i]), x

    @property
    def acceptance_rate(self) -> float:
        return len(self) / self.meta["total_proposals"] if self.meta["total_proposals"] else 0.0

    def effective_sample_size(self) -> float:
        """``sum(w) / max(w)``; zero when no weight is positive."""
        if not np.any(self.weights > 0):
            return 0.0
        return float(self.weights.sum() / self.weights.max())
