"""Acceptance kernels: densities of the assumed error ``obs - x``.

Every kernel is a proper probability density on the space of differences,
so the same object serves three roles: the error model, the weight of a
proposal (``density``) and, divided by the bound ``c``, the probability of
accepting it (``acceptance_prob``).

Radial kernels reduce a difference vector to a distance ``r`` with a
metric.  For a metric whose unit ball has volume ``V`` in ``d`` dimensions
the normalized densities are::

    uniform       1 / (V delta^d)                          for r <= delta
    epanechnikov  (d + 2) / (2 V delta^d) * (1 - r^2/delta^2)  for r < delta

which for ``d = 1`` gives ``1/(2 delta)`` and ``3/(4 delta)(1 - r^2/delta^2)``.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np
from scipy.special import gammaln

from .core import DataVector, validate_pair
from .errors import DimensionMismatch, DivisionByZero, InvalidBound, Unsupported

__all__ = [
    "Metric",
    "EuclideanMetric",
    "MaxMetric",
    "MaxRelativeMetric",
    "max_relative_error_metric",
    "DiscrepancyKernel",
    "UniformBall",
    "Epanechnikov",
    "Gaussian",
    "Product",
    "METRICS",
    "KERNEL_FAMILIES",
    "make_metric",
    "make_kernel",
]

# linear-space densities below this are reported as exactly zero
DENSITY_FLOOR = 1e-300
_BOUND_SLACK = 1e-12


class Metric:
    name = ""

    def __call__(self, diff) -> np.ndarray:
        raise NotImplementedError

    def log_unit_ball_volume(self, dim: int) -> float:
        raise NotImplementedError

    def unit_ball_volume(self, dim: int) -> float:
        return math.exp(self.log_unit_ball_volume(dim))

    def half_widths(self, dim: int) -> np.ndarray:
        """Per-component extent of the unit ball along each axis."""
        return np.ones(dim)

    def descriptor(self) -> dict:
        return {"metric": self.name}


class EuclideanMetric(Metric):
    name = "euclidean"

    def __call__(self, diff):
        return np.sqrt(np.sum(np.square(np.atleast_2d(diff)), axis=1))

    def log_unit_ball_volume(self, dim):
        return 0.5 * dim * math.log(math.pi) - float(gammaln(0.5 * dim + 1))

    def unit_ball_volume(self, dim):
        # exact values where they exist, so 1 / (2 delta) comes out exact
        return {1: 2.0, 2: math.pi, 3: 4.0 * math.pi / 3.0}.get(dim) or super().unit_ball_volume(dim)


class MaxMetric(Metric):
    name = "max"

    def __call__(self, diff):
        return np.max(np.abs(np.atleast_2d(diff)), axis=1)

    def log_unit_ball_volume(self, dim):
        return dim * math.log(2.0)

    def unit_ball_volume(self, dim):
        return 2.0**dim


class MaxRelativeMetric(Metric):
    """``max_i |ref_i - x_i| / |ref_i|`` for a fixed reference vector.

    Thresholding at ``delta`` accepts exactly the box
    ``ref_i (1 - delta) .. ref_i (1 + delta)`` in every coordinate.
    """

    name = "max_relative"

    def __init__(self, reference):
        ref = np.abs(np.atleast_1d(np.asarray(reference, dtype=float)))
        if np.any(ref == 0):
            raise DivisionByZero("relative error is undefined for a zero reference component")
        self.scale = ref
        self.scale.setflags(write=False)

    def __call__(self, diff):
        diff = np.atleast_2d(diff)
        if diff.shape[1] != self.scale.size:
            raise DimensionMismatch(
                f"relative metric built for dimension {self.scale.size}, got {diff.shape[1]}"
            )
        return np.max(np.abs(diff) / self.scale, axis=1)

    def log_unit_ball_volume(self, dim):
        return dim * math.log(2.0) + float(np.sum(np.log(self.scale)))

    def unit_ball_volume(self, dim):
        return 2.0**dim * float(np.prod(self.scale))

    def half_widths(self, dim):
        return np.array(self.scale)

    def descriptor(self):
        return {"metric": self.name, "reference": self.scale.tolist()}


def max_relative_error_metric(d, x) -> float:
    """Largest componentwise relative error of ``x`` with respect to ``d``."""
    if isinstance(d, DataVector) and isinstance(x, DataVector):
        validate_pair(d, x)
    d = np.atleast_1d(np.asarray(getattr(d, "values", d), dtype=float))
    x = np.atleast_1d(np.asarray(getattr(x, "values", x), dtype=float))
    if d.shape != x.shape:
        raise DimensionMismatch(f"shapes {d.shape} and {x.shape} differ")
    if np.any(d == 0):
        raise DivisionByZero("relative error is undefined for a zero observation component")
    return float(np.max(np.abs(d - x) / np.abs(d)))


METRICS = {"euclidean": EuclideanMetric, "max": MaxMetric, "max_relative": MaxRelativeMetric}


def make_metric(name: str, reference=None) -> Metric:
    if name not in METRICS:
        raise KeyError(f"unknown metric {name!r}; registered: {sorted(METRICS)}")
    if name == "max_relative":
        if reference is None:
            raise ValueError("max_relative metric needs a reference vector")
        return MaxRelativeMetric(reference)
    return METRICS[name]()


# --------------------------------------------------------------------------
# Kernels
# --------------------------------------------------------------------------


class DiscrepancyKernel:
    """Common machinery; subclasses implement ``log_density``.

    ``c`` defaults to the density at zero difference, the mode of every
    family here.  A larger ``c`` is allowed (it only lowers acceptance); a
    smaller one raises :class:`InvalidBound`.
    """

    family = ""

    def __init__(self, dim: int, c: Optional[float] = None):
        self.dim = int(dim)
        if self.dim < 1:
            raise ValueError("kernel dimension must be positive")
        mode = float(self.log_density(np.zeros((1, self.dim)))[0])
        if c is None:
            self.log_c = mode
        else:
            if not c > 0:
                raise InvalidBound(f"c must be positive, got {c}")
            self.log_c = math.log(c)
            if mode > self.log_c + _BOUND_SLACK:
                raise InvalidBound(f"c={c} is below the kernel mode density {math.exp(mode)}")
        self.c_explicit = c is not None

    @property
    def c(self) -> float:
        return math.exp(self.log_c)

    def _check(self, diff) -> np.ndarray:
        if isinstance(diff, DataVector):
            diff = diff.values
        diff = np.asarray(diff, dtype=float)
        if diff.ndim <= 1:
            diff = diff.reshape(1, -1) if diff.size == self.dim else diff.reshape(-1, 1)
        if diff.shape[1] != self.dim:
            raise DimensionMismatch(f"{self.family} kernel has dimension {self.dim}, got {diff.shape[1]}")
        return diff

    def log_density(self, diff) -> np.ndarray:
        raise NotImplementedError

    def density(self, diff) -> np.ndarray:
        dens = np.exp(self.log_density(diff))
        return np.where(dens < DENSITY_FLOOR, 0.0, dens)

    def log_acceptance(self, diff) -> np.ndarray:
        logd = self.log_density(diff)
        if np.any(logd > self.log_c + _BOUND_SLACK):
            raise InvalidBound(
                f"{self.family} density {math.exp(float(np.max(logd)))} exceeds c={self.c}"
            )
        return np.minimum(logd - self.log_c, 0.0)

    def acceptance_prob(self, diff) -> np.ndarray:
        return np.exp(self.log_acceptance(diff))

    # Rejection/MCMC hooks: weights and acceptance as functions of (obs, x, theta).
    def log_weight(self, obs: np.ndarray, x: np.ndarray, theta=None) -> np.ndarray:
        return self.log_density(obs - x)

    def weight(self, obs: np.ndarray, x: np.ndarray, theta=None) -> np.ndarray:
        """Linear-space ``k(obs - X)``, floored like :meth:`density`."""
        return self.density(obs - x)

    def error_variance(self):
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        raise Unsupported(f"sampling is not available for {self.family} kernels")

    def descriptor(self) -> dict:
        out = {"family": self.family, "dim": self.dim}
        if self.c_explicit:
            out["c"] = self.c
        return out


class _Radial(DiscrepancyKernel):
    def __init__(self, delta: float, metric: Metric | str = "euclidean", dim: int = 1, c=None):
        if not delta > 0 or not np.isfinite(delta):
            raise ValueError(f"delta must be positive and finite, got {delta}")
        self.delta = float(delta)
        self.metric = make_metric(metric) if isinstance(metric, str) else metric
        self._log_vol = self.metric.log_unit_ball_volume(int(dim)) + int(dim) * math.log(self.delta)
        super().__init__(dim, c)

    def distance(self, diff) -> np.ndarray:
        return self.metric(self._check(diff))

    def _half_width(self) -> float:
        if self.dim != 1:
            raise Unsupported(f"{self.family} variance/sampling is defined for scalar kernels only")
        return self.delta * float(self.metric.half_widths(1)[0])

    def descriptor(self):
        return {**super().descriptor(), "delta": self.delta, **self.metric.descriptor()}


class UniformBall(_Radial):
    """Uniform error on ``{e : metric(e) <= delta}``; acceptance is the 0-1 cutoff."""

    family = "uniform"

    def log_density(self, diff):
        r = self.distance(diff)
        return np.where(r <= self.delta, -self._log_vol, -np.inf)

    def density(self, diff):
        height = 1.0 / (self.metric.unit_ball_volume(self.dim) * self.delta**self.dim)
        return np.where(self.distance(diff) <= self.delta, height, 0.0)

    def error_variance(self):
        return self._half_width() ** 2 / 3.0

    def sample(self, rng, n):
        h = self._half_width()
        return (h * (2.0 * rng.random(n) - 1.0))[:, None]


class Epanechnikov(_Radial):
    family = "epanechnikov"

    def log_density(self, diff):
        r = self.distance(diff)
        inside = r < self.delta
        t = np.where(inside, r / self.delta, 0.0)
        logd = math.log((self.dim + 2) / 2.0) - self._log_vol + np.log1p(-(t**2))
        return np.where(inside, logd, -np.inf)

    def error_variance(self):
        return self._half_width() ** 2 / 5.0

    def sample(self, rng, n):
        # Devroye: of three U(-1,1) draws, return the second if the third has
        # the largest modulus, otherwise the third.
        u = 2.0 * rng.random((3, n)) - 1.0
        pick_second = (np.abs(u[2]) >= np.abs(u[1])) & (np.abs(u[2]) >= np.abs(u[0]))
        return (self._half_width() * np.where(pick_second, u[1], u[2]))[:, None]


class Gaussian(DiscrepancyKernel):
    """Independent zero-mean normal errors with standard deviations ``sigma``."""

    family = "gaussian"

    def __init__(self, sigma, c=None):
        self.sigma = np.atleast_1d(np.asarray(sigma, dtype=float))
        if np.any(self.sigma <= 0) or not np.all(np.isfinite(self.sigma)):
            raise ValueError(f"sigma must be positive and finite, got {self.sigma}")
        self._log_norm = -float(np.sum(np.log(self.sigma))) - 0.5 * self.sigma.size * math.log(2 * math.pi)
        super().__init__(self.sigma.size, c)

    def log_density(self, diff):
        z = self._check(diff) / self.sigma
        return self._log_norm - 0.5 * np.sum(z * z, axis=1)

    def error_variance(self):
        var = self.sigma**2
        return float(var[0]) if var.size == 1 else var

    def sample(self, rng, n):
        return self.sigma * rng.standard_normal((n, self.dim))

    def descriptor(self):
        return {**super().descriptor(), "sigma": self.sigma.tolist()}


class Product(DiscrepancyKernel):
    """Independent errors on consecutive blocks of components.

    Child ``k`` sees the next ``children[k].dim`` components of the
    difference; the density is the product of the child densities.
    """

    family = "product"

    def __init__(self, children: Sequence[DiscrepancyKernel], c=None):
        if not children:
            raise ValueError("Product kernel needs at least one child")
        self.children = tuple(children)
        edges = np.cumsum([0] + [k.dim for k in self.children])
        self._blocks = [slice(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]
        super().__init__(int(edges[-1]), c)

    def log_density(self, diff):
        diff = self._check(diff)
        return sum(k.log_density(diff[:, s]) for k, s in zip(self.children, self._blocks))

    def error_variance(self):
        raise Unsupported("product kernels report per-child variances; see child_variances()")

    def child_variances(self) -> list:
        return [k.error_variance() for k in self.children]

    def sample(self, rng, n):
        return np.hstack([k.sample(rng, n) for k in self.children])

    def descriptor(self):
        return {**super().descriptor(), "children": [k.descriptor() for k in self.children]}


KERNEL_FAMILIES = {
    "uniform": UniformBall,
    "epanechnikov": Epanechnikov,
    "gaussian": Gaussian,
    "product": Product,
}


def make_kernel(family: str, **params) -> DiscrepancyKernel:
    """Build a kernel by registered family name."""
    if family not in KERNEL_FAMILIES:
        raise KeyError(f"unknown kernel family {family!r}; registered: {sorted(KERNEL_FAMILIES)}")
    return KERNEL_FAMILIES[family](**params)
