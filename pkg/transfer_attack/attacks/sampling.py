"""
Gradient-stabilizing samplers.

Depth-first sampling walks a chain x^0 = x, x^{i+1} = x^i + ξ_i with ξ_i
uniform on [-β·ε, β·ε] per element, so each sample is centered on the
previous one. The Gaussian sampler is the flat baseline: every sample is
x + η_i with η_i ~ Normal(0, σ²). Both return the mean gradient over the
N+1 points (the base point included).

Noise is drawn up front from a stream keyed by (seed, image, iteration), so
evaluating the gradients in parallel cannot change the result.
"""

import math
import logging
from concurrent.futures import Executor
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from ..errors import ConfigurationError

logger = logging.getLogger(__name__)

SAMPLER_KINDS = ("none", "dfs", "gaussian")

GradFn = Callable[[np.ndarray], np.ndarray]

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    """Coordinates of a reproducible random stream."""

    seed: int
    image_index: int = 0
    iteration_index: int = 0

    def _sequence(self, *key: int) -> np.random.SeedSequence:
        return np.random.SeedSequence(
            entropy=int(self.seed) & _MASK64,
            spawn_key=(int(self.image_index), int(self.iteration_index)) + key,
        )

    def noise_generator(self) -> np.random.Generator:
        """Generator for the sampler's perturbations."""
        return np.random.default_rng(self._sequence(0))

    def sample_generator(self, sample_index: int) -> np.random.Generator:
        """Generator for the input transforms applied to one sampled point."""
        return np.random.default_rng(self._sequence(1, int(sample_index)))


@dataclass(frozen=True)
class SamplerConfig:
    kind: str = "none"
    n: int = 12
    beta: float = 1.5
    sigma: Optional[float] = None  # None means beta * epsilon / sqrt(3)

    def __post_init__(self):
        if self.kind not in SAMPLER_KINDS:
            raise ConfigurationError(
                f"Unknown sampler '{self.kind}' (expected one of {SAMPLER_KINDS})"
            )
        if self.n < 0:
            raise ConfigurationError(f"Sample count must be non-negative, got {self.n}")
        if self.beta < 0:
            raise ConfigurationError(f"beta must be non-negative, got {self.beta}")
        if self.sigma is not None and self.sigma < 0:
            raise ConfigurationError(f"sigma must be non-negative, got {self.sigma}")

    @classmethod
    def depth_first(cls, n: int = 12, beta: float = 1.5) -> "SamplerConfig":
        return cls("dfs", n, beta)

    @classmethod
    def gaussian(cls, n: int = 20, beta: float = 1.5,
                 sigma: Optional[float] = None) -> "SamplerConfig":
        return cls("gaussian", n, beta, sigma)

    def resolved_sigma(self, epsilon: float) -> float:
        if self.sigma is not None:
            return self.sigma
        return self.beta * epsilon / math.sqrt(3)

    def sample_points(self, x: np.ndarray, epsilon: float,
                      rng: Union["RngStream", np.random.Generator]) -> list[np.ndarray]:
        """All points whose gradients get averaged, base point first."""
        if self.kind == "dfs":
            return dfs_points(x, self.n, self.beta, epsilon, rng)
        if self.kind == "gaussian":
            return gaussian_points(x, self.n, self.resolved_sigma(epsilon), rng)
        return [x]


def _generator(rng: Union[RngStream, np.random.Generator]) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.noise_generator()
    return rng


def dfs_points(x: np.ndarray, n: int, beta: float, epsilon: float,
               rng: Union[RngStream, np.random.Generator]) -> list[np.ndarray]:
    """The depth-first chain x^0..x^N. Points are not clamped to [0, 1]."""
    x = np.asarray(x, dtype=np.float64)
    radius = beta * epsilon
    if n == 0 or radius == 0:
        return [x]
    steps = _generator(rng).uniform(-radius, radius, size=(n,) + x.shape)
    chain = [x]
    current = x
    for step in steps:
        current = current + step
        chain.append(current)
    return chain


def gaussian_points(x: np.ndarray, n: int, sigma: float,
                    rng: Union[RngStream, np.random.Generator]) -> list[np.ndarray]:
    """x followed by N independent Gaussian perturbations of x."""
    x = np.asarray(x, dtype=np.float64)
    if n == 0 or sigma == 0:
        return [x]
    noise = _generator(rng).normal(0.0, sigma, size=(n,) + x.shape)
    return [x] + [x + eta for eta in noise]


def average_gradients(grad_fn: Callable[[int, np.ndarray], np.ndarray],
                      points: list[np.ndarray],
                      executor: Optional[Executor] = None) -> np.ndarray:
    """
    Mean of grad_fn(i, point_i). Summation runs in point order whatever
    order the evaluations finish in.
    """
    if executor is not None and len(points) > 1:
        grads = list(executor.map(grad_fn, range(len(points)), points))
    else:
        grads = [grad_fn(i, p) for i, p in enumerate(points)]
    if len(grads) == 1:
        return grads[0]
    acc = grads[0].copy()
    for g in grads[1:]:
        acc += g
    return acc / len(grads)


def dfs_gradient(grad_fn: GradFn, x: np.ndarray, n: int, beta: float,
                 epsilon: float, rng: Union[RngStream, np.random.Generator],
                 chain: Optional[list] = None,
                 executor: Optional[Executor] = None) -> np.ndarray:
    """
    Mean gradient over the depth-first chain. When ``chain`` is a list, the
    sampled points are appended to it.
    """
    points = dfs_points(x, n, beta, epsilon, rng)
    if chain is not None:
        chain.extend(points)
    return average_gradients(lambda _, p: grad_fn(p), points, executor)


def gaussian_gradient(grad_fn: GradFn, x: np.ndarray, n: int, sigma: float,
                      rng: Union[RngStream, np.random.Generator],
                      executor: Optional[Executor] = None) -> np.ndarray:
    """Mean gradient over x and N Gaussian neighbours of x."""
    points = gaussian_points(x, n, sigma, rng)
    return average_gradients(lambda _, p: grad_fn(p), points, executor)


def chain_deviation_bound_check(chain: list[np.ndarray], beta: float,
                                epsilon: float, tolerance: float = 1e-12) -> bool:
    """True iff every chain point i lies within i·β·ε of chain[0] in L∞."""
    if not chain:
        return True
    origin = np.asarray(chain[0], dtype=np.float64)
    for i, point in enumerate(chain):
        deviation = float(np.max(np.abs(np.asarray(point) - origin))) if origin.size else 0.0
        if deviation > i * beta * epsilon + tolerance:
            return False
    return True
