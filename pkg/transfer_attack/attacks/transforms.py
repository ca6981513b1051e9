"""
Input-transformation gradient pipelines: DIM (random resize and pad), SIM
(scale copies), TIM (Gaussian smoothing of the gradient) and their
composition, applied in the order DIM → SIM → TIM.

DIM at desk scale resizes DOWN to r×r and zero-pads back to H×H, because the
classifiers take a fixed input size. Resize-and-pad is linear, so the
gradient taken at the transformed image is mapped back onto the original
pixel grid through the transpose of that map.
"""

import math
import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ..errors import ConfigurationError, DimensionError
from ..tensor.autograd import Tensor
from ..tensor.ops import conv2d

logger = logging.getLogger(__name__)

TRANSFORM_NAMES = ("dim", "sim", "tim")


@dataclass(frozen=True)
class DimConfig:
    p: float = 0.5
    r_min_fraction: float = 0.9

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ConfigurationError(f"DIM probability must be in [0,1], got {self.p}")
        if not 0.0 < self.r_min_fraction <= 1.0:
            raise ConfigurationError(
                f"DIM r_min_fraction must be in (0,1], got {self.r_min_fraction}"
            )


@dataclass(frozen=True)
class SimConfig:
    m: int = 5

    def __post_init__(self):
        if self.m < 1:
            raise ConfigurationError(f"SIM needs at least one copy, got m={self.m}")


@dataclass(frozen=True)
class TimConfig:
    kernel_size: int = 7
    kernel_sigma: Optional[float] = None  # None means kernel_size / sqrt(3)

    def __post_init__(self):
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ConfigurationError(
                f"TIM kernel size must be a positive odd integer, got {self.kernel_size}"
            )
        if self.kernel_sigma is not None and not self.kernel_sigma > 0:
            raise ConfigurationError(f"TIM sigma must be positive, got {self.kernel_sigma}")

    @property
    def sigma(self) -> float:
        if self.kernel_sigma is not None:
            return self.kernel_sigma
        return self.kernel_size / math.sqrt(3)


@dataclass(frozen=True)
class TransformPipeline:
    """Any subset of DIM, SIM and TIM; the empty pipeline is the identity."""

    dim: Optional[DimConfig] = None
    sim: Optional[SimConfig] = None
    tim: Optional[TimConfig] = None

    @property
    def is_empty(self) -> bool:
        return self.dim is None and self.sim is None and self.tim is None

    @property
    def names(self) -> list[str]:
        return [n for n in TRANSFORM_NAMES if getattr(self, n) is not None]

    @classmethod
    def from_names(cls, names: str, dim: Optional[DimConfig] = None,
                   sim: Optional[SimConfig] = None,
                   tim: Optional[TimConfig] = None) -> "TransformPipeline":
        """Parse 'dim,sim,tim' style lists; unknown names are rejected."""
        selected = [n.strip().lower() for n in (names or "").split(",") if n.strip()]
        unknown = [n for n in selected if n not in TRANSFORM_NAMES]
        if unknown:
            raise ConfigurationError(f"Unknown transforms {unknown} (expected {TRANSFORM_NAMES})")
        return cls(
            dim=(dim or DimConfig()) if "dim" in selected else None,
            sim=(sim or SimConfig()) if "sim" in selected else None,
            tim=(tim or TimConfig()) if "tim" in selected else None,
        )


# ── DIM ─────────────────────────────────────────────────────────────

def bilinear_matrix(out_size: int, in_size: int) -> np.ndarray:
    """(out×in) bilinear interpolation weights, align-corners=False."""
    m = np.zeros((out_size, in_size))
    scale = in_size / out_size
    for i in range(out_size):
        src = max((i + 0.5) * scale - 0.5, 0.0)
        i0 = min(int(math.floor(src)), in_size - 1)
        i1 = min(i0 + 1, in_size - 1)
        w = src - i0
        m[i, i0] += 1.0 - w
        m[i, i1] += w
    return m


@dataclass
class DimDraw:
    """One realized resize-and-pad: x' = rows @ x @ cols.T per channel."""

    size: int
    top: int
    left: int
    rows: np.ndarray
    cols: np.ndarray

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self.rows @ x @ self.cols.T

    def pullback(self, g: np.ndarray) -> np.ndarray:
        return self.rows.T @ g @ self.cols


def draw_dim(shape: tuple, cfg: DimConfig, rng: np.random.Generator) -> Optional[DimDraw]:
    """Draw one DIM realization for a C×H×W image, or None (no transform)."""
    h, w = shape[-2], shape[-1]
    if h != w:
        raise DimensionError(f"DIM expects square images, got {shape}")
    if rng.random() >= cfg.p:
        return None
    low = min(h, math.ceil(cfg.r_min_fraction * h))
    size = int(rng.integers(low, h + 1))
    top = int(rng.integers(0, h - size + 1))
    left = int(rng.integers(0, h - size + 1))
    resize = bilinear_matrix(size, h)
    rows = np.zeros((h, h))
    cols = np.zeros((h, h))
    rows[top:top + size] = resize
    cols[left:left + size] = resize
    return DimDraw(size, top, left, rows, cols)


def dim_transform(x: np.ndarray, cfg: DimConfig, rng: np.random.Generator) -> np.ndarray:
    """With probability p resize down to r×r and zero-pad at a random offset."""
    x = np.asarray(x, dtype=np.float64)
    draw = draw_dim(x.shape, cfg, rng)
    return x if draw is None else draw.apply(x)


# ── SIM ─────────────────────────────────────────────────────────────

def sim_gradients(grad_fn: Callable[[np.ndarray, int], np.ndarray],
                  x: np.ndarray, y: int, m: int) -> np.ndarray:
    """(1/m) Σ_{i<m} grad_fn(x / 2^i, y)."""
    if m < 1:
        raise ConfigurationError(f"SIM needs at least one copy, got m={m}")
    acc = grad_fn(x / 1.0, y)
    for i in range(1, m):
        acc = acc + grad_fn(x / 2 ** i, y)
    return acc / m


# ── TIM ─────────────────────────────────────────────────────────────

def tim_kernel(size: int = 7, sigma: Optional[float] = None) -> np.ndarray:
    """Discretized isotropic Gaussian, normalized to sum 1."""
    if size < 1 or size % 2 == 0:
        raise ConfigurationError(f"TIM kernel size must be a positive odd integer, got {size}")
    sigma = size / math.sqrt(3) if sigma is None else sigma
    if not sigma > 0:
        raise ConfigurationError(f"TIM sigma must be positive, got {sigma}")
    offsets = np.arange(size) - size // 2
    g1 = np.exp(-(offsets ** 2) / (2 * sigma ** 2))
    kernel = np.outer(g1, g1)
    return kernel / kernel.sum()


def tim_smooth(g: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Convolve each channel of a C×H×W gradient with the kernel (same padding)."""
    g = np.asarray(g, dtype=np.float64)
    c, h, w = g.shape
    k = kernel.shape[0]
    smoothed = conv2d(Tensor(g.reshape(c, 1, h, w)),
                      Tensor(kernel.reshape(1, 1, k, k)), padding="same")
    return smoothed.data.reshape(c, h, w)


# ── Composition ─────────────────────────────────────────────────────

def composite_gradient(grad_fn: Callable[[np.ndarray, int], np.ndarray],
                       x: np.ndarray, y: int, pipeline: TransformPipeline,
                       rng: np.random.Generator) -> np.ndarray:
    """
    DIM → SIM → TIM around ``grad_fn(x, y)``. ``grad_fn`` may also be a
    gradient source exposing ``gradient(x, y)``.
    """
    if hasattr(grad_fn, "gradient"):
        grad_fn = grad_fn.gradient
    x = np.asarray(x, dtype=np.float64)
    if pipeline.is_empty:
        return grad_fn(x, y)

    draw = draw_dim(x.shape, pipeline.dim, rng) if pipeline.dim is not None else None
    x_in = x if draw is None else draw.apply(x)

    if pipeline.sim is not None:
        raw = sim_gradients(grad_fn, x_in, y, pipeline.sim.m)
    else:
        raw = grad_fn(x_in, y)

    if draw is not None:
        raw = draw.pullback(raw)

    if pipeline.tim is not None:
        raw = tim_smooth(raw, tim_kernel(pipeline.tim.kernel_size, pipeline.tim.sigma))
    return raw
