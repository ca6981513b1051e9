"""
Per-step perturbation kernels: the sign rule, the sign-free rescale rule,
L1 normalization for momentum, and projection onto the L∞ budget.

All functions take and return float64 arrays holding ONE image's gradient;
statistics never span a batch.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError, DimensionError

logger = logging.getLogger(__name__)

UPDATE_RULES = ("sign", "rescale")


@dataclass(frozen=True)
class RescaleParams:
    """Rescale factor c: the upper bound of each rescaled entry's magnitude."""

    c: float = 2.0

    def __post_init__(self):
        if not self.c > 0:
            raise ConfigurationError(f"Rescale factor c must be positive, got {self.c}")


@dataclass(frozen=True)
class UpdateRule:
    """Selects sign(g) or rescale(g) for the x-update."""

    variant: str = "sign"
    rescale: RescaleParams = field(default_factory=RescaleParams)

    def __post_init__(self):
        if self.variant not in UPDATE_RULES:
            raise ConfigurationError(
                f"Unknown update rule '{self.variant}' (expected one of {UPDATE_RULES})"
            )

    @classmethod
    def sign_rule(cls) -> "UpdateRule":
        return cls("sign")

    @classmethod
    def rescale_rule(cls, c: float = 2.0) -> "UpdateRule":
        return cls("rescale", RescaleParams(c))

    @property
    def c(self) -> float:
        return self.rescale.c

    def apply(self, g: np.ndarray) -> np.ndarray:
        if self.variant == "rescale":
            return rescale_update(g, self.rescale.c)
        return sign_update(g)


def sign_update(g: np.ndarray) -> np.ndarray:
    """Elementwise strict sign: -1, 0 or +1."""
    return np.sign(np.asarray(g, dtype=np.float64))


def rescale_update(g: np.ndarray, c: float = 2.0) -> np.ndarray:
    """
    c · sign(g) ⊙ logistic(norm(log2|g|)).

    norm standardizes the log-magnitudes of the NONZERO entries with their
    mean and population standard deviation. Zero entries stay zero. When all
    nonzero magnitudes are equal the standardized vector is zero and every
    nonzero entry becomes ±c/2.
    """
    g = np.asarray(g, dtype=np.float64)
    out = np.zeros_like(g)
    nonzero = g != 0
    if not nonzero.any():
        return out

    logs = np.log2(np.abs(g[nonzero]))
    if logs.max() > logs.min():
        normed = (logs - logs.mean()) / logs.std()
    else:
        normed = np.zeros_like(logs)
    squashed = 1.0 / (1.0 + np.exp(-normed))
    out[nonzero] = c * np.sign(g[nonzero]) * squashed
    return out


def l1_normalize(g: np.ndarray) -> np.ndarray:
    """g / ||g||_1; an all-zero g is returned unchanged with a warning."""
    g = np.asarray(g, dtype=np.float64)
    norm = np.abs(g).sum()
    if norm == 0:
        logger.warning("Degenerate all-zero gradient; momentum step contributes nothing")
        return g.copy()
    return g / norm


def clip_to_budget(x_adv: np.ndarray, x_orig: np.ndarray, epsilon: float) -> np.ndarray:
    """Project onto [x_orig - ε, x_orig + ε] ∩ [0, 1], elementwise."""
    if epsilon < 0:
        raise ConfigurationError(f"epsilon must be non-negative, got {epsilon}")
    x_adv = np.asarray(x_adv, dtype=np.float64)
    x_orig = np.asarray(x_orig, dtype=np.float64)
    if x_adv.shape != x_orig.shape:
        raise DimensionError(f"Shape mismatch: {x_adv.shape} vs {x_orig.shape}")
    projected = np.clip(x_adv, x_orig - epsilon, x_orig + epsilon)
    return np.clip(projected, 0.0, 1.0)
