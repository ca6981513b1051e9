"""
Input gradients by reverse mode, and central finite differences used as a
test oracle.
"""

from typing import Callable, Protocol

import numpy as np

from ..errors import DimensionError
from .autograd import Tensor


class DifferentiableModel(Protocol):
    """Anything with a fixed input shape and a scalar loss on the tape."""

    input_shape: tuple

    def loss(self, x: Tensor, y) -> Tensor:
        ...


def input_gradient(model: DifferentiableModel, x: np.ndarray, y) -> np.ndarray:
    """Exact gradient of the model's scalar loss with respect to x."""
    x = np.asarray(x, dtype=np.float64)
    if tuple(x.shape) != tuple(model.input_shape):
        raise DimensionError(f"Input shape {x.shape} does not match model input "
                             f"{tuple(model.input_shape)}")
    xt = Tensor(x, requires_grad=True)
    model.loss(xt, y).backward()
    if xt.grad is None:
        return np.zeros_like(x)
    return xt.grad


def finite_diff_gradient(f: Callable[[np.ndarray], float], x: np.ndarray,
                         h: float = 1e-5) -> np.ndarray:
    """Elementwise central-difference estimate (f(x+h) - f(x-h)) / 2h."""
    if h <= 0:
        raise ValueError("h must be positive")
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat_x = x.reshape(-1)
    flat_g = grad.reshape(-1)
    for i in range(flat_x.size):
        orig = flat_x[i]
        flat_x[i] = orig + h
        f_plus = float(f(x))
        flat_x[i] = orig - h
        f_minus = float(f(x))
        flat_x[i] = orig
        flat_g[i] = (f_plus - f_minus) / (2 * h)
    return grad


def max_relative_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-8) -> float:
    """max |a - b| / max(|a|, |b|, floor), elementwise."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / denom)) if a.size else 0.0
