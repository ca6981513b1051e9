"""
Differentiable operations: arithmetic, matmul, conv2d, relu, avgpool2,
dense layers and softmax cross-entropy.

Images are channel-first (C×H×W); every image op also accepts a leading
batch axis (N×C×H×W). Convolution uses the cross-correlation convention.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ConfigurationError, DimensionError, LabelError
from .autograd import Tensor


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return np.asarray(g)


# ── Arithmetic ──────────────────────────────────────────────────────

def add(a: Tensor, b: Tensor) -> Tensor:
    def backward(g, needs):
        return (_unbroadcast(g, a.shape) if needs[0] else None,
                _unbroadcast(g, b.shape) if needs[1] else None)
    return Tensor(a.data + b.data, parents=(a, b), op="add", backward_fn=backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    def backward(g, needs):
        return (_unbroadcast(g, a.shape) if needs[0] else None,
                _unbroadcast(-g, b.shape) if needs[1] else None)
    return Tensor(a.data - b.data, parents=(a, b), op="sub", backward_fn=backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    def backward(g, needs):
        return (_unbroadcast(g * b.data, a.shape) if needs[0] else None,
                _unbroadcast(g * a.data, b.shape) if needs[1] else None)
    return Tensor(a.data * b.data, parents=(a, b), op="mul", backward_fn=backward)


def total(a: Tensor) -> Tensor:
    def backward(g, needs):
        return (np.full(a.shape, g.item()),)
    return Tensor(a.data.sum(), parents=(a,), op="sum", backward_fn=backward)


def reshape(a: Tensor, shape: tuple) -> Tensor:
    def backward(g, needs):
        return (g.reshape(a.shape),)
    return Tensor(a.data.reshape(shape), parents=(a,), op="reshape",
                  backward_fn=backward)


def flatten(a: Tensor, batched: bool = False) -> Tensor:
    """Flatten to a vector, or to N×D when ``batched``."""
    shape = (a.shape[0], -1) if batched else (-1,)
    return reshape(a, shape)


# ── Linear algebra ──────────────────────────────────────────────────

def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product for 1-D/2-D operands, differentiable in both."""
    if a.ndim not in (1, 2) or b.ndim not in (1, 2):
        raise DimensionError(f"matmul expects 1-D or 2-D operands, got {a.shape} and {b.shape}")
    inner_a = a.shape[-1]
    inner_b = b.shape[0]
    if inner_a != inner_b:
        raise DimensionError(f"matmul inner dimensions differ: {a.shape} x {b.shape}")

    def backward(g, needs):
        ga = gb = None
        ad, bd = a.data, b.data
        if needs[0]:
            if bd.ndim == 2:
                ga = g @ bd.T
            else:
                ga = np.outer(g, bd) if ad.ndim == 2 else g * bd
        if needs[1]:
            if ad.ndim == 2:
                gb = ad.T @ g
            else:
                gb = np.outer(ad, g) if bd.ndim == 2 else g * ad
        return ga, gb

    return Tensor(a.data @ b.data, parents=(a, b), op="matmul", backward_fn=backward)


def dense(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Fully connected layer: x @ W + b, with W shaped (in, out)."""
    return add(matmul(x, weight), bias)


# ── Convolution and pooling ─────────────────────────────────────────

def _padding_amounts(k: int, padding: str) -> tuple[int, int]:
    if padding == "valid":
        return 0, 0
    if padding == "same":
        lo = (k - 1) // 2
        return lo, k - 1 - lo
    raise ConfigurationError(f"Unknown padding '{padding}' (expected 'valid' or 'same')")


def conv2d(x: Tensor, kernels: Tensor, padding: str = "valid") -> Tensor:
    """
    2-D cross-correlation of x (C×H×W or N×C×H×W) with kernels
    (C_out×C_in×kh×kw). Same-padding adds zeros around the input.
    """
    single = x.ndim == 3
    if x.ndim not in (3, 4) or kernels.ndim != 4:
        raise DimensionError(f"conv2d expects C×H×W input and 4-D kernels, "
                             f"got {x.shape} and {kernels.shape}")
    xd = x.data[None] if single else x.data
    n, c, h, w = xd.shape
    out_ch, in_ch, kh, kw = kernels.shape
    if in_ch != c:
        raise DimensionError(f"conv2d channel mismatch: input {x.shape}, kernels {kernels.shape}")

    top, bottom = _padding_amounts(kh, padding)
    left, right = _padding_amounts(kw, padding)
    if kh > h + top + bottom or kw > w + left + right:
        raise DimensionError(f"conv2d kernel {kernels.shape} larger than padded input {x.shape}")

    if top or bottom or left or right:
        xp = np.pad(xd, ((0, 0), (0, 0), (top, bottom), (left, right)))
    else:
        xp = xd
    windows = sliding_window_view(xp, (kh, kw), axis=(2, 3))
    out = np.tensordot(windows, kernels.data, axes=([1, 4, 5], [1, 2, 3]))
    out = out.transpose(0, 3, 1, 2)
    if single:
        out = out[0]

    def backward(g, needs):
        gd = g[None] if single else g
        gx = gk = None
        if needs[1]:
            gk = np.tensordot(gd, windows, axes=([0, 2, 3], [0, 2, 3]))
        if needs[0]:
            gp = np.pad(gd, ((0, 0), (0, 0), (kh - 1, kh - 1), (kw - 1, kw - 1)))
            gw = sliding_window_view(gp, (kh, kw), axis=(2, 3))
            flipped = kernels.data[:, :, ::-1, ::-1]
            dxp = np.tensordot(gw, flipped, axes=([1, 4, 5], [0, 2, 3]))
            dxp = dxp.transpose(0, 3, 1, 2)
            gx = dxp[:, :, top:top + h, left:left + w]
            if single:
                gx = gx[0]
        return gx, gk

    return Tensor(out, parents=(x, kernels), op="conv2d", backward_fn=backward)


def add_channel_bias(x: Tensor, bias: Tensor) -> Tensor:
    """Add a per-channel bias to C×H×W or N×C×H×W activations."""
    return add(x, reshape(bias, (bias.shape[0], 1, 1)))


def relu(x: Tensor) -> Tensor:
    """Elementwise max(0, x); the subgradient at exactly 0 is 0."""
    mask = x.data > 0

    def backward(g, needs):
        return (g * mask,)

    return Tensor(np.where(mask, x.data, 0.0), parents=(x,), op="relu",
                  backward_fn=backward)


def avgpool2(x: Tensor) -> Tensor:
    """Non-overlapping 2×2 mean pooling over the last two axes."""
    h, w = x.shape[-2], x.shape[-1]
    if h % 2 or w % 2:
        raise DimensionError(f"avgpool2 needs even spatial dims, got {x.shape}")
    lead = x.shape[:-2]
    out = x.data.reshape(lead + (h // 2, 2, w // 2, 2)).mean(axis=(-3, -1))

    def backward(g, needs):
        return (np.repeat(np.repeat(g, 2, axis=-2), 2, axis=-1) * 0.25,)

    return Tensor(out, parents=(x,), op="avgpool2", backward_fn=backward)


# ── Loss ────────────────────────────────────────────────────────────

def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits: Tensor, labels) -> Tensor:
    """
    -log softmax(logits)[label], stabilized by max-subtraction.

    Accepts one logit vector with an integer label, or an N×K batch with N
    labels, in which case the mean loss is returned.
    """
    single = logits.ndim == 1
    z = logits.data[None] if single else logits.data
    if z.ndim != 2:
        raise DimensionError(f"softmax_cross_entropy expects K or N×K logits, got {logits.shape}")
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    n, k = z.shape
    if labels.shape != (n,):
        raise DimensionError(f"{labels.shape[0]} labels for {n} logit rows")
    if np.any(labels < 0) or np.any(labels >= k):
        raise LabelError(f"Label out of range for {k} classes: {labels.tolist()}")

    shifted = z - z.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    sum_exp = exp.sum(axis=1)
    rows = np.arange(n)
    losses = np.log(sum_exp) - shifted[rows, labels]
    probs = exp / sum_exp[:, None]

    def backward(g, needs):
        d = probs.copy()
        d[rows, labels] -= 1.0
        d *= g.item() / n
        return (d[0] if single else d,)

    return Tensor(losses.mean(), parents=(logits,), op="softmax_cross_entropy",
                  backward_fn=backward)
