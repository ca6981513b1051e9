"""
Reverse-mode differentiation over float64 NumPy arrays.

A Tensor is one record of the tape: its value, the records it was computed
from, and a closure mapping the upstream gradient to the gradients of its
parents. ``backward`` walks the graph once in reverse topological order and
accumulates gradients, so shared subexpressions add up instead of
overwriting each other.
"""

import logging
from typing import Callable, Optional, Sequence

import numpy as np

from ..errors import NumericalError

logger = logging.getLogger(__name__)

BackwardFn = Callable[[np.ndarray, tuple], Sequence[Optional[np.ndarray]]]


class Tensor:
    """A float64 array plus the bookkeeping needed for reverse mode."""

    def __init__(self, data, requires_grad: bool = False,
                 parents: tuple = (), op: str = "",
                 backward_fn: Optional[BackwardFn] = None):
        arr = np.asarray(data, dtype=np.float64)
        self.data = np.ascontiguousarray(arr) if arr.ndim else arr
        if not np.all(np.isfinite(self.data)):
            raise NumericalError(
                f"Non-finite values in output of '{op or 'input'}' "
                f"(shape {self.data.shape})"
            )
        self.parents = parents
        self.op = op
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self._backward_fn = backward_fn if self.requires_grad else None
        self.grad: Optional[np.ndarray] = None

    # ── convenience ─────────────────────────────────────────────────

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return self.data.item()

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def __repr__(self) -> str:
        req = ", requires_grad=True" if self.requires_grad else ""
        op = f", op={self.op}" if self.op else ""
        return f"Tensor(shape={self.data.shape}{req}{op})"

    # ── operators ───────────────────────────────────────────────────

    def __add__(self, other):
        from .ops import add
        return add(self, as_tensor(other))

    def __radd__(self, other):
        from .ops import add
        return add(as_tensor(other), self)

    def __sub__(self, other):
        from .ops import sub
        return sub(self, as_tensor(other))

    def __rsub__(self, other):
        from .ops import sub
        return sub(as_tensor(other), self)

    def __mul__(self, other):
        from .ops import mul
        return mul(self, as_tensor(other))

    def __rmul__(self, other):
        from .ops import mul
        return mul(as_tensor(other), self)

    def __neg__(self):
        from .ops import mul
        return mul(self, as_tensor(-1.0))

    def __matmul__(self, other):
        from .ops import matmul
        return matmul(self, as_tensor(other))

    def sum(self):
        from .ops import total
        return total(self)

    def reshape(self, *shape):
        from .ops import reshape
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    # ── autograd core ───────────────────────────────────────────────

    def _topological_order(self) -> list["Tensor"]:
        order: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node.parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
        return order

    def backward(self, grad: Optional[np.ndarray] = None):
        """Accumulate d(self)/d(leaf) into every leaf that requires grad."""
        if not self.requires_grad:
            raise RuntimeError("backward() called on a tensor that does not require grad")
        if grad is None:
            if self.data.size != 1:
                raise RuntimeError("grad must be provided for non-scalar outputs")
            grad = np.ones_like(self.data)

        pending: dict[int, np.ndarray] = {id(self): np.asarray(grad, dtype=np.float64)}
        for node in reversed(self._topological_order()):
            g = pending.pop(id(node), None)
            if g is None:
                continue
            if not node.parents:
                node.grad = g if node.grad is None else node.grad + g
                continue
            if node._backward_fn is None:
                continue
            needs = tuple(p.requires_grad for p in node.parents)
            for parent, pg in zip(node.parents, node._backward_fn(g, needs)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                pending[key] = pg if key not in pending else pending[key] + pg


def as_tensor(value) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value)
