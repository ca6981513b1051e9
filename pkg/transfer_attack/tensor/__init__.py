"""
Reverse-mode differentiation over NumPy arrays.
"""

from .autograd import Tensor, as_tensor
from .gradients import finite_diff_gradient, input_gradient, max_relative_error
