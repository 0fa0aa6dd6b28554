"""
Dense tensors, a closed catalog of differentiable operators, a finite-difference
oracle and the Adam optimizer
"""

from . import ops
from .gradcheck import GradCheckReport, grad_check, relative_error
from .ops import DifferentiableOp, apply, op_set
from .optim import Adam, AdamState, adam_step
from .storage import load_archive, load_tensor, save_archive, save_tensor
from .tensor import DTYPE, Tensor, as_tensor, is_grad_enabled, no_grad, parameter

__all__ = [
    'ops', 'DTYPE', 'Tensor', 'as_tensor', 'parameter', 'no_grad', 'is_grad_enabled',
    'DifferentiableOp', 'apply', 'op_set',
    'GradCheckReport', 'grad_check', 'relative_error',
    'Adam', 'AdamState', 'adam_step',
    'save_tensor', 'load_tensor', 'save_archive', 'load_archive',
]
