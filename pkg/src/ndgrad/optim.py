"""
Adam optimizer with bias correction
"""

from dataclasses import dataclass, replace
from typing import Dict, Optional, Tuple

import numpy as np

from config.settings import Settings
from ..utils.errors import ShapeError
from .tensor import DTYPE, Tensor


@dataclass
class AdamState:
    """First/second moments for one parameter plus the shared step counter"""
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    beta1: float = Settings.ADAM['beta1']
    beta2: float = Settings.ADAM['beta2']
    eps: float = Settings.ADAM['eps']

    @classmethod
    def zeros_like(cls, param, **hyper) -> 'AdamState':
        shape = np.shape(getattr(param, 'data', param))
        return cls(np.zeros(shape, dtype=DTYPE), np.zeros(shape, dtype=DTYPE), **hyper)


def adam_step(param, grad, state: AdamState, lr: float) -> Tuple[np.ndarray, AdamState]:
    """
    One Adam update.  Coordinates with an exactly zero gradient keep their
    value and their moments, so a zero gradient never moves a parameter.
    """
    p = np.asarray(getattr(param, 'data', param), dtype=DTYPE)
    g = np.asarray(getattr(grad, 'data', grad), dtype=DTYPE)
    if p.shape != g.shape or state.m.shape != p.shape:
        raise ShapeError("adam_step: parameter, gradient and state shapes differ",
                         operator='adam_step', shapes=[p.shape, g.shape, state.m.shape])
    if lr <= 0:
        raise ValueError(f"learning rate must be positive, got {lr}")

    step = state.step + 1
    active = g != 0
    m = np.where(active, state.beta1 * state.m + (1.0 - state.beta1) * g, state.m)
    v = np.where(active, state.beta2 * state.v + (1.0 - state.beta2) * g * g, state.v)
    m_hat = m / (1.0 - state.beta1 ** step)
    v_hat = v / (1.0 - state.beta2 ** step)
    update = lr * m_hat / (np.sqrt(v_hat) + state.eps)
    new_param = np.where(active, p - update, p)
    return new_param, replace(state, m=m, v=v, step=step)


class Adam:
    """Adam over a dictionary of named leaf tensors"""

    def __init__(self, params: Dict[str, Tensor], lr: float,
                 beta1: Optional[float] = None, beta2: Optional[float] = None,
                 eps: Optional[float] = None):
        if lr <= 0:
            raise ValueError(f"learning rate must be positive, got {lr}")
        self.params = params
        self.lr = lr
        hyper = {
            'beta1': Settings.ADAM['beta1'] if beta1 is None else beta1,
            'beta2': Settings.ADAM['beta2'] if beta2 is None else beta2,
            'eps': Settings.ADAM['eps'] if eps is None else eps,
        }
        self.state = {name: AdamState.zeros_like(p, **hyper) for name, p in params.items()}

    def step(self, grads: Optional[Dict[str, np.ndarray]] = None) -> None:
        """Apply one update from ``grads`` or from each parameter's accumulated ``.grad``"""
        for name, p in self.params.items():
            g = grads.get(name) if grads is not None else p.grad
            if g is None:
                g = np.zeros_like(p.data)
            p.data, self.state[name] = adam_step(p.data, g, self.state[name], self.lr)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None
