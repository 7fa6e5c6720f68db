from typing import Iterable

import numpy as np

from core.tensor import Parameter
from models.error_models import ContractError


def adam_step(
    params: Iterable[Parameter],
    lr: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One bias-corrected Adam update per parameter; gradients are cleared afterwards"""
    params = list(params)
    missing = [p.name for p in params if p.grad is None]
    if missing:
        raise ContractError(f"adam_step called before backward populated grads: {', '.join(missing[:3])}")

    for p in params:
        g = p.grad
        m = p.adam_m.data
        v = p.adam_v.data
        dtype = p.value.dtype
        m *= beta1
        m += (1 - beta1) * g
        v *= beta2
        v += (1 - beta2) * (g * g)
        p.step_count += 1
        m_hat = m / (1 - beta1 ** p.step_count)
        v_hat = v / (1 - beta2 ** p.step_count)
        p.value.data -= (lr * m_hat / (np.sqrt(v_hat) + eps)).astype(dtype)
        p.zero_grad()


class Adam:
    """Holds the hyperparameters for repeated adam_step calls over one parameter list"""

    def __init__(self, params: Iterable[Parameter], lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps

    def step(self) -> None:
        adam_step(self.params, self.lr, self.beta1, self.beta2, self.eps)
