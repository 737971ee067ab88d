"""Bias-corrected Adam.

One optimizer instance owns the first/second moment buffers for its
parameter list, so training loops that alternate between players keep a
separate instance per player and the moment statistics never mix.
"""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .autodiff import Tensor


class Adam:
    """Adam with bias correction; gradients are cleared by ``step``.

    Attributes:
        params: the tensors updated in place.
        m, v: per-parameter moment buffers, same shapes as the params.
        step_count: number of completed steps, starts at 0.
    """

    def __init__(self, params: Sequence[Tensor], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-8):
        self.params = list(params)
        if not self.params:
            raise ValueError("Adam needs at least one parameter")
        for p in self.params:
            if not isinstance(p, Tensor) or not p.requires_grad:
                raise ValueError("Adam parameters must be Tensors with requires_grad=True")
        if not lr > 0:
            raise ValueError(f"learning rate must be positive, got {lr}")
        for name, b in (("beta1", beta1), ("beta2", beta2)):
            if not 0.0 <= b < 1.0:
                raise ValueError(f"{name} must lie in [0, 1), got {b}")
        if not epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {epsilon}")
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]
        self.step_count = 0

    def step(self) -> None:
        """Apply one update and clear the gradients it consumed."""
        for i, p in enumerate(self.params):
            if p.grad is None:
                raise RuntimeError(
                    f"Adam.step called with a missing gradient (parameter index {i}); "
                    "run backward() first"
                )
        self.step_count += 1
        t = self.step_count
        c1 = 1.0 - math.pow(self.beta1, t)
        c2 = 1.0 - math.pow(self.beta2, t)
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.epsilon)
            p.grad = None
