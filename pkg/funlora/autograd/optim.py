"""
First-order optimizers over leaf tensors
"""
import math
from typing import Dict, Optional, Sequence

import numpy as np

from funlora.autograd.tensor import Tensor


class Optimizer:
    """Shared bookkeeping: parameter list, step counter, learning-rate schedule"""

    def __init__(self, params: Sequence[Tensor], lr: float):
        self.params = list(params)
        self.base_lr = lr
        self.steps = 0

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def current_lr(self) -> float:
        return self.base_lr

    def step(self) -> None:
        raise NotImplementedError


class Adam(Optimizer):
    """Adam with an optional linear warm-up of the learning rate"""

    def __init__(self, params: Sequence[Tensor], lr: float, betas=(0.9, 0.999), eps: float = 1e-8,
                 warmup_steps: int = 0):
        super().__init__(params, lr)
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.warmup_steps = warmup_steps
        self._m: Dict[int, np.ndarray] = {}
        self._v: Dict[int, np.ndarray] = {}

    def current_lr(self) -> float:
        if self.warmup_steps and self.steps < self.warmup_steps:
            return self.base_lr * (self.steps + 1) / self.warmup_steps
        return self.base_lr

    def step(self) -> None:
        lr = self.current_lr()
        self.steps += 1
        bias1 = 1.0 - self.beta1 ** self.steps
        bias2 = 1.0 - self.beta2 ** self.steps
        for p in self.params:
            if p.grad is None:
                continue
            key = id(p)
            m = self._m.get(key, np.zeros(p.shape))
            v = self._v.get(key, np.zeros(p.shape))
            m = self.beta1 * m + (1.0 - self.beta1) * p.grad
            v = self.beta2 * v + (1.0 - self.beta2) * p.grad * p.grad
            self._m[key], self._v[key] = m, v
            p.data = p.data - lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)


class SGD(Optimizer):
    """SGD with momentum, weight decay and an optional one-cycle schedule"""

    def __init__(self, params: Sequence[Tensor], lr: float, momentum: float = 0.0,
                 weight_decay: float = 0.0, total_steps: Optional[int] = None,
                 max_lr: Optional[float] = None):
        super().__init__(params, lr)
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.total_steps = total_steps
        self.max_lr = max_lr
        self._velocity: Dict[int, np.ndarray] = {}

    def current_lr(self) -> float:
        if self.max_lr is None or not self.total_steps:
            return self.base_lr
        return one_cycle_lr(self.steps, self.total_steps, self.max_lr, self.base_lr)

    def step(self) -> None:
        lr = self.current_lr()
        self.steps += 1
        for p in self.params:
            if p.grad is None:
                continue
            grad = p.grad + self.weight_decay * p.data if self.weight_decay else p.grad
            if self.momentum:
                velocity = self.momentum * self._velocity.get(id(p), np.zeros(p.shape)) + grad
                self._velocity[id(p)] = velocity
                grad = velocity
            p.data = p.data - lr * grad


def one_cycle_lr(step: int, total_steps: int, max_lr: float, initial_lr: float,
                 pct_start: float = 0.3, final_div: float = 1e4) -> float:
    """Cosine one-cycle: warm from initial_lr to max_lr, then anneal"""
    step = min(step, total_steps - 1)
    up = max(1, int(pct_start * total_steps))
    if step < up:
        return _cos_interp(initial_lr, max_lr, step / up)
    down = max(1, total_steps - up)
    return _cos_interp(max_lr, initial_lr / final_div, (step - up) / down)


def _cos_interp(start: float, end: float, frac: float) -> float:
    return end + (start - end) * (1.0 + math.cos(math.pi * frac)) / 2.0
