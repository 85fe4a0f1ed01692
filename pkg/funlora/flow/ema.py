"""
Exponential moving average of trained parameters, swapped in for sampling
"""
import logging
from contextlib import contextmanager
from typing import Iterator, List, Sequence

import numpy as np

from funlora.autograd import Tensor
from funlora.exceptions import ShapeError

logger = logging.getLogger(__name__)


class EmaState:
    """Shadow copies of a fixed parameter list"""

    def __init__(self, params: Sequence[Tensor], decay: float = 0.9995, activation_epoch: int = 0):
        if not 0.0 < decay < 1.0:
            raise ValueError(f"EMA decay must lie in (0, 1), got {decay}")
        self.params: List[Tensor] = list(params)
        self.decay = decay
        self.activation_epoch = activation_epoch
        self.shadow: List[np.ndarray] = [p.data.copy() for p in self.params]
        self.active = False

    def step(self, epoch: int) -> None:
        """Average from the activation epoch on; track the live values before it"""
        if epoch < self.activation_epoch:
            self.shadow = [p.data.copy() for p in self.params]
            return
        if not self.active:
            logger.debug("EMA active from epoch %d (decay %.4f)", epoch, self.decay)
            self.active = True
        ema_update(self, self.params)

    @contextmanager
    def swapped(self) -> Iterator[None]:
        """Shadow values live inside the block, trained values restored after"""
        ema_swap(self, self.params)
        try:
            yield
        finally:
            ema_swap(self, self.params)

    def commit(self) -> None:
        """Keep the shadow as the parameters' final value"""
        for p, s in zip(self.params, self.shadow):
            p.data = s.copy()


def _check_shapes(state: EmaState, params: Sequence[Tensor]) -> None:
    if len(params) != len(state.shadow):
        raise ShapeError(f"EMA tracks {len(state.shadow)} parameters, got {len(params)}")
    for p, s in zip(params, state.shadow):
        if p.shape != s.shape:
            raise ShapeError(f"EMA shadow {s.shape} does not match parameter {p.shape}")


def ema_update(state: EmaState, params: Sequence[Tensor]) -> None:
    _check_shapes(state, params)
    beta = state.decay
    state.shadow = [beta * s + (1.0 - beta) * p.data for p, s in zip(params, state.shadow)]


def ema_swap(state: EmaState, params: Sequence[Tensor]) -> None:
    """Exchange live and shadow values"""
    _check_shapes(state, params)
    for i, p in enumerate(params):
        p.data, state.shadow[i] = state.shadow[i], p.data
