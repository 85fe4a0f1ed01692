"""
Central finite-difference gradient checking
"""
from typing import Callable, Sequence

import numpy as np

from funlora.autograd.tensor import Tensor, backward, no_grad, recording
from funlora.exceptions import AutodiffError


def grad_check(f: Callable[[], Tensor], params: Sequence[Tensor], eps: float = 1e-5) -> float:
    """Max over parameter entries of |analytic - numeric| / max(1, |analytic|)

    ``f`` is re-evaluated after perturbing each entry of each parameter in
    place, so it must read the parameters at call time.
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    for p in params:
        p.zero_grad()
    with recording():
        loss = f()
        _require_finite(loss.data, "loss")
        grads = backward(loss)

    worst = 0.0
    for p in params:
        analytic = grads.get(p, np.zeros(p.shape))
        flat = p.data.reshape(-1)
        for i in range(flat.size):
            original = flat[i]
            with no_grad():
                flat[i] = original + eps
                upper = f().item()
                flat[i] = original - eps
                lower = f().item()
            flat[i] = original
            _require_finite(np.array([upper, lower]), "perturbed loss")
            numeric = (upper - lower) / (2.0 * eps)
            a = analytic.reshape(-1)[i]
            worst = max(worst, abs(a - numeric) / max(1.0, abs(a)))
        p.zero_grad()
    return worst


def _require_finite(values: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(values)):
        raise AutodiffError(f"non-finite {what} during gradient check")
