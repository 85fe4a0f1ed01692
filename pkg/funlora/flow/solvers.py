"""
ODE samplers integrating a vector field from noise (t=1) back to data (t=0)

Euler and RK4 take uniform steps. Dopri5 is the Dormand-Prince 5(4) pair
with a PI step-size controller and first-same-as-last stage reuse.
"""
import logging
import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from funlora.exceptions import SolverError
from funlora.schemas.experiment_schemas import SolverConfig, SolverMethod

logger = logging.getLogger(__name__)

Field = Callable[[float, np.ndarray], np.ndarray]

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4

# PI controller gains for a 5th order method
_SAFETY = 0.9
_K_I = 0.7 / 5.0
_K_P = 0.4 / 5.0
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0


@dataclass
class IntegrationResult:
    x: np.ndarray
    nfe: int
    steps: int
    rejected: int = 0
    seconds: float = 0.0


def nfe_budget_to_steps(method: SolverMethod, nfe: int) -> Optional[int]:
    """Fixed-step solvers read an NFE budget as a step count; adaptive ones ignore it"""
    if nfe < 1:
        raise ValueError(f"NFE budget must be >= 1, got {nfe}")
    if SolverMethod(method) is SolverMethod.DOPRI5:
        return None
    return int(nfe)


def _check_finite(x: np.ndarray, t: float) -> None:
    if not np.all(np.isfinite(x)):
        raise SolverError(f"non-finite state at t={t:.6g}")


def _euler(field: Field, x: np.ndarray, steps: int) -> IntegrationResult:
    h = -1.0 / steps
    for n in range(steps):
        t = 1.0 + n * h
        x = x + h * field(t, x)
    return IntegrationResult(x=x, nfe=steps, steps=steps)


def _rk4(field: Field, x: np.ndarray, steps: int) -> IntegrationResult:
    h = -1.0 / steps
    for n in range(steps):
        t = 1.0 + n * h
        k1 = field(t, x)
        k2 = field(t + h / 2, x + h / 2 * k1)
        k3 = field(t + h / 2, x + h / 2 * k2)
        k4 = field(t + h, x + h * k3)
        x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return IntegrationResult(x=x, nfe=4 * steps, steps=steps)


def _dopri5(field: Field, x: np.ndarray, cfg: SolverConfig) -> IntegrationResult:
    t, t_end = 1.0, 0.0
    h = -abs(cfg.initial_step)
    k = [None] * 7
    k[0] = field(t, x)
    nfe, steps, rejected = 1, 0, 0
    err_prev = 1.0
    while t > t_end:
        if t + h < t_end:
            h = t_end - t
        for s in range(1, 7):
            stage = x + h * sum(a * k[j] for j, a in enumerate(_A[s]) if a != 0.0)
            k[s] = field(t + _C[s] * h, stage)
        nfe += 6
        x_new = x + h * sum(b * k[j] for j, b in enumerate(_B5) if b != 0.0)
        _check_finite(x_new, t + h)
        err_vec = h * sum(e * k[j] for j, e in enumerate(_E) if e != 0.0)
        scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(x), np.abs(x_new))
        err = float(np.max(np.abs(err_vec) / scale)) if err_vec.size else 0.0

        if err <= 1.0:
            t, x = t + h, x_new
            k[0] = k[6]
            steps += 1
            if err == 0.0:
                factor = _MAX_FACTOR
            else:
                factor = _SAFETY * err ** -_K_I * err_prev ** _K_P
            err_prev = max(err, 1e-4)
        else:
            rejected += 1
            factor = max(_SAFETY * err ** -(1.0 / 5.0), _MIN_FACTOR)
        h *= min(_MAX_FACTOR, max(_MIN_FACTOR, factor))
        if t > t_end and abs(h) < cfg.min_step:
            raise SolverError(f"dopri5 step underflow at t={t:.6g}: |h|={abs(h):.3e} < {cfg.min_step:.1e}")
    return IntegrationResult(x=x, nfe=nfe, steps=steps, rejected=rejected)


def integrate(field: Field, z, cfg: Optional[SolverConfig] = None) -> IntegrationResult:
    """State at t=0 of dx/dt = field(t, x) started from x(1) = z"""
    cfg = cfg or SolverConfig()
    x = np.array(z, dtype=np.float64)
    _check_finite(x, 1.0)
    start = time.perf_counter()
    if cfg.method is SolverMethod.EULER:
        result = _euler(field, x, cfg.steps)
    elif cfg.method is SolverMethod.RK4:
        result = _rk4(field, x, cfg.steps)
    else:
        result = _dopri5(field, x, cfg)
    _check_finite(result.x, 0.0)
    result.seconds = time.perf_counter() - start
    logger.debug("%s: %d steps, %d evaluations, %d rejected", cfg.method.value, result.steps, result.nfe,
                 result.rejected)
    return result
