"""
Optimal-transport probability path and the conditional flow-matching loss

Data sits at t=0 and noise at t=1:

    x_t = (1 - t) * x0 + t * z,    u_target = dx_t/dt = z - x0
"""
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from funlora.autograd import Tensor, reduce, sub
from funlora.exceptions import DataError, ShapeError, SolverError

VectorField = Callable[[np.ndarray, Tensor, np.ndarray], Tensor]


@dataclass
class PathSample:
    x0: np.ndarray
    z: np.ndarray
    t: np.ndarray
    x_t: np.ndarray
    u_target: np.ndarray


def ot_path(x0, z, t) -> PathSample:
    """Point on the straight path between x0 and z; t may be a scalar or one value per row"""
    x0 = np.asarray(x0, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if x0.shape != z.shape:
        raise ShapeError(f"ot_path: data {x0.shape} and noise {z.shape} differ")
    if np.any(t < 0.0) or np.any(t > 1.0) or not np.all(np.isfinite(t)):
        raise SolverError(f"t must lie in [0, 1], got {t}")
    t_col = t.reshape(-1, 1) if t.ndim == 1 and x0.ndim == 2 else t
    x_t = (1.0 - t_col) * x0 + t_col * z
    return PathSample(x0=x0, z=z, t=t, x_t=x_t, u_target=z - x0)


def cfm_loss(model: VectorField, x0, labels: Sequence[int], rng: Optional[np.random.Generator] = None,
             t=None, z=None) -> Tensor:
    """Mean squared error between the model field and the target field

    ``t`` (one per row) and ``z`` are drawn from ``rng`` unless pinned.
    """
    x0 = np.atleast_2d(np.asarray(x0, dtype=np.float64))
    labels = np.asarray(labels, dtype=np.int64)
    if x0.shape[0] == 0:
        raise DataError("cfm_loss on an empty batch")
    if labels.shape != (x0.shape[0],):
        raise ShapeError(f"cfm_loss: {x0.shape[0]} points but {labels.shape} labels")
    if t is None or z is None:
        rng = rng if rng is not None else np.random.default_rng()
    t = rng.uniform(0.0, 1.0, size=x0.shape[0]) if t is None else np.broadcast_to(t, (x0.shape[0],))
    z = rng.standard_normal(x0.shape) if z is None else np.asarray(z, dtype=np.float64).reshape(x0.shape)
    sample = ot_path(x0, z, t)
    v = model(sample.t, Tensor(sample.x_t), labels)
    diff = sub(v, Tensor(sample.u_target))
    return reduce("mean", diff * diff)
