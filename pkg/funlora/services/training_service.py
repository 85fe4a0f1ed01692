"""
Generative training phases: task 1 (all base parameters), per-class adapters,
and per-class embeddings for the vanilla-conditioning baseline
"""
import hashlib
import logging
import math
import time
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np
from tqdm import tqdm

from funlora.autograd import Tensor, backward, recording
from funlora.autograd.optim import Adam
from funlora.config import settings
from funlora.exceptions import DataError, FrozenParameterError
from funlora.flow.ema import EmaState
from funlora.flow.paths import cfm_loss
from funlora.models.vector_field import EMBEDDING, INCREMENTAL, TASK1, VectorFieldNet
from funlora.schemas.experiment_schemas import PhaseSection

logger = logging.getLogger(__name__)

SnapshotHook = Callable[[int], None]


@dataclass
class PhaseSummary:
    samples_seen: int
    steps: int
    final_loss: Optional[float]
    seconds: float
    trained_parameters: int


def fingerprint(tensors: Sequence[Tensor]) -> str:
    digest = hashlib.sha256()
    for tensor in tensors:
        digest.update(np.ascontiguousarray(tensor.data).tobytes())
    return digest.hexdigest()


def train_phase(net: VectorFieldNet, params: List[Tensor], x: np.ndarray, y: np.ndarray, cfg: PhaseSection,
                rng: np.random.Generator, desc: str = "phase",
                snapshot: Optional[SnapshotHook] = None) -> PhaseSummary:
    """Adam (with warm-up) on the CFM loss over params only; EMA after every step, committed at the end"""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.asarray(y, dtype=np.int64)
    if x.shape[0] == 0:
        raise DataError(f"{desc}: no training data")
    frozen = [p.name or "<tensor>" for p in params if not p.requires_grad]
    if frozen:
        raise FrozenParameterError(f"{desc}: refusing to train frozen parameters {frozen}")

    start = time.perf_counter()
    optimizer = Adam(params, lr=cfg.lr, warmup_steps=cfg.warmup_steps)
    ema = EmaState(params, decay=cfg.ema_decay, activation_epoch=cfg.ema_start)
    batches = math.ceil(x.shape[0] / cfg.batch_size)
    samples_seen, loss_value = 0, None

    for epoch in tqdm(range(cfg.epochs), desc=desc, disable=not settings.SHOW_PROGRESS, leave=False):
        order = rng.permutation(x.shape[0])
        total = 0.0
        for b in range(batches):
            index = order[b * cfg.batch_size:(b + 1) * cfg.batch_size]
            optimizer.zero_grad()
            with recording():
                loss = cfm_loss(net, x[index], y[index], rng)
                backward(loss)
            optimizer.step()
            ema.step(epoch)
            total += loss.item() * index.size
            samples_seen += index.size
        loss_value = total / x.shape[0]
        logger.debug("%s epoch %d: loss %.5f", desc, epoch, loss_value)
        if snapshot is not None and cfg.snapshot_every and (epoch + 1) % cfg.snapshot_every == 0:
            if ema.active:
                with ema.swapped():
                    snapshot(epoch + 1)
            else:
                snapshot(epoch + 1)

    if ema.active:
        ema.commit()
    return PhaseSummary(samples_seen=samples_seen, steps=optimizer.steps, final_loss=loss_value,
                        seconds=time.perf_counter() - start, trained_parameters=int(sum(p.size for p in params)))


def train_task1(net: VectorFieldNet, x: np.ndarray, y: np.ndarray, cfg: PhaseSection,
                rng: np.random.Generator) -> PhaseSummary:
    """Unconstrained training of every base parameter"""
    logger.info("Task 1: training base model on %d samples, classes %s", len(y), sorted(set(y.tolist())))
    return train_phase(net, net.trainable_params(TASK1), x, y, cfg, rng, desc="task1")


def train_adapter(net: VectorFieldNet, label: int, x: np.ndarray, cfg: PhaseSection, rng: np.random.Generator,
                  snapshot: Optional[SnapshotHook] = None) -> PhaseSummary:
    """Train only the adapters of one class; the base must come out bitwise unchanged"""
    base = list(net.base_parameters().values())
    before = fingerprint(base)
    params = net.trainable_params(INCREMENTAL, label)
    labels = np.full(len(x), label, dtype=np.int64)
    summary = train_phase(net, params, x, labels, cfg, rng, desc=f"class {label}", snapshot=snapshot)
    if fingerprint(base) != before:
        raise FrozenParameterError(f"base parameters changed while training class {label}")
    logger.info("Class %d: adapter trained (%d parameters, loss %s)", label, summary.trained_parameters,
                "n/a" if summary.final_loss is None else f"{summary.final_loss:.4f}")
    return summary


def train_embedding(net: VectorFieldNet, label: int, x: np.ndarray, cfg: PhaseSection,
                    rng: np.random.Generator) -> PhaseSummary:
    """Vanilla conditioning: only the class embedding is learned"""
    base = [t for name, t in net.base_parameters().items() if name != f"embeddings.{label}"]
    before = fingerprint(base)
    labels = np.full(len(x), label, dtype=np.int64)
    summary = train_phase(net, net.trainable_params(EMBEDDING, label), x, labels, cfg, rng,
                          desc=f"class {label} (embedding)")
    if fingerprint(base) != before:
        raise FrozenParameterError(f"frozen parameters changed while training the embedding of class {label}")
    return summary
