"""
Small dense classifier trained on real (task 1) or synthetic data
"""
import logging
import math
from typing import List, Optional, Sequence

import numpy as np
from tqdm import tqdm

from funlora.autograd import Tensor, backward, no_grad, recording, silu, softmax_cross_entropy
from funlora.autograd.optim import SGD
from funlora.config import settings
from funlora.exceptions import DataError, UnknownLabelError
from funlora.models.vector_field import DenseLayer
from funlora.schemas.experiment_schemas import ClassifierSection

logger = logging.getLogger(__name__)


class ClassifierNet:
    """Dense network over raw coordinates; one output per known label"""

    def __init__(self, input_dim: int, labels: Sequence[int], hidden_width: int = 32, hidden_layers: int = 2,
                 rng: Optional[np.random.Generator] = None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.labels: List[int] = sorted(int(label) for label in labels)
        if not self.labels:
            raise DataError("classifier needs at least one label")
        self._index = {label: i for i, label in enumerate(self.labels)}
        sizes = [input_dim] + [hidden_width] * hidden_layers + [len(self.labels)]
        self.layers = [DenseLayer(c_in, c_out, rng, f"classifier.{i}")
                       for i, (c_in, c_out) in enumerate(zip(sizes[:-1], sizes[1:]))]

    def parameters(self) -> List[Tensor]:
        return [t for layer in self.layers for t in (layer.weight, layer.bias)]

    def logits(self, x) -> Tensor:
        h = x if isinstance(x, Tensor) else Tensor(x)
        for i, layer in enumerate(self.layers):
            h = layer(h)
            if i < len(self.layers) - 1:
                h = silu(h)
        return h

    def targets(self, y) -> np.ndarray:
        try:
            return np.array([self._index[int(label)] for label in y], dtype=np.int64)
        except KeyError as exc:
            raise UnknownLabelError(f"label {exc.args[0]} is outside the classifier head {self.labels}") from None

    def predict(self, x) -> np.ndarray:
        with no_grad():
            scores = self.logits(np.atleast_2d(np.asarray(x, dtype=np.float64))).data
        return np.asarray(self.labels)[scores.argmax(axis=1)]


def classifier_train(x, y, cfg: Optional[ClassifierSection] = None, seed: int = 0,
                     labels: Optional[Sequence[int]] = None) -> ClassifierNet:
    """Fresh classifier fitted with SGD (momentum, weight decay, optional one-cycle)"""
    cfg = cfg or ClassifierSection()
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.asarray(y, dtype=np.int64)
    if x.shape[0] == 0:
        raise DataError("classifier_train on an empty dataset")
    rng = np.random.default_rng(seed)
    net = ClassifierNet(x.shape[1], labels if labels is not None else np.unique(y), cfg.hidden_width,
                        cfg.hidden_layers, rng)
    targets = net.targets(y)
    batches = math.ceil(x.shape[0] / cfg.batch_size)
    optimizer = SGD(net.parameters(), lr=cfg.lr, momentum=cfg.momentum, weight_decay=cfg.weight_decay,
                    total_steps=cfg.epochs * batches if cfg.one_cycle else None,
                    max_lr=cfg.max_lr if cfg.one_cycle else None)

    for epoch in tqdm(range(cfg.epochs), desc="classifier", disable=not settings.SHOW_PROGRESS, leave=False):
        order = rng.permutation(x.shape[0])
        total = 0.0
        for b in range(batches):
            index = order[b * cfg.batch_size:(b + 1) * cfg.batch_size]
            optimizer.zero_grad()
            with recording():
                loss = softmax_cross_entropy(net.logits(x[index]), targets[index])
                backward(loss)
            optimizer.step()
            total += loss.item() * index.size
        logger.debug("classifier epoch %d: loss %.4f", epoch, total / x.shape[0])
    return net


def classifier_eval(net: ClassifierNet, x, y) -> float:
    """Accuracy in percent"""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.asarray(y, dtype=np.int64)
    if y.size == 0:
        raise DataError("classifier_eval on an empty test set")
    net.targets(y)
    return 100.0 * float(np.mean(net.predict(x) == y))
