"""
Conditional vector-field network v(t, x, y)

Input features are [x, sinusoidal(t), class embedding]. Task-1 classes (and
classes added under vanilla conditioning) are conditioned through a learned
embedding; every other class is conditioned only through its adapters on the
adapted layers, with a zero embedding.
"""
import logging
import math
from typing import Dict, Iterable, List, Optional

import numpy as np

from funlora.autograd import Tensor, add, as_tensor, concat, getitem, matmul, no_grad, reshape, silu, transpose
from funlora.exceptions import ConfigError, FrozenParameterError, UnknownLabelError
from funlora.lora.functional import CombineOp, combine, conv_combine
from funlora.lora.store import AdapterSpec, AdapterStore
from funlora.schemas.experiment_schemas import LayersSection

logger = logging.getLogger(__name__)

TASK1 = "task1"
INCREMENTAL = "incremental"
EMBEDDING = "embedding"


def time_features(t, count: int) -> np.ndarray:
    """[sin(2 pi f t), cos(2 pi f t)] for f = 1/2, 1, 2, ..."""
    t = np.asarray(t, dtype=np.float64).reshape(-1, 1)
    freqs = 2.0 ** (np.arange(count // 2) - 1.0)
    angles = 2.0 * math.pi * t * freqs
    return np.concatenate([np.sin(angles), np.cos(angles)], axis=1)


def _ones_column(rows: int) -> Tensor:
    return Tensor(np.ones((rows, 1)))


class DenseLayer:
    """y = h W^T + b with W of shape C_out x C_in"""

    def __init__(self, c_in: int, c_out: int, rng: np.random.Generator, name: str):
        bound = 1.0 / math.sqrt(c_in)
        self.weight = Tensor(rng.uniform(-bound, bound, (c_out, c_in)), requires_grad=True, name=f"{name}.weight")
        self.bias = Tensor(rng.uniform(-bound, bound, c_out), requires_grad=True, name=f"{name}.bias")

    @property
    def adapter_dims(self):
        return self.weight.shape

    def effective_weight(self, F: Optional[Tensor], op: CombineOp) -> Tensor:
        return self.weight if F is None else combine(self.weight, F, op)

    def __call__(self, h: Tensor, F: Optional[Tensor] = None, op: CombineOp = CombineOp.MUL) -> Tensor:
        W = self.effective_weight(F, op)
        bias = matmul(_ones_column(h.shape[0]), reshape(self.bias, (1, self.bias.size)))
        return add(matmul(h, transpose(W)), bias)


class TinyConvLayer(DenseLayer):
    """An s x s convolution read at a single position

    The C_in * s * s input features are the s x s patch of each input
    channel; adapters act on the C_out x C_in kernel grid.
    """

    def __init__(self, c_in_features: int, c_out: int, kernel: int, rng: np.random.Generator, name: str):
        taps = kernel * kernel
        if c_in_features % taps:
            raise ConfigError(f"{c_in_features} features do not split into {kernel}x{kernel} patches",
                              key_path="layers.conv_kernel")
        c_in = c_in_features // taps
        bound = 1.0 / math.sqrt(c_in_features)
        self.kernel = kernel
        self.weight = Tensor(rng.uniform(-bound, bound, (c_out, c_in, kernel, kernel)), requires_grad=True,
                             name=f"{name}.weight")
        self.bias = Tensor(rng.uniform(-bound, bound, c_out), requires_grad=True, name=f"{name}.bias")

    @property
    def adapter_dims(self):
        return self.weight.shape[:2]

    def effective_weight(self, F: Optional[Tensor], op: CombineOp) -> Tensor:
        W = self.weight if F is None else conv_combine(self.weight, F, op)
        c_out = W.shape[0]
        return reshape(W, (c_out, W.size // c_out))


class VectorFieldNet:
    def __init__(self, input_dim: int, layers: LayersSection, adapter_spec: AdapterSpec,
                 rng: Optional[np.random.Generator] = None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.input_dim = input_dim
        self.config = layers
        self.time_dim = layers.time_features
        self.embed_dim = layers.embed_dim
        width, depth = layers.hidden_width, layers.hidden_layers
        if layers.adapted is None:
            self.adapted_layers = list(range(max(1, depth - 2), depth))
        else:
            self.adapted_layers = list(layers.adapted)

        sizes = [input_dim + self.time_dim + self.embed_dim] + [width] * depth + [input_dim]
        self.layers: List[DenseLayer] = []
        for index, (c_in, c_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            name = f"layers.{index}"
            if layers.conv and index in self.adapted_layers:
                self.layers.append(TinyConvLayer(c_in, c_out, layers.conv_kernel, rng, name))
            else:
                self.layers.append(DenseLayer(c_in, c_out, rng, name))

        self.store = AdapterStore({l: tuple(self.layers[l].adapter_dims) for l in self.adapted_layers},
                                  adapter_spec)
        self.embeddings: Dict[int, Tensor] = {}
        self.task1_labels: List[int] = []
        self.base_frozen = False
        self._embed_rng = rng

    # Class registration
    def add_task1_class(self, label: int) -> None:
        if self.base_frozen:
            raise FrozenParameterError("base parameters are frozen; task-1 classes can no longer be added")
        self._add_embedding(label)
        self.task1_labels.append(label)

    def add_embedding_class(self, label: int) -> None:
        """Condition a later class through an embedding only (vanilla conditioning)"""
        self._add_embedding(label)

    def add_adapter_class(self, label: int, rng: Optional[np.random.Generator] = None) -> None:
        if label in self.embeddings:
            raise FrozenParameterError(f"class {label} is embedding-conditioned and cannot get adapters")
        self.store.add_class(label, rng)

    def _add_embedding(self, label: int) -> None:
        if label in self.embeddings or label in self.store:
            raise FrozenParameterError(f"class {label} is already registered")
        values = 0.1 * self._embed_rng.standard_normal(self.embed_dim)
        self.embeddings[label] = Tensor(values, requires_grad=True, name=f"embeddings.{label}")

    @property
    def labels(self) -> List[int]:
        return sorted(set(self.embeddings) | set(self.store.labels()))

    # Parameters
    def base_parameters(self) -> Dict[str, Tensor]:
        """Named base tensors: layer weights and biases, then class embeddings"""
        named = {}
        for index, layer in enumerate(self.layers):
            named[f"layers.{index}.weight"] = layer.weight
            named[f"layers.{index}.bias"] = layer.bias
        for label in sorted(self.embeddings):
            named[f"embeddings.{label}"] = self.embeddings[label]
        return named

    def trainable_params(self, phase: str, label: Optional[int] = None) -> List[Tensor]:
        """Task 1: every base tensor. Incremental: the class's adapters. Embedding: the class's embedding."""
        if phase == TASK1:
            if self.base_frozen:
                raise FrozenParameterError("base parameters are frozen after task 1")
            return list(self.base_parameters().values())
        if phase == INCREMENTAL:
            return self.store.parameters(label)
        if phase == EMBEDDING:
            embedding = self.embeddings.get(label)
            if embedding is None:
                raise UnknownLabelError(f"class {label} has no embedding")
            if not embedding.requires_grad:
                raise FrozenParameterError(f"embedding of class {label} is frozen")
            return [embedding]
        raise ValueError(f"unknown training phase '{phase}'")

    def freeze_base(self) -> None:
        for tensor in self.base_parameters().values():
            tensor.requires_grad = False
            tensor.zero_grad()
        self.base_frozen = True

    def complete_labels(self, labels: Iterable[int]) -> None:
        """Freeze everything learned for these classes"""
        labels = list(labels)
        for label in labels:
            if label in self.embeddings:
                self.embeddings[label].requires_grad = False
                self.embeddings[label].zero_grad()
        self.store.mark_completed([label for label in labels if label in self.store])

    # Forward
    def _embedding_rows(self, label: int, rows: int) -> Tensor:
        embedding = self.embeddings.get(label)
        if embedding is None:
            return Tensor(np.zeros((rows, self.embed_dim)))
        return matmul(_ones_column(rows), reshape(embedding, (1, self.embed_dim)))

    def _forward_class(self, t: np.ndarray, x: Tensor, label: int) -> Tensor:
        if label not in self.embeddings and label not in self.store:
            raise UnknownLabelError(f"class {label} has neither an embedding nor adapters")
        rows = x.shape[0]
        h = concat([x, Tensor(time_features(t, self.time_dim)), self._embedding_rows(label, rows)], axis=1)
        matrices = self.store.matrices(label) if label in self.store else {}
        op = self.store.spec.combine
        last = len(self.layers) - 1
        for index, layer in enumerate(self.layers):
            h = layer(h, matrices.get(index), op)
            if index < last:
                h = silu(h)
        return h

    def forward(self, t, x, y) -> Tensor:
        """Velocity for every row of x; rows are grouped by label internally"""
        x = as_tensor(x)
        if x.ndim == 1:
            x = reshape(x, (1, x.size))
        rows = x.shape[0]
        t = np.broadcast_to(np.asarray(t, dtype=np.float64), (rows,))
        y = np.broadcast_to(np.asarray(y, dtype=np.int64), (rows,))
        groups = sorted(set(int(v) for v in y))
        if len(groups) == 1:
            return self._forward_class(t, x, groups[0])
        outputs, order = [], []
        for label in groups:
            index = np.flatnonzero(y == label)
            outputs.append(self._forward_class(t[index], getitem(x, index), label))
            order.append(index)
        inverse = np.argsort(np.concatenate(order), kind="stable")
        return getitem(concat(outputs, axis=0), inverse)

    __call__ = forward

    def field_for(self, label: int):
        """Gradient-free numpy field (t, x) -> v for one class, for the ODE solvers"""
        if label not in self.embeddings and label not in self.store:
            raise UnknownLabelError(f"class {label} has neither an embedding nor adapters")

        def field(t: float, x: np.ndarray) -> np.ndarray:
            with no_grad():
                return self.forward(np.full(x.shape[0], t), Tensor(x), np.full(x.shape[0], label)).data

        return field
