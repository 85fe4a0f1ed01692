"""
Adapter store: one adapter per (layer, class) over the adapted layers
"""
import logging
from dataclasses import dataclass
from typing import Dict, Iterator, List, Mapping, Optional, Set, Tuple

import numpy as np

from funlora.autograd import Tensor, reshape
from funlora.exceptions import FrozenParameterError, UnknownLabelError
from funlora.lora.functional import Adapter, CombineOp, FunctionalKind, funlora_matrix, init_adapter
from funlora.lora.sharing import SHARED_LAYER, shared_total, slice_for_layer, sqrt_factorize

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AdapterSpec:
    """How every adapter of a store is built"""

    kind: FunctionalKind = FunctionalKind.COS
    combine: CombineOp = CombineOp.MUL
    p: int = 10
    trainable_hyper: bool = True
    calibrate: bool = True
    ratio_k: int = 1
    sqrt_shared: bool = False


class AdapterStore:
    def __init__(self, layer_dims: Mapping[int, Tuple[int, int]], spec: Optional[AdapterSpec] = None):
        self.layer_dims: Dict[int, Tuple[int, int]] = {int(l): tuple(d) for l, d in sorted(layer_dims.items())}
        self.spec = spec or AdapterSpec()
        self._adapters: Dict[Tuple[int, int], Adapter] = {}
        self.completed: Set[int] = set()

    @property
    def adapted_layers(self) -> Tuple[int, ...]:
        return tuple(self.layer_dims)

    @property
    def storage_layers(self) -> Tuple[int, ...]:
        """Layer keys adapters are stored under"""
        return (SHARED_LAYER,) if self.spec.sqrt_shared else self.adapted_layers

    def __len__(self) -> int:
        return len(self._adapters)

    def __contains__(self, label: int) -> bool:
        return any(key[1] == label for key in self._adapters)

    def labels(self) -> List[int]:
        return sorted({label for _, label in self._adapters})

    def add_class(self, label: int, rng: Optional[np.random.Generator] = None) -> List[Adapter]:
        """Create the adapters of a new class on every adapted layer"""
        if label in self:
            raise FrozenParameterError(f"class {label} already has adapters")
        spec = self.spec
        created = []
        for layer in self.storage_layers:
            if layer == SHARED_LAYER:
                d = sqrt_factorize(shared_total(self.layer_dims))
                c_out, c_in = d, d
            else:
                c_out, c_in = self.layer_dims[layer]
            adapter = init_adapter(spec.kind, c_out, c_in, spec.combine, calibrate=spec.calibrate, p=spec.p,
                                   trainable_hyper=spec.trainable_hyper, class_label=label, layer_index=layer,
                                   ratio_k=1 if layer == SHARED_LAYER else spec.ratio_k, rng=rng)
            self._adapters[(layer, label)] = adapter
            created.append(adapter)
        logger.debug("Created %d adapters for class %d", len(created), label)
        return created

    def put(self, adapter: Adapter) -> None:
        """Insert a restored adapter"""
        self._adapters[(adapter.layer_index, adapter.class_label)] = adapter

    def get(self, layer: int, label: int) -> Adapter:
        try:
            return self._adapters[(layer, label)]
        except KeyError:
            raise UnknownLabelError(f"no adapter for class {label} on layer {layer}") from None

    def adapters(self, label: Optional[int] = None) -> Iterator[Adapter]:
        """Adapters in (layer, class) order"""
        for key in sorted(self._adapters):
            if label is None or key[1] == label:
                yield self._adapters[key]

    def parameters(self, label: int) -> List[Tensor]:
        if label in self.completed:
            raise FrozenParameterError(f"class {label} belongs to a completed task; its adapters are immutable")
        if label not in self:
            raise UnknownLabelError(f"no adapters for class {label}")
        params = []
        for adapter in self.adapters(label):
            params.extend(adapter.parameters())
        return params

    def mark_completed(self, labels) -> None:
        for label in labels:
            for adapter in self.adapters(label):
                adapter.freeze()
            self.completed.add(int(label))

    def matrices(self, label: int) -> Dict[int, Tensor]:
        """F for every adapted layer of one class"""
        if label not in self:
            raise UnknownLabelError(f"no adapters for class {label}")
        if self.spec.sqrt_shared:
            F = funlora_matrix(self.get(SHARED_LAYER, label))
            flat = reshape(F, (F.size,))
            return {layer: slice_for_layer(flat, layer, self.layer_dims) for layer in self.adapted_layers}
        return {layer: funlora_matrix(self.get(layer, label)) for layer in self.adapted_layers}
