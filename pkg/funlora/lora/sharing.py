"""
Parameter reuse across an adapter: ratio-k reduction and the square-root
factorization that shares one functional matrix between all adapted layers.
"""
import math
from typing import Dict, Mapping, Tuple

from funlora.autograd import Tensor, as_tensor, getitem, reshape
from funlora.exceptions import ShapeError
from funlora.lora.functional import Adapter, expand_duplicate, init_adapter, reduced_dims

# Layer index under which a class's shared adapter is stored
SHARED_LAYER = -1

__all__ = [
    "SHARED_LAYER",
    "expand_duplicate",
    "layer_segments",
    "reduce_ratio_k",
    "reduced_dims",
    "slice_for_layer",
    "sqrt_factorize",
]


def reduce_ratio_k(kind, c_out: int, c_in: int, k: int, **adapter_kwargs) -> Adapter:
    """Adapter whose factors hold ceil(C_out/k) and ceil(C_in/k) entries"""
    return init_adapter(kind, c_out, c_in, ratio_k=k, **adapter_kwargs)


def sqrt_factorize(n: int) -> int:
    """Length of the shared A and B for n adapted weights"""
    if n < 1:
        raise ValueError(f"need at least one adapted weight, got {n}")
    d = math.isqrt(n)
    if d * d < n:
        d += 1
    assert d * d >= n
    return d


def layer_segments(layer_dims: Mapping[int, Tuple[int, int]]) -> Dict[int, Tuple[int, int]]:
    """[start, end) of every layer inside the flattened shared matrix, ascending layer order"""
    segments, start = {}, 0
    for layer in sorted(layer_dims):
        c_out, c_in = layer_dims[layer]
        segments[layer] = (start, start + c_out * c_in)
        start += c_out * c_in
    return segments


def slice_for_layer(F_flat, layer: int, layer_dims: Mapping[int, Tuple[int, int]]) -> Tensor:
    """The C_out x C_in block of a flattened shared matrix consumed by one layer"""
    F_flat = as_tensor(F_flat)
    segments = layer_segments(layer_dims)
    if layer not in segments:
        raise ShapeError(f"layer {layer} is not part of the shared factorization")
    start, end = segments[layer]
    if end > F_flat.size:
        raise ShapeError(f"shared matrix has {F_flat.size} entries, layer {layer} needs up to {end}")
    block = getitem(reshape(F_flat, (F_flat.size,)), slice(start, end))
    return reshape(block, layer_dims[layer])


def shared_total(layer_dims: Mapping[int, Tuple[int, int]]) -> int:
    return sum(c_out * c_in for c_out, c_in in layer_dims.values())
