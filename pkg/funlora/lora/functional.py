"""
Functional LoRA matrices

An adapter holds rank-1 factors A (C_out) and B (C_in) for one class on one
layer. ``funlora_matrix`` turns them into the C_out x C_in matrix

    F = (1/p) * sum_i alpha_i * f_i(A, B)

for the circular-shift, power and cosine families, and ``combine`` merges F
with the frozen base weight.
"""
import logging
import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np

from funlora.autograd import (
    Tensor,
    abs as t_abs,
    add,
    as_tensor,
    cos,
    getitem,
    matmul,
    mul,
    pow_by,
    reshape,
    scale,
    sign,
)
from funlora.exceptions import ShapeError

logger = logging.getLogger(__name__)

CALIBRATION_EPS = 1e-6


class FunctionalKind(str, Enum):
    VANILLA_ADD = "vanilla_add"
    VANILLA_MUL = "vanilla_mul"
    RSHIFT = "rshift"
    POW = "pow"
    COS = "cos"

    @property
    def functional(self) -> bool:
        return self in (FunctionalKind.RSHIFT, FunctionalKind.POW, FunctionalKind.COS)

    @property
    def has_hyper(self) -> bool:
        """Whether the family carries per-function hyperparameters (omega or delta)"""
        return self in (FunctionalKind.POW, FunctionalKind.COS)


class CombineOp(str, Enum):
    ADD = "add"
    MUL = "mul"
    MUL_ADD = "mul_add"


@dataclass
class Adapter:
    """Per-class, per-layer functional LoRA parameters"""

    kind: FunctionalKind
    combine: CombineOp
    A: Tensor
    B: Tensor
    class_label: int
    layer_index: int
    target_shape: Tuple[int, int]
    alphas: Optional[Tensor] = None
    hyper: Optional[Tensor] = None
    trainable_hyper: bool = False
    calibrated: bool = False
    ratio_k: int = 1
    frozen: bool = field(default=False, compare=False)

    @property
    def p(self) -> int:
        return 0 if self.alphas is None else self.alphas.size

    def parameters(self) -> List[Tensor]:
        """Tensors trained when the adapter's class is learned"""
        params = [self.A, self.B]
        if self.alphas is not None:
            params.append(self.alphas)
        if self.hyper is not None and self.trainable_hyper:
            params.append(self.hyper)
        return params

    def freeze(self) -> None:
        self.frozen = True
        for t in (self.A, self.B, self.alphas, self.hyper):
            if t is not None:
                t.requires_grad = False
                t.zero_grad()


def _warn(message: str) -> None:
    logger.warning(message)
    warnings.warn(message, RuntimeWarning, stacklevel=3)


def rshift(M, i: int) -> Tensor:
    """Right circular shift: the last i entries move to the front"""
    M = as_tensor(M)
    m = M.size
    if m == 0:
        raise ShapeError("rshift of an empty vector")
    if i < 0:
        raise ValueError(f"shift must be non-negative, got {i}")
    index = (np.arange(m) - i) % m
    return getitem(reshape(M, (m,)), index)


def outer(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return matmul(reshape(a, (a.size, 1)), reshape(b, (1, b.size)))


def f_rshift(A, B, i: int) -> Tensor:
    return outer(rshift(A, i), rshift(B, i))


def _weighted_sum(terms: List[Tensor], alphas: Tensor) -> Tensor:
    total = None
    for i, term in enumerate(terms):
        weighted = mul(getitem(alphas, i), term)
        total = weighted if total is None else add(total, weighted)
    return scale(total, 1.0 / len(terms))


def _functional_terms(adapter: Adapter) -> List[Tensor]:
    p = adapter.p
    if adapter.kind is FunctionalKind.RSHIFT:
        return [f_rshift(adapter.A, adapter.B, i) for i in range(1, p + 1)]
    product = outer(adapter.A, adapter.B)
    if adapter.kind is FunctionalKind.POW:
        if adapter.trainable_hyper:
            magnitude, direction = t_abs(product), sign(product)
            return [mul(direction, pow_by(magnitude, getitem(adapter.hyper, i))) for i in range(p)]
        return [pow_by(product, float(d)) for d in adapter.hyper.data]
    return [cos(mul(getitem(adapter.hyper, i), product)) for i in range(p)]


def expand_duplicate(F_reduced: Tensor, target_shape: Tuple[int, int], k: int) -> Tensor:
    """Repeat each entry k times along both axes, truncated to target_shape"""
    if k < 1:
        raise ValueError(f"ratio k must be >= 1, got {k}")
    F_reduced = as_tensor(F_reduced)
    rows = np.minimum(np.arange(target_shape[0]) // k, F_reduced.shape[0] - 1)
    cols = np.minimum(np.arange(target_shape[1]) // k, F_reduced.shape[1] - 1)
    if k == 1 and F_reduced.shape == tuple(target_shape):
        return F_reduced
    return getitem(F_reduced, np.ix_(rows, cols))


def funlora_matrix(adapter: Adapter) -> Tensor:
    """Differentiable F_y at the adapter's target shape"""
    if adapter.kind.functional:
        F = _weighted_sum(_functional_terms(adapter), adapter.alphas)
    else:
        F = outer(adapter.A, adapter.B)
    if adapter.ratio_k > 1:
        F = expand_duplicate(F, adapter.target_shape, adapter.ratio_k)
    return F


def reduced_dims(c_out: int, c_in: int, k: int) -> Tuple[int, int]:
    """Factor lengths under ratio-k sharing; clamps at one entry"""
    if k < 1:
        raise ValueError(f"ratio k must be >= 1, got {k}")
    return max(1, math.ceil(c_out / k)), max(1, math.ceil(c_in / k))


def _unit_terms(kind: FunctionalKind, hyper: np.ndarray, p: int) -> np.ndarray:
    """f_i evaluated on an all-ones product"""
    if kind is FunctionalKind.COS:
        return np.cos(hyper)
    return np.ones(p)


def init_adapter(kind: FunctionalKind, c_out: int, c_in: int, combine: CombineOp, calibrate: bool = True,
                 p: int = 10, trainable_hyper: bool = False, class_label: int = 0, layer_index: int = 0,
                 ratio_k: int = 1, rng: Optional[np.random.Generator] = None) -> Adapter:
    """Fresh adapter following the ones (Mul) or zero-update (Add, MulAdd) convention"""
    kind, combine = FunctionalKind(kind), CombineOp(combine)
    if c_out < 1 or c_in < 1:
        raise ShapeError(f"adapter dims must be positive, got {c_out}x{c_in}")
    a_len, b_len = reduced_dims(c_out, c_in, ratio_k)
    if kind.functional and p < 1:
        raise ValueError(f"functional adapters need p >= 1, got {p}")
    if kind.functional and p >= min(c_out, c_in):
        _warn(f"p={p} >= min({c_out}, {c_in}) on layer {layer_index}: rank claims do not apply")

    if combine is CombineOp.MUL:
        A, B = np.ones(a_len), np.ones(b_len)
    else:
        rng = rng if rng is not None else np.random.default_rng(0)
        A, B = rng.standard_normal(a_len) / math.sqrt(c_out), np.zeros(b_len)

    alphas = hyper = None
    calibrated = False
    if kind.functional:
        alphas = np.ones(p)
        hyper = np.arange(1, p + 1, dtype=np.float64) if kind.has_hyper else None
        if combine is CombineOp.MUL and calibrate:
            divisor = _unit_terms(kind, hyper, p).sum()
            if abs(divisor) < CALIBRATION_EPS:
                _warn(f"calibration divisor {divisor:.3e} too small on layer {layer_index}; "
                      "using alpha = 1, initial update is not the identity")
            else:
                alphas = np.full(p, p / divisor)
                calibrated = True
        elif combine is not CombineOp.MUL and kind is FunctionalKind.COS:
            # cos(0) = 1, so a zero B alone does not zero the update
            alphas = np.zeros(p)
            _warn(f"cos family with {combine.value} combine: alpha starts at 0 for a zero initial update")

    trainable_hyper = trainable_hyper and kind.has_hyper
    return Adapter(
        kind=kind,
        combine=combine,
        A=Tensor(A, requires_grad=True, name=f"A[{layer_index},{class_label}]"),
        B=Tensor(B, requires_grad=True, name=f"B[{layer_index},{class_label}]"),
        class_label=class_label,
        layer_index=layer_index,
        target_shape=(c_out, c_in),
        alphas=None if alphas is None else Tensor(alphas, requires_grad=True),
        hyper=None if hyper is None else Tensor(hyper, requires_grad=trainable_hyper),
        trainable_hyper=trainable_hyper,
        calibrated=calibrated or (not kind.functional and combine is CombineOp.MUL),
        ratio_k=ratio_k,
    )


def combine(W0, F, op: CombineOp) -> Tensor:
    """Effective weight from a base weight and a functional matrix"""
    W0, F = as_tensor(W0), as_tensor(F)
    if W0.shape != F.shape:
        raise ShapeError(f"combine: base {W0.shape} and update {F.shape} differ")
    op = CombineOp(op)
    if op is CombineOp.ADD:
        return add(W0, F)
    if op is CombineOp.MUL:
        return mul(W0, F)
    return mul(W0, add(1.0, F))


def conv_modulate(W0, F) -> Tensor:
    """Scale every s x s kernel (o, i) of a C_out x C_in x s x s weight by F[o, i]"""
    W0, F = as_tensor(W0), as_tensor(F)
    if W0.ndim != 4 or F.ndim != 2 or W0.shape[:2] != F.shape:
        raise ShapeError(f"conv_modulate: kernel {W0.shape} does not match modulation {F.shape}")
    c_out, c_in, s1, s2 = W0.shape
    pairs, taps = c_out * c_in, s1 * s2
    tiled = matmul(reshape(F, (pairs, 1)), Tensor(np.ones((1, taps))))
    return reshape(mul(reshape(W0, (pairs, taps)), tiled), W0.shape)


def conv_combine(W0, F, op: CombineOp) -> Tensor:
    """``combine`` for kernels: F[o, i] applies to every tap of kernel (o, i)"""
    W0 = as_tensor(W0)
    tiled = conv_modulate(Tensor(np.ones(W0.shape)), F)
    return combine(W0, tiled, op)
