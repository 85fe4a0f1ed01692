"""
Minimal dense tensors with reverse-mode automatic differentiation
"""
from funlora.autograd.tensor import (
    ComputationRecord,
    Tensor,
    abs,
    active_record,
    add,
    as_tensor,
    backward,
    concat,
    cos,
    elementwise,
    getitem,
    matmul,
    mul,
    no_grad,
    pow_by,
    recording,
    reduce,
    reshape,
    scale,
    sign,
    silu,
    sin,
    softmax_cross_entropy,
    sub,
    transpose,
)
from funlora.autograd.gradcheck import grad_check

__all__ = [
    "ComputationRecord", "Tensor", "abs", "active_record", "add", "as_tensor", "backward",
    "concat", "cos", "elementwise", "getitem", "grad_check", "matmul", "mul",
    "no_grad", "pow_by", "recording", "reduce", "reshape", "scale", "sign", "silu", "sin",
    "softmax_cross_entropy", "sub", "transpose",
]
