"""
Functional LoRA: per-class rank-1 adapters with functionally increased rank
"""
from funlora.lora.functional import (
    Adapter,
    CombineOp,
    FunctionalKind,
    combine,
    conv_combine,
    conv_modulate,
    expand_duplicate,
    f_rshift,
    funlora_matrix,
    init_adapter,
    rshift,
)
from funlora.lora.store import AdapterSpec, AdapterStore

__all__ = [
    "Adapter", "AdapterSpec", "AdapterStore", "CombineOp", "FunctionalKind", "combine", "conv_combine", "conv_modulate",
    "expand_duplicate", "f_rshift", "funlora_matrix", "init_adapter", "rshift",
]
