"""
Pydantic schema of the checkpoint document
"""
from typing import Any, Dict, List, Optional

from pydantic import BaseModel

from funlora.config.settings import ARTIFACT_VERSION, CHECKPOINT_FORMAT_VERSION
from funlora.lora.functional import CombineOp, FunctionalKind


class AdapterEntry(BaseModel):
    layer: int
    label: int
    kind: FunctionalKind
    combine: CombineOp
    target_shape: List[int]
    A: List[float]
    B: List[float]
    alphas: Optional[List[float]] = None
    hyper: Optional[List[float]] = None
    trainable_hyper: bool = False
    calibrated: bool = False
    ratio_k: int = 1


class Architecture(BaseModel):
    input_dim: int
    layers: Dict[str, Any]
    adapter: Dict[str, Any]
    adapted_layers: List[int]


class CheckpointDocument(BaseModel):
    format_version: int = CHECKPOINT_FORMAT_VERSION
    artifact_version: str = ARTIFACT_VERSION
    config_hash: Optional[str] = None
    task_index: int = 0
    epoch: Optional[int] = None
    architecture: Architecture
    # Nested lists of floats keyed by parameter path
    base: Dict[str, Any]
    base_frozen: bool = False
    adapters: List[AdapterEntry] = []
    completed_labels: List[int] = []
    task1_labels: List[int] = []
