"""
Pydantic schemas for experiment configuration documents

Every section rejects unknown keys so that a typo in an ablation config fails
loudly instead of silently running the default.
"""
from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, Field, field_validator

from funlora.lora.functional import CombineOp, FunctionalKind


class StreamFamily(str, Enum):
    GAUSSIAN = "gaussian"
    RINGS = "rings"


class SolverMethod(str, Enum):
    EULER = "euler"
    RK4 = "rk4"
    DOPRI5 = "dopri5"


class StreamSection(BaseModel):
    family: StreamFamily = StreamFamily.GAUSSIAN
    tasks: int = Field(5, ge=1)
    classes_per_task: int = Field(2, ge=1)
    dim: int = Field(2, ge=1)
    train_per_class: int = Field(500, ge=1)
    test_per_class: int = Field(200, ge=1)
    center_radius: float = Field(5.0, gt=0)
    sigma: float = Field(0.5, gt=0)
    ring_gap: float = Field(1.0, gt=0)

    class Config:
        extra = "forbid"


class AdapterSection(BaseModel):
    kind: FunctionalKind = FunctionalKind.COS
    combine: CombineOp = CombineOp.MUL
    p: int = Field(10, ge=1)
    trainable_hyper: bool = True
    calibrate: bool = True
    ratio_k: int = Field(1, ge=1)
    sqrt_shared: bool = False

    class Config:
        extra = "forbid"


class LayersSection(BaseModel):
    hidden_width: int = Field(64, ge=1)
    hidden_layers: int = Field(4, ge=2)
    time_features: int = Field(8, ge=2)
    embed_dim: int = Field(8, ge=1)
    # None adapts the last two hidden-to-hidden layers
    adapted: Optional[List[int]] = None
    # adapted layers become s x s kernels over hidden_width / s^2 channels
    conv: bool = False
    conv_kernel: int = Field(2, ge=1, validate_default=True)

    class Config:
        extra = "forbid"

    @field_validator("time_features")
    @classmethod
    def check_even_time_features(cls, value):
        if value % 2:
            raise ValueError("time_features must be even (sin/cos pairs)")
        return value

    @field_validator("adapted")
    @classmethod
    def check_adapted(cls, value, info):
        if value is None:
            return value
        hidden_pairs = list(range(1, info.data.get("hidden_layers", 4)))
        bad = [layer for layer in value if layer not in hidden_pairs]
        if bad or not value:
            raise ValueError(f"must name hidden-to-hidden layers in {hidden_pairs}, got {value}")
        return sorted(set(value))

    @field_validator("conv_kernel")
    @classmethod
    def check_conv_kernel(cls, value, info):
        width = info.data.get("hidden_width", 64)
        if info.data.get("conv") and width % (value * value):
            raise ValueError(f"hidden_width {width} is not divisible by {value}x{value}")
        return value


class SolverConfig(BaseModel):
    method: SolverMethod = SolverMethod.DOPRI5
    # used by euler and rk4 only
    steps: int = Field(20, ge=1)
    abs_tol: float = Field(1e-4, gt=0)
    rel_tol: float = Field(1e-4, gt=0)
    initial_step: float = Field(1.0 / 50.0, gt=0)
    min_step: float = Field(1e-10, gt=0)

    class Config:
        extra = "forbid"


class PhaseSection(BaseModel):
    """One generative training phase"""

    epochs: int = Field(..., ge=0)
    lr: float = Field(..., gt=0)
    batch_size: int = Field(128, ge=1)
    warmup_steps: int = Field(0, ge=0)
    ema_decay: float = Field(0.9995, gt=0, lt=1)
    ema_start: int = Field(0, ge=0)
    snapshot_every: Optional[int] = Field(None, ge=1)

    class Config:
        extra = "forbid"


class Task1Section(PhaseSection):
    epochs: int = Field(200, ge=0)
    lr: float = Field(2e-3, gt=0)
    warmup_steps: int = Field(100, ge=0)
    ema_decay: float = Field(0.9995, gt=0, lt=1)
    ema_start: int = Field(80, ge=0)


class IncrementalSection(PhaseSection):
    epochs: int = Field(120, ge=0)
    lr: float = Field(1e-2, gt=0)
    ema_decay: float = Field(0.995, gt=0, lt=1)
    ema_start: int = Field(40, ge=0)


class ClassifierSection(BaseModel):
    hidden_width: int = Field(32, ge=1)
    hidden_layers: int = Field(2, ge=1)
    epochs: int = Field(30, ge=1)
    lr: float = Field(0.05, gt=0)
    momentum: float = Field(0.9, ge=0, lt=1)
    weight_decay: float = Field(5e-4, ge=0)
    batch_size: int = Field(100, ge=1)
    one_cycle: bool = False
    max_lr: float = Field(0.1, gt=0)

    class Config:
        extra = "forbid"


class SamplingSection(BaseModel):
    resample_factor: int = Field(1, ge=1)

    class Config:
        extra = "forbid"


class RunSection(BaseModel):
    seed: int = 0
    bounds: bool = False
    rank_tol: float = Field(1e-8, gt=0, lt=1)
    save_checkpoints: bool = True

    class Config:
        extra = "forbid"


class ExperimentConfig(BaseModel):
    stream: StreamSection = Field(default_factory=StreamSection)
    adapter: AdapterSection = Field(default_factory=AdapterSection)
    layers: LayersSection = Field(default_factory=LayersSection)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    task1: Task1Section = Field(default_factory=Task1Section)
    incremental: IncrementalSection = Field(default_factory=IncrementalSection)
    classifier: ClassifierSection = Field(default_factory=ClassifierSection)
    sampling: SamplingSection = Field(default_factory=SamplingSection)
    run: RunSection = Field(default_factory=RunSection)

    class Config:
        extra = "forbid"

