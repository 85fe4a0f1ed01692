"""
Pydantic schemas for diagnostics, metrics and run manifests
"""
from typing import Dict, List, Optional

from pydantic import BaseModel, Field

from funlora.config.settings import ARTIFACT_VERSION, METRICS_SCHEMA_VERSION


# Diagnostics
class RankRow(BaseModel):
    layer_index: int
    class_label: int
    rank: int
    distinct_ratio: float


class RankReport(BaseModel):
    rows: List[RankRow] = []
    per_class_max: Dict[int, int] = {}
    per_class_mean: Dict[int, float] = {}
    max_rank: float = 0.0
    mean_rank: float = 0.0
    peak_rank: int = 0


class ImportanceRow(BaseModel):
    layer_index: int
    class_label: int
    importance: float = Field(..., ge=0.0)
    # one square-root-shared adapter per class, not a layer
    shared: bool = False


class LayerImportance(BaseModel):
    layer_index: int
    importance: float
    std: float


class ImportanceReport(BaseModel):
    rows: List[ImportanceRow] = []
    layers: List[LayerImportance] = []

    def averages(self) -> Dict[int, float]:
        return {layer.layer_index: layer.importance for layer in self.layers}


class PonderationRow(BaseModel):
    layer_index: int
    class_label: int
    i: int
    alpha_i: float
    omega_i: Optional[float] = None


class EpochRank(BaseModel):
    epoch: int
    max_rank: float
    mean_rank: float


# Continual-learning metrics
class TaskMetrics(BaseModel):
    task_index: int
    labels: List[int]
    accuracy: float = Field(..., ge=0.0, le=100.0)
    average_accuracy: float
    generative_samples: int
    adapter_parameters: int
    synthetic_per_class: Optional[int] = None
    realized_nfe: Optional[int] = None
    wall_times: Dict[str, float] = {}


class MetricsRecord(BaseModel):
    schema_version: int = METRICS_SCHEMA_VERSION
    artifact_version: str = ARTIFACT_VERSION
    run: str = "funlora"
    seed: int
    config_hash: str
    tasks: List[TaskMetrics] = []
    ppc: int = 0
    aa: Optional[float] = None
    aia: Optional[float] = None
    la: Optional[float] = None
    wall_times: Dict[str, float] = {}

    @property
    def accuracies(self) -> List[float]:
        return [task.accuracy for task in self.tasks]


class BoundsRecord(BaseModel):
    schema_version: int = METRICS_SCHEMA_VERSION
    seed: int
    config_hash: str
    multitask_classifier: float
    multitask_generative: float
    vanilla_conditioning: float
    wall_times: Dict[str, float] = {}


class SeedSummary(BaseModel):
    schema_version: int = METRICS_SCHEMA_VERSION
    seeds: List[int]
    la_mean: float
    la_std: float
    aia_mean: float
    aia_std: float


class NfeSweepRow(BaseModel):
    method: str
    nfe: int
    steps: Optional[int] = None
    factor: int
    # accuracy of the checkpoint's classifier on every class seen so far
    acc_final: float
    realized_nfe: int
    sampling_seconds: float


# Forgetting audit
class AuditViolation(BaseModel):
    path: str
    detail: str


class AuditReport(BaseModel):
    before_task: int
    after_task: int
    changed_labels: List[int] = []
    violations: List[AuditViolation] = []

    @property
    def passed(self) -> bool:
        return not self.violations


class AuditLog(BaseModel):
    """Audits of every consecutive task pair of one run"""

    seed: int
    config_hash: Optional[str] = None
    reports: List[AuditReport] = []

    @property
    def passed(self) -> bool:
        return all(report.passed for report in self.reports)


# Runner bookkeeping
class RunManifest(BaseModel):
    command: str
    config_hash: Optional[str] = None
    seeds: List[int] = []
    artifact_version: str = ARTIFACT_VERSION
    wall_times: Dict[str, float] = {}
    outputs: List[str] = []
    selection: Optional[List[int]] = None
