"""
Unit tests for Pydantic schemas
Pure validation: no files, no training
"""
import pytest
from pydantic import ValidationError

from funlora.config.settings import CHECKPOINT_FORMAT_VERSION, METRICS_SCHEMA_VERSION
from funlora.schemas.checkpoint_schemas import AdapterEntry, Architecture, CheckpointDocument
from funlora.schemas.experiment_schemas import (
    ClassifierSection,
    ExperimentConfig,
    IncrementalSection,
    LayersSection,
    RunSection,
    SolverConfig,
    SolverMethod,
    StreamFamily,
    StreamSection,
    Task1Section,
)
from funlora.schemas.report_schemas import AuditReport, AuditViolation, MetricsRecord, RunManifest, TaskMetrics


class TestExperimentSchemas:
    """Experiment configuration sections"""

    def test_defaults(self):
        """Default experiment: 5 x 2 gaussian classes, cos adapters, adaptive dopri5 sampling"""
        config = ExperimentConfig()
        assert config.stream.family is StreamFamily.GAUSSIAN
        assert (config.stream.tasks, config.stream.classes_per_task) == (5, 2)
        assert config.adapter.trainable_hyper
        assert config.solver.method is SolverMethod.DOPRI5
        assert config.solver.steps == 20
        assert config.sampling.resample_factor == 1

    def test_phase_defaults_differ(self):
        """Task 1 and incremental phases have their own schedules"""
        assert Task1Section().ema_decay == 0.9995
        assert IncrementalSection().ema_decay == 0.995
        assert Task1Section().warmup_steps == 100
        assert IncrementalSection().warmup_steps == 0

    def test_zero_epochs_allowed(self):
        """Zero-epoch phases are valid"""
        assert IncrementalSection(epochs=0).epochs == 0

    def test_odd_time_features(self):
        """Time features come in sin/cos pairs"""
        with pytest.raises(ValidationError):
            LayersSection(time_features=5)

    def test_adapted_layers_must_be_hidden_pairs(self):
        """Only hidden-to-hidden layers can be adapted"""
        assert LayersSection(hidden_layers=4, adapted=[3, 1, 3]).adapted == [1, 3]
        with pytest.raises(ValidationError):
            LayersSection(hidden_layers=4, adapted=[0])
        with pytest.raises(ValidationError):
            LayersSection(hidden_layers=4, adapted=[4])

    def test_conv_kernel_divides_width(self):
        """Conv layers need hidden_width divisible by s^2"""
        assert LayersSection(hidden_width=8, conv=True, conv_kernel=2).conv_kernel == 2
        with pytest.raises(ValidationError):
            LayersSection(hidden_width=10, conv=True, conv_kernel=2)

    def test_rank_tolerance_range(self):
        """rank_tol lies strictly between 0 and 1"""
        with pytest.raises(ValidationError):
            RunSection(rank_tol=1.0)

    def test_extra_keys_forbidden(self):
        """Sections reject unknown keys"""
        with pytest.raises(ValidationError):
            StreamSection(classes=3)
        with pytest.raises(ValidationError):
            SolverConfig(order=4)

    def test_classifier_momentum_below_one(self):
        """Momentum must be < 1"""
        with pytest.raises(ValidationError):
            ClassifierSection(momentum=1.0)


class TestReportSchemas:
    """Metrics, audit and manifest documents"""

    def test_accuracy_bounds(self):
        """Accuracies are percentages"""
        with pytest.raises(ValidationError):
            TaskMetrics(task_index=1, labels=[0], accuracy=101.0, average_accuracy=0.0, generative_samples=0,
                        adapter_parameters=0)

    def test_metrics_record_versions(self):
        """Records carry the schema version"""
        record = MetricsRecord(seed=0, config_hash="x")
        assert record.schema_version == METRICS_SCHEMA_VERSION
        assert record.accuracies == []
        assert record.la is None

    def test_audit_passed(self):
        """An audit passes when it has no violations"""
        assert AuditReport(before_task=1, after_task=2).passed
        failed = AuditReport(before_task=1, after_task=2, violations=[AuditViolation(path="base", detail="x")])
        assert not failed.passed

    def test_manifest_defaults(self):
        """Manifests start empty"""
        manifest = RunManifest(command="continual")
        assert manifest.outputs == []
        assert manifest.selection is None


class TestCheckpointSchema:
    """Checkpoint document layout"""

    def test_document(self):
        """Adapters are typed entries; enums parse from strings"""
        document = CheckpointDocument(
            architecture=Architecture(input_dim=2, layers={}, adapter={}, adapted_layers=[2, 3]),
            base={"layers.0.weight": [[1.0]]},
            adapters=[AdapterEntry(layer=2, label=3, kind="cos", combine="mul", target_shape=[4, 4],
                                   A=[1.0] * 4, B=[1.0] * 4)],
        )
        assert document.format_version == CHECKPOINT_FORMAT_VERSION
        assert document.adapters[0].kind.value == "cos"
        assert document.epoch is None

    def test_unknown_kind(self):
        """Unknown families fail validation"""
        with pytest.raises(ValidationError):
            AdapterEntry(layer=2, label=3, kind="sigmoid", combine="mul", target_shape=[1, 1], A=[1.0], B=[1.0])


if __name__ == "__main__":
    pytest.main([__file__])
