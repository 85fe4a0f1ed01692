"""
Class-incremental pipeline

Task 1 trains the whole base model on real data and freezes it. Every later
class gets its own adapters (or, for the vanilla-conditioning baseline, only
an embedding) trained on that class's data alone. After each task a fully
synthetic dataset over every seen class is sampled and a fresh classifier is
trained on it and scored on the real test sets.
"""
import logging
import time
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from funlora.config.loader import config_hash as hash_config
from funlora.datasets.streams import TaskStream
from funlora.exceptions import ForgettingError
from funlora.lora.diagnostics import rank_report, store_param_count
from funlora.lora.store import AdapterSpec
from funlora.models.classifier import classifier_eval, classifier_train
from funlora.models.vector_field import VectorFieldNet
from funlora.repositories.checkpoint_repository import CheckpointRepository, net_to_document
from funlora.schemas.experiment_schemas import ExperimentConfig
from funlora.schemas.report_schemas import AuditLog, BoundsRecord, MetricsRecord, TaskMetrics
from funlora.services.audit_service import forgetting_audit
from funlora.services.metrics_service import finalize
from funlora.services.sampling_service import sample_dataset
from funlora.services.training_service import train_adapter, train_embedding, train_task1

logger = logging.getLogger(__name__)

ADAPTERS = "adapters"
EMBEDDINGS = "embeddings"


@dataclass
class RunResult:
    record: MetricsRecord
    net: VectorFieldNet
    checkpoints: List[str]
    audit: AuditLog


def adapter_spec(config: ExperimentConfig) -> AdapterSpec:
    section = config.adapter
    return AdapterSpec(kind=section.kind, combine=section.combine, p=section.p,
                       trainable_hyper=section.trainable_hyper, calibrate=section.calibrate,
                       ratio_k=section.ratio_k, sqrt_shared=section.sqrt_shared)


class SeedPlan:
    """One master seed fanned out to init, training draws, sampling and classifier init"""

    def __init__(self, seed: int):
        init, train, sample, classifier = np.random.SeedSequence(seed).spawn(4)
        self.init = np.random.default_rng(init)
        self.train = np.random.default_rng(train)
        self.sample = np.random.default_rng(sample)
        self._classifier = classifier

    def classifier_seed(self, task_index: int) -> int:
        child = np.random.SeedSequence(self._classifier.entropy, spawn_key=(task_index,))
        return int(child.generate_state(1)[0])


def run_continual(stream: TaskStream, config: ExperimentConfig, conditioning: str = ADAPTERS,
                   checkpoints: Optional[CheckpointRepository] = None) -> RunResult:
    if conditioning not in (ADAPTERS, EMBEDDINGS):
        raise ValueError(f"unknown conditioning mode '{conditioning}'")
    seed = config.run.seed
    digest = hash_config(config)
    plan = SeedPlan(seed)
    net = VectorFieldNet(stream.dim, config.layers, adapter_spec(config), plan.init)
    record = MetricsRecord(run="funlora" if conditioning == ADAPTERS else "vanilla_conditioning",
                           seed=seed, config_hash=digest)
    if conditioning == ADAPTERS:
        record.ppc = store_param_count(net.store)
    else:
        record.ppc = config.layers.embed_dim
    written = []
    audit = AuditLog(seed=seed, config_hash=digest)
    previous = None
    snapshots = checkpoints if checkpoints is not None and config.incremental.snapshot_every else None
    run_start = time.perf_counter()

    for t, task in enumerate(stream, start=1):
        logger.info("Task %d/%d: classes %s", t, len(stream), task.labels)
        times = {}
        start = time.perf_counter()
        if t == 1:
            for label in task.labels:
                net.add_task1_class(label)
            summary = train_task1(net, task.x_train, task.y_train, config.task1, plan.train)
            net.freeze_base()
            net.complete_labels(task.labels)
            generative_samples, new_parameters = summary.samples_seen, 0
        else:
            generative_samples, new_parameters = 0, 0
            for label in task.labels:
                x = task.train_for(label)
                if conditioning == ADAPTERS:
                    net.add_adapter_class(label, plan.init)
                    hook = None
                    if snapshots is not None:
                        def hook(epoch, label=label, t=t):
                            snapshots.save_epoch(net, t, label, epoch, digest)
                    summary = train_adapter(net, label, x, config.incremental, plan.train, snapshot=hook)
                else:
                    net.add_embedding_class(label)
                    summary = train_embedding(net, label, x, config.incremental, plan.train)
                generative_samples += summary.samples_seen
                new_parameters += summary.trained_parameters
            net.complete_labels(task.labels)
            if conditioning == ADAPTERS:
                ranks = rank_report(net.store, config.run.rank_tol)
                logger.info("Task %d: peak adapter rank %d, mean %.2f", t, ranks.peak_rank, ranks.mean_rank)
        times["generative"] = time.perf_counter() - start

        state = net_to_document(net, t, digest)
        if previous is not None:
            report = forgetting_audit(previous, state)
            audit.reports.append(report)
            if not report.passed:
                first = report.violations[0]
                raise ForgettingError(f"task {t} changed {len(report.violations)} tensor(s) outside its classes, "
                                      f"first {first.path} ({first.detail})", audit.reports)
        previous = state

        labels_seen = stream.labels_upto(t)
        per_class, nfe = None, None
        if t == 1:
            x_cls, y_cls = task.x_train, task.y_train
            times["sampling"] = 0.0
        else:
            per_class = config.sampling.resample_factor * stream.train_per_class()
            sampled = sample_dataset(net, labels_seen, per_class, config.solver, plan.sample)
            x_cls, y_cls, nfe = sampled.samples, sampled.labels, sampled.nfe
            times["sampling"] = sampled.seconds

        start = time.perf_counter()
        classifier = classifier_train(x_cls, y_cls, config.classifier, seed=plan.classifier_seed(t),
                                      labels=labels_seen)
        x_test, y_test = stream.test_upto(t)
        accuracy = classifier_eval(classifier, x_test, y_test)
        times["classifier"] = time.perf_counter() - start
        logger.info("Task %d: A_t = %.2f on %d test samples", t, accuracy, len(y_test))

        record.tasks.append(TaskMetrics(
            task_index=t,
            labels=list(task.labels),
            accuracy=accuracy,
            average_accuracy=accuracy,
            generative_samples=generative_samples,
            adapter_parameters=new_parameters,
            synthetic_per_class=per_class,
            realized_nfe=nfe,
            wall_times=times,
        ))
        finalize(record)
        if checkpoints is not None and config.run.save_checkpoints:
            written.append(checkpoints.save(net, t, digest))

    record.wall_times = {"total": time.perf_counter() - run_start}
    logger.info("Run finished: LA %.2f, AIA %.2f", record.la, record.aia)
    return RunResult(record=record, net=net, checkpoints=written, audit=audit)


def multitask_classifier(stream: TaskStream, config: ExperimentConfig) -> float:
    """Upper bound: one classifier on every real training sample"""
    t = len(stream)
    x, y = stream.train_upto(t)
    plan = SeedPlan(config.run.seed)
    net = classifier_train(x, y, config.classifier, seed=plan.classifier_seed(t), labels=stream.labels_upto(t))
    return classifier_eval(net, *stream.test_upto(t))


def multitask_generative(stream: TaskStream, config: ExperimentConfig) -> float:
    """Upper bound: one conditional model trained jointly, classifier on its samples"""
    t = len(stream)
    plan = SeedPlan(config.run.seed)
    net = VectorFieldNet(stream.dim, config.layers, adapter_spec(config), plan.init)
    labels = stream.labels_upto(t)
    for label in labels:
        net.add_task1_class(label)
    x, y = stream.train_upto(t)
    train_task1(net, x, y, config.task1, plan.train)
    per_class = config.sampling.resample_factor * stream.train_per_class()
    sampled = sample_dataset(net, labels, per_class, config.solver, plan.sample)
    classifier = classifier_train(sampled.samples, sampled.labels, config.classifier,
                                  seed=plan.classifier_seed(t), labels=labels)
    return classifier_eval(classifier, *stream.test_upto(t))


def bounds_runs(stream: TaskStream, config: ExperimentConfig) -> BoundsRecord:
    """Multitask classifier, multitask generative and vanilla-conditioning LA on one stream"""
    times = {}
    start = time.perf_counter()
    upper_classifier = multitask_classifier(stream, config)
    times["multitask_classifier"] = time.perf_counter() - start

    start = time.perf_counter()
    upper_generative = multitask_generative(stream, config)
    times["multitask_generative"] = time.perf_counter() - start

    start = time.perf_counter()
    vanilla = run_continual(stream, config, conditioning=EMBEDDINGS).record.la
    times["vanilla_conditioning"] = time.perf_counter() - start

    logger.info("Bounds: multitask classifier %.2f, multitask generative %.2f, vanilla %.2f",
                upper_classifier, upper_generative, vanilla)
    return BoundsRecord(seed=config.run.seed, config_hash=hash_config(config),
                        multitask_classifier=upper_classifier, multitask_generative=upper_generative,
                        vanilla_conditioning=vanilla, wall_times=times)
