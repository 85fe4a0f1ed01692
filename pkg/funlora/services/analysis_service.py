"""
Post-hoc analyses of trained checkpoints: ranks, importance, NFE sweeps
"""
import logging
from collections import defaultdict
from typing import Dict, List, Sequence, Tuple

import numpy as np

from funlora.autograd import no_grad
from funlora.datasets.streams import TaskStream
from funlora.exceptions import DataError
from funlora.flow.solvers import nfe_budget_to_steps
from funlora.lora.diagnostics import (
    LayerSelection,
    export_ponderations,
    importance_report,
    numerical_rank,
    rank_report,
    select_layers,
)
from funlora.models.classifier import classifier_eval, classifier_train
from funlora.repositories.checkpoint_repository import CheckpointRepository, document_to_net
from funlora.schemas.checkpoint_schemas import CheckpointDocument
from funlora.schemas.experiment_schemas import ExperimentConfig, SolverMethod
from funlora.schemas.report_schemas import EpochRank, ImportanceReport, NfeSweepRow, PonderationRow, RankReport
from funlora.services.sampling_service import sample_dataset

logger = logging.getLogger(__name__)


def analyze_rank(document: CheckpointDocument, rel_tol: float) -> Tuple[RankReport, List[PonderationRow]]:
    net = document_to_net(document)
    report = rank_report(net.store, rel_tol)
    logger.info("Rank analysis of task %d checkpoint: %d adapters, peak rank %d", document.task_index,
                len(report.rows), report.peak_rank)
    return report, export_ponderations(net.store)


def epoch_rank_series(paths: Sequence[str], rel_tol: float) -> List[EpochRank]:
    """Max/mean rank per epoch over the classes in training when each snapshot was taken"""
    per_epoch: Dict[int, List[Tuple[int, float]]] = defaultdict(list)
    for path in paths:
        document = CheckpointRepository.load(path)
        if document.epoch is None:
            raise DataError(f"{path} is a task checkpoint, not an epoch snapshot")
        net = document_to_net(document)
        training = [label for label in net.store.labels() if label not in set(document.completed_labels)]
        with no_grad():
            for label in training:
                ranks = [numerical_rank(F, rel_tol) for F in net.store.matrices(label).values()]
                per_epoch[document.epoch].append((max(ranks), float(np.mean(ranks))))
    series = []
    for epoch in sorted(per_epoch):
        values = per_epoch[epoch]
        series.append(EpochRank(epoch=epoch, max_rank=float(np.mean([v[0] for v in values])),
                                mean_rank=float(np.mean([v[1] for v in values]))))
    return series


def importance_analysis(document: CheckpointDocument, strategy: LayerSelection) -> Tuple[ImportanceReport,
                                                                                          List[int]]:
    net = document_to_net(document)
    report = importance_report(net.store)
    selection = select_layers(report.averages(), strategy)
    logger.info("Importance: %s selects layers %s", strategy.strategy, selection)
    return report, selection


def nfe_sweep(document: CheckpointDocument, stream: TaskStream, config: ExperimentConfig,
              method: SolverMethod, nfes: Sequence[int], factors: Sequence[int]) -> List[NfeSweepRow]:
    """Sample, retrain the classifier and score it for every (NFE budget, resample factor)"""
    net = document_to_net(document)
    t = document.task_index
    labels = stream.labels_upto(t)
    x_test, y_test = stream.test_upto(t)
    rows = []
    for nfe in nfes:
        steps = nfe_budget_to_steps(method, nfe)
        update = {"method": SolverMethod(method)}
        if steps is not None:
            update["steps"] = steps
        solver = config.solver.model_copy(update=update)
        for factor in factors:
            rng = np.random.default_rng([config.run.seed, nfe, factor])
            sampled = sample_dataset(net, labels, factor * stream.train_per_class(), solver, rng)
            classifier = classifier_train(sampled.samples, sampled.labels, config.classifier,
                                          seed=config.run.seed, labels=labels)
            accuracy = classifier_eval(classifier, x_test, y_test)
            logger.info("NFE sweep %s nfe=%d factor=%d: accuracy %.2f", solver.method.value, nfe, factor,
                        accuracy)
            rows.append(NfeSweepRow(method=solver.method.value, nfe=nfe, steps=steps, factor=factor,
                                    acc_final=accuracy, realized_nfe=sampled.nfe, sampling_seconds=sampled.seconds))
    return rows
