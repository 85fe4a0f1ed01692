"""
Continual-learning metrics: average accuracy, average incremental accuracy, last accuracy
"""
from typing import List, Sequence

import numpy as np

from funlora.exceptions import DataError
from funlora.schemas.report_schemas import MetricsRecord, SeedSummary


def aa(scores: Sequence[float]) -> float:
    """Mean of the per-task accuracies A_1..A_T"""
    if len(scores) == 0:
        raise DataError("aa needs at least one accuracy")
    return float(np.mean(np.asarray(scores, dtype=np.float64)))


def aia(average_accuracies: Sequence[float]) -> float:
    """Mean of the running average accuracies AA_1..AA_T"""
    if len(average_accuracies) == 0:
        raise DataError("aia needs at least one average accuracy")
    return float(np.mean(np.asarray(average_accuracies, dtype=np.float64)))


def running_aa(scores: Sequence[float]) -> List[float]:
    return [aa(scores[: t + 1]) for t in range(len(scores))]


def la(record: MetricsRecord) -> float:
    """Last accuracy: AA after the final task"""
    if not record.tasks:
        raise DataError("la needs at least one task")
    return aa(record.accuracies)


def finalize(record: MetricsRecord) -> MetricsRecord:
    """Recompute AA_t, AA, AIA and LA from the stored A_t"""
    running = running_aa(record.accuracies)
    for task, value in zip(record.tasks, running):
        task.average_accuracy = value
    record.aa = running[-1]
    record.aia = aia(running)
    record.la = la(record)
    return record


def summarize_seeds(records: Sequence[MetricsRecord]) -> SeedSummary:
    """Mean and population standard deviation of LA and AIA"""
    if not records:
        raise DataError("no metric records to summarize")
    las = np.array([r.la for r in records], dtype=np.float64)
    aias = np.array([r.aia for r in records], dtype=np.float64)
    return SeedSummary(
        seeds=[r.seed for r in records],
        la_mean=float(las.mean()),
        la_std=float(las.std()),
        aia_mean=float(aias.mean()),
        aia_std=float(aias.std()),
    )
