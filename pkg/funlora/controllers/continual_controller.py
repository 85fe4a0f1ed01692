"""
continual, bounds and report subcommands
"""
import logging
import os
import time
from typing import List, Optional

from funlora.config.loader import config_hash, load_config, with_seed
from funlora.controllers.common import guarded, run_dir, write_manifest
from funlora.datasets.streams import make_task_stream
from funlora.exceptions import DataError, ForgettingError
from funlora.repositories.checkpoint_repository import CheckpointRepository
from funlora.repositories.report_repository import ReportRepository
from funlora.schemas.report_schemas import AuditLog, MetricsRecord, RunManifest
from funlora.services.continual_service import bounds_runs, run_continual
from funlora.services.metrics_service import finalize, summarize_seeds

logger = logging.getLogger(__name__)

ACCURACY_COLUMNS = ["seed", "task_index", "A_t", "AA_t"]


def seed_list(config_seed: int, seed: Optional[int], seeds: int) -> List[int]:
    if seeds < 1:
        raise DataError(f"--seeds must be >= 1, got {seeds}")
    first = config_seed if seed is None else seed
    return [first + n for n in range(seeds)]


def accuracy_rows(records: List[MetricsRecord]) -> List[dict]:
    return [
        {"seed": record.seed, "task_index": task.task_index, "A_t": task.accuracy, "AA_t": task.average_accuracy}
        for record in records
        for task in record.tasks
    ]


def write_summaries(reports: ReportRepository, records: List[MetricsRecord]) -> None:
    reports.write_json("summary.json", summarize_seeds(records))
    reports.write_csv("accuracy.csv", accuracy_rows(records), ACCURACY_COLUMNS)


@guarded
def cmd_continual(config_path: Optional[str] = None, seed: Optional[int] = None, seeds: int = 1,
                  out: Optional[str] = None, canonical: bool = False) -> None:
    """The incremental pipeline for every requested seed, plus the bounds when run.bounds is set"""
    started = time.perf_counter()
    config = load_config(config_path)
    reports = ReportRepository(run_dir(out), canonical)
    reports.ensure_dir()
    run_seeds = seed_list(config.run.seed, seed, seeds)
    records, checkpoint_paths = [], []

    for s in run_seeds:
        seeded = with_seed(config, s)
        stream = make_task_stream(seeded.stream, s)
        checkpoints = None
        if seeded.run.save_checkpoints:
            checkpoints = CheckpointRepository(os.path.join(reports.out_dir, "checkpoints", f"seed{s}"))
        try:
            result = run_continual(stream, seeded, checkpoints=checkpoints)
        except ForgettingError as exc:
            reports.write_json(f"audit_seed{s}.json", AuditLog(seed=s, config_hash=config_hash(seeded),
                                                                reports=exc.reports))
            raise
        checkpoint_paths.extend(result.checkpoints)
        reports.write_json(f"metrics_seed{s}.json", result.record)
        reports.write_json(f"audit_seed{s}.json", result.audit)
        records.append(result.record)
        if seeded.run.bounds:
            reports.write_json(f"bounds_seed{s}.json", bounds_runs(stream, seeded))

    if len(records) == 1:
        reports.write_json("metrics.json", records[0])
    write_summaries(reports, records)
    write_manifest(reports, RunManifest(command="continual", config_hash=config_hash(config), seeds=run_seeds,
                                        outputs=checkpoint_paths), started)


@guarded
def cmd_bounds(config_path: Optional[str] = None, seed: Optional[int] = None, seeds: int = 1,
               out: Optional[str] = None, canonical: bool = False) -> None:
    started = time.perf_counter()
    config = load_config(config_path)
    reports = ReportRepository(run_dir(out), canonical)
    reports.ensure_dir()
    run_seeds = seed_list(config.run.seed, seed, seeds)
    for s in run_seeds:
        seeded = with_seed(config, s)
        reports.write_json(f"bounds_seed{s}.json", bounds_runs(make_task_stream(seeded.stream, s), seeded))
    write_manifest(reports, RunManifest(command="bounds", config_hash=config_hash(config), seeds=run_seeds),
                   started)


@guarded
def cmd_report(out: Optional[str] = None, canonical: bool = False) -> None:
    """Rebuild summary.json and accuracy.csv from the metric files of a run directory"""
    started = time.perf_counter()
    reports = ReportRepository(run_dir(out), canonical)
    names = reports.list("metrics_seed")
    if not names:
        raise DataError(f"no metrics_seed*.json files in {reports.out_dir}")
    records = []
    for name in names:
        stored = MetricsRecord.model_validate(reports.read_json(name))
        records.append(finalize(stored.model_copy(deep=True)))
        if (stored.aa, stored.aia, stored.la) != (records[-1].aa, records[-1].aia, records[-1].la):
            logger.warning("%s: stored AA/AIA/LA differ from values recomputed from A_t", name)
    records.sort(key=lambda record: record.seed)
    write_summaries(reports, records)
    write_manifest(reports, RunManifest(command="report", config_hash=records[0].config_hash,
                                        seeds=[record.seed for record in records]), started)
