"""
analyze-rank, importance and nfe-sweep subcommands
"""
import logging
import time
from typing import Optional, Sequence

from funlora.config.loader import config_hash, load_config, with_seed
from funlora.controllers.common import guarded, run_dir, write_manifest
from funlora.datasets.streams import make_task_stream
from funlora.lora.diagnostics import DEFAULT_REL_TOL, LayerSelection
from funlora.repositories.checkpoint_repository import CheckpointRepository
from funlora.repositories.report_repository import ReportRepository
from funlora.schemas.experiment_schemas import SolverMethod
from funlora.schemas.report_schemas import RunManifest
from funlora.services.analysis_service import analyze_rank, epoch_rank_series, importance_analysis, nfe_sweep

logger = logging.getLogger(__name__)

RANK_COLUMNS = ["layer_index", "class_label", "rank", "distinct_ratio"]
CLASS_RANK_COLUMNS = ["class_label", "max_rank", "mean_rank"]
EPOCH_COLUMNS = ["epoch", "max_rank", "mean_rank"]
PONDERATION_COLUMNS = ["layer_index", "class_label", "i", "alpha_i", "omega_i"]
IMPORTANCE_COLUMNS = ["layer_index", "importance", "std"]
CLASS_IMPORTANCE_COLUMNS = ["layer_index", "class_label", "importance", "shared"]
NFE_COLUMNS = ["method", "nfe", "steps", "factor", "acc_final", "realized_nfe", "sampling_seconds"]


@guarded
def cmd_analyze_rank(checkpoint: str, out: Optional[str] = None, rel_tol: Optional[float] = None,
                     per_epoch: Optional[str] = None, canonical: bool = False) -> None:
    started = time.perf_counter()
    rel_tol = DEFAULT_REL_TOL if rel_tol is None else rel_tol
    document = CheckpointRepository.load(checkpoint)
    reports = ReportRepository(run_dir(out), canonical)
    report, ponderations = analyze_rank(document, rel_tol)

    reports.write_csv("ranks.csv", report.rows, RANK_COLUMNS)
    reports.write_csv("ranks_per_class.csv", [
        {"class_label": label, "max_rank": report.per_class_max[label], "mean_rank": report.per_class_mean[label]}
        for label in sorted(report.per_class_max)
    ], CLASS_RANK_COLUMNS)
    reports.write_json("rank_summary.json", report.model_dump(mode="json", exclude={"rows"}))
    reports.write_csv("ponderations.csv", ponderations, PONDERATION_COLUMNS)
    if per_epoch:
        series = epoch_rank_series(CheckpointRepository.epoch_checkpoints(per_epoch), rel_tol)
        reports.write_csv("ranks_per_epoch.csv", series, EPOCH_COLUMNS)
    write_manifest(reports, RunManifest(command="analyze-rank", config_hash=document.config_hash), started)


@guarded
def cmd_importance(checkpoint: str, strategy: str = "top_k:2", out: Optional[str] = None,
                   canonical: bool = False) -> None:
    started = time.perf_counter()
    selection_strategy = LayerSelection.parse(strategy)
    document = CheckpointRepository.load(checkpoint)
    reports = ReportRepository(run_dir(out), canonical)
    report, selection = importance_analysis(document, selection_strategy)
    reports.write_csv("importance.csv", report.layers, IMPORTANCE_COLUMNS)
    reports.write_csv("importance_per_class.csv", report.rows, CLASS_IMPORTANCE_COLUMNS)
    write_manifest(reports, RunManifest(command="importance", config_hash=document.config_hash,
                                        selection=selection), started)


@guarded
def cmd_nfe_sweep(checkpoint: str, config_path: Optional[str] = None, method: str = "rk4",
                  nfes: Sequence[int] = (5, 10, 20), factors: Sequence[int] = (1,), seed: Optional[int] = None,
                  out: Optional[str] = None, canonical: bool = False) -> None:
    """The stream is rebuilt from the config and seed that produced the checkpoint"""
    started = time.perf_counter()
    config = load_config(config_path)
    if seed is not None:
        config = with_seed(config, seed)
    document = CheckpointRepository.load(checkpoint)
    digest = config_hash(config)
    if document.config_hash and document.config_hash != digest:
        logger.warning("checkpoint was written under config %s, sweeping with %s", document.config_hash[:12],
                       digest[:12])
    stream = make_task_stream(config.stream, config.run.seed)
    reports = ReportRepository(run_dir(out), canonical)
    rows = nfe_sweep(document, stream, config, SolverMethod(method), list(nfes), list(factors))
    reports.write_csv("nfe_sweep.csv", rows, NFE_COLUMNS)
    write_manifest(reports, RunManifest(command="nfe-sweep", config_hash=digest, seeds=[config.run.seed]),
                   started)
