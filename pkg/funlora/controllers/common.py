"""
Helpers shared by the subcommand controllers
"""
import functools
import logging
import os
import time
from typing import Callable, Optional

from funlora.config import settings
from funlora.exceptions import FunLoRAError
from funlora.repositories.report_repository import ReportRepository
from funlora.schemas.report_schemas import RunManifest

logger = logging.getLogger(__name__)


def guarded(handler: Callable[..., None]) -> Callable[..., int]:
    """Run a controller body and map package errors to exit codes"""

    @functools.wraps(handler)
    def wrapper(*args, **kwargs) -> int:
        try:
            handler(*args, **kwargs)
        except FunLoRAError as exc:
            logger.error("%s failed: %s", handler.__name__, exc.detail)
            return exc.exit_code
        return 0

    return wrapper


def run_dir(out: Optional[str]) -> str:
    return out if out else settings.output_root()


def write_manifest(reports: ReportRepository, manifest: RunManifest, started: float) -> str:
    """manifest.json lists every file written before it, itself included"""
    manifest.wall_times.setdefault("total", time.perf_counter() - started)
    manifest.outputs = sorted(set(manifest.outputs) | set(reports.written) | {reports.path("manifest.json")})
    manifest.outputs = [os.path.relpath(path, reports.out_dir) for path in manifest.outputs]
    return reports.write_json("manifest.json", manifest)
