"""
JSON and CSV report persistence for one run directory
"""
import json
import logging
import os
from typing import Any, Iterable, List, Optional, Sequence

import pandas as pd
from pydantic import BaseModel

from funlora.exceptions import FunLoRAError

logger = logging.getLogger(__name__)

# Keys holding timings; dropped in canonical JSON
WALL_TIME_KEYS = ("wall_times", "sampling_seconds")


def strip_wall_times(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: strip_wall_times(v) for k, v in value.items() if k not in WALL_TIME_KEYS}
    if isinstance(value, list):
        return [strip_wall_times(v) for v in value]
    return value


class ReportRepository:
    def __init__(self, out_dir: str, canonical: bool = False):
        self.out_dir = out_dir
        self.canonical = canonical
        self.written: List[str] = []

    def ensure_dir(self) -> None:
        try:
            os.makedirs(self.out_dir, exist_ok=True)
        except OSError as exc:
            raise FunLoRAError(f"cannot create output directory {self.out_dir}: {exc}") from None
        if not os.access(self.out_dir, os.W_OK):
            raise FunLoRAError(f"output directory {self.out_dir} is not writable")

    def path(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def _track(self, path: str) -> str:
        if path not in self.written:
            self.written.append(path)
        return path

    def write_json(self, name: str, payload, canonical: Optional[bool] = None) -> str:
        """Pydantic models or plain mappings; canonical drops timings and sorts keys"""
        self.ensure_dir()
        data = payload.model_dump(mode="json") if isinstance(payload, BaseModel) else payload
        canonical = self.canonical if canonical is None else canonical
        if canonical:
            data = strip_wall_times(data)
        path = self.path(name)
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(data, handle, indent=None if canonical else 2, sort_keys=canonical,
                      separators=(",", ":") if canonical else None)
            handle.write("\n")
        logger.debug("Wrote %s", path)
        return self._track(path)

    def write_csv(self, name: str, rows: Iterable, columns: Sequence[str]) -> str:
        """Header-only file when rows is empty"""
        self.ensure_dir()
        records = [row.model_dump() if isinstance(row, BaseModel) else dict(row) for row in rows]
        frame = pd.DataFrame(records, columns=list(columns))
        path = self.path(name)
        frame.to_csv(path, index=False)
        logger.debug("Wrote %s (%d rows)", path, len(frame))
        return self._track(path)

    def read_json(self, name: str) -> Any:
        with open(self.path(name), "r", encoding="utf-8") as handle:
            return json.load(handle)

    def list(self, pattern_prefix: str) -> List[str]:
        if not os.path.isdir(self.out_dir):
            return []
        return sorted(n for n in os.listdir(self.out_dir) if n.startswith(pattern_prefix) and n.endswith(".json"))
