"""
Forgetting audit between two checkpoints of one run
"""
import logging
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from funlora.exceptions import CheckpointError
from funlora.schemas.checkpoint_schemas import AdapterEntry, CheckpointDocument
from funlora.schemas.report_schemas import AuditReport, AuditViolation

logger = logging.getLogger(__name__)

ADAPTER_FIELDS = ("A", "B", "alphas", "hyper")


def _bytes(values) -> Optional[bytes]:
    return None if values is None else np.asarray(values, dtype=np.float64).tobytes()


def _same(before, after) -> bool:
    if before is None or after is None:
        return before is None and after is None
    left, right = np.asarray(before, dtype=np.float64), np.asarray(after, dtype=np.float64)
    return left.shape == right.shape and _bytes(left) == _bytes(right)


def _adapter_index(document: CheckpointDocument) -> Dict[Tuple[int, int], AdapterEntry]:
    return {(entry.layer, entry.label): entry for entry in document.adapters}


def forgetting_audit(before: CheckpointDocument, after: CheckpointDocument,
                     changed_labels: Optional[Iterable[int]] = None) -> AuditReport:
    """Byte equality of the base and of every adapter outside changed_labels

    changed_labels defaults to the classes completed between the two checkpoints.
    """
    if before.format_version != after.format_version:
        raise CheckpointError(f"format versions differ: {before.format_version} vs {after.format_version}")
    if before.architecture != after.architecture:
        raise CheckpointError("checkpoints describe different architectures")
    if before.config_hash and after.config_hash and before.config_hash != after.config_hash:
        raise CheckpointError("checkpoints come from runs with different configs")

    if changed_labels is None:
        changed = sorted(set(after.completed_labels) - set(before.completed_labels))
    else:
        changed = sorted(set(int(label) for label in changed_labels))
    violations: List[AuditViolation] = []

    for name, values in before.base.items():
        path = f"base.{name}"
        if name not in after.base:
            violations.append(AuditViolation(path=path, detail="missing after task"))
        elif not _same(values, after.base[name]):
            violations.append(AuditViolation(path=path, detail="bytes differ"))

    if before.base_frozen and not after.base_frozen:
        violations.append(AuditViolation(path="base", detail="base unfrozen after task"))

    later = _adapter_index(after)
    for key, entry in sorted(_adapter_index(before).items()):
        if entry.label in changed:
            continue
        path = f"adapters[{key[0]},{key[1]}]"
        other = later.get(key)
        if other is None:
            violations.append(AuditViolation(path=path, detail="missing after task"))
            continue
        for field in ADAPTER_FIELDS:
            if not _same(getattr(entry, field), getattr(other, field)):
                violations.append(AuditViolation(path=f"{path}.{field}", detail="bytes differ"))

    report = AuditReport(before_task=before.task_index, after_task=after.task_index, changed_labels=changed,
                         violations=violations)
    if report.passed:
        logger.info("Audit task %d -> %d: no forgetting", before.task_index, after.task_index)
    else:
        for violation in violations:
            logger.warning("Audit task %d -> %d: %s %s", before.task_index, after.task_index, violation.path,
                           violation.detail)
    return report
