"""
Rank, distinct-value, importance and parameter-count diagnostics for adapter stores
"""
import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from funlora.autograd import Tensor, no_grad
from funlora.exceptions import ConventionError, NumericalError, SelectionError
from funlora.lora.functional import Adapter, CombineOp, FunctionalKind, reduced_dims
from funlora.lora.sharing import SHARED_LAYER, shared_total, sqrt_factorize
from funlora.lora.store import AdapterStore
from funlora.schemas.report_schemas import (
    ImportanceReport,
    ImportanceRow,
    LayerImportance,
    PonderationRow,
    RankReport,
    RankRow,
)

logger = logging.getLogger(__name__)

DEFAULT_REL_TOL = 1e-8


def _as_array(F: Union[Tensor, np.ndarray]) -> np.ndarray:
    return F.data if isinstance(F, Tensor) else np.asarray(F, dtype=np.float64)


def numerical_rank(F, rel_tol: float = DEFAULT_REL_TOL) -> int:
    """Number of singular values above rel_tol * sigma_max"""
    F = _as_array(F)
    if not 0.0 < rel_tol < 1.0:
        raise NumericalError(f"rel_tol must lie in (0, 1), got {rel_tol}")
    if not np.all(np.isfinite(F)):
        raise NumericalError("numerical_rank needs finite entries")
    if F.size == 0:
        return 0
    sigma = np.linalg.svd(np.atleast_2d(F), compute_uv=False)
    if sigma[0] == 0.0:
        return 0
    return int(np.count_nonzero(sigma > rel_tol * sigma[0]))


def distinct_value_ratio(F, decimals: int = 12) -> float:
    """Distinct entries (after rounding) over total entries"""
    F = _as_array(F)
    if F.size == 0:
        return 0.0
    # + 0.0 folds -0.0 into 0.0
    return np.unique(np.round(F, decimals) + 0.0).size / F.size


def rank_report(store: AdapterStore, rel_tol: float = DEFAULT_REL_TOL) -> RankReport:
    """Per (layer, class) ranks, aggregated per class then averaged over classes"""
    rows: List[RankRow] = []
    with no_grad():
        for label in store.labels():
            for layer, F in store.matrices(label).items():
                rows.append(RankRow(layer_index=layer, class_label=label, rank=numerical_rank(F, rel_tol),
                                    distinct_ratio=distinct_value_ratio(F)))
    if not rows:
        return RankReport()

    per_class_max: Dict[int, int] = {}
    per_class_mean: Dict[int, float] = {}
    for label in store.labels():
        ranks = [row.rank for row in rows if row.class_label == label]
        per_class_max[label] = max(ranks)
        per_class_mean[label] = float(np.mean(ranks))
    return RankReport(
        rows=rows,
        per_class_max=per_class_max,
        per_class_mean=per_class_mean,
        max_rank=float(np.mean(list(per_class_max.values()))),
        mean_rank=float(np.mean(list(per_class_mean.values()))),
        peak_rank=max(per_class_max.values()),
    )


def importance(adapter: Adapter) -> float:
    """Mean L1 distance of A and B from their all-ones initialization"""
    if adapter.combine is not CombineOp.MUL:
        raise ConventionError(
            f"importance assumes ones-initialized Mul adapters; layer {adapter.layer_index} "
            f"class {adapter.class_label} uses {adapter.combine.value}"
        )
    A, B = adapter.A.data, adapter.B.data
    return 0.5 * (np.abs(A - 1.0).sum() / A.size + np.abs(B - 1.0).sum() / B.size)


def importance_report(store: AdapterStore) -> ImportanceReport:
    rows = [
        ImportanceRow(layer_index=a.layer_index, class_label=a.class_label, importance=importance(a),
                      shared=a.layer_index == SHARED_LAYER)
        for a in store.adapters()
    ]
    layers = []
    # a shared adapter spans every layer; it has no per-layer importance
    for layer in () if store.spec.sqrt_shared else store.adapted_layers:
        values = [row.importance for row in rows if row.layer_index == layer]
        if values:
            layers.append(LayerImportance(layer_index=layer, importance=float(np.mean(values)),
                                          std=float(np.std(values))))
    return ImportanceReport(rows=rows, layers=layers)


def importance_avg(store: AdapterStore, layer: int) -> float:
    """I_l: mean importance of one layer over every class in the store"""
    values = [importance(a) for a in store.adapters() if a.layer_index == layer]
    if not values:
        raise SelectionError(f"layer {layer} has no adapters")
    return float(np.mean(values))


@dataclass(frozen=True)
class LayerSelection:
    """top_k(k), index_range(start, end) inclusive, or threshold(tau)"""

    strategy: str
    k: Optional[int] = None
    start: Optional[int] = None
    end: Optional[int] = None
    threshold: Optional[float] = None

    @classmethod
    def parse(cls, text: str) -> "LayerSelection":
        """``top_k:K``, ``range:A:B`` or ``threshold:T``"""
        name, _, rest = text.partition(":")
        args = rest.split(":") if rest else []
        try:
            if name == "top_k" and len(args) == 1:
                return cls("top_k", k=int(args[0]))
            if name in ("range", "index_range") and len(args) == 2:
                return cls("index_range", start=int(args[0]), end=int(args[1]))
            if name == "threshold" and len(args) == 1:
                return cls("threshold", threshold=float(args[0]))
        except ValueError:
            pass
        raise SelectionError(f"cannot parse layer selection '{text}'")


def select_layers(importances: Union[Mapping[int, float], Sequence[float]],
                  strategy: LayerSelection) -> List[int]:
    """Ordered layer indices picked by the strategy"""
    if not isinstance(importances, Mapping):
        importances = dict(enumerate(importances))
    if not importances:
        raise SelectionError("no layer importances to select from")
    if strategy.strategy == "top_k":
        ranked = sorted(importances, key=lambda layer: (-importances[layer], layer))
        chosen = ranked[: max(0, strategy.k)]
    elif strategy.strategy == "index_range":
        chosen = [layer for layer in importances if strategy.start <= layer <= strategy.end]
    elif strategy.strategy == "threshold":
        chosen = [layer for layer, value in importances.items() if value >= strategy.threshold]
    else:
        raise SelectionError(f"unknown selection strategy '{strategy.strategy}'")
    if not chosen:
        raise SelectionError(f"{strategy.strategy} selected no layer")
    return sorted(chosen)


def param_count(kind: FunctionalKind, combine: CombineOp, layer_dims: Iterable[Tuple[int, int]],
                trainable_hyper: bool, p: int = 10, ratio_k: int = 1, sqrt_shared: bool = False) -> int:
    """Parameters allocated per class (PPC)"""
    kind = FunctionalKind(kind)
    layer_dims = list(layer_dims)
    extra = 0
    if kind.functional:
        extra = p + (p if trainable_hyper and kind.has_hyper else 0)
    if sqrt_shared:
        d = sqrt_factorize(shared_total(dict(enumerate(layer_dims))))
        return 2 * d + extra
    total = 0
    for c_out, c_in in layer_dims:
        a_len, b_len = reduced_dims(c_out, c_in, ratio_k)
        total += a_len + b_len + extra
    return total


def store_param_count(store: AdapterStore) -> int:
    spec = store.spec
    return param_count(spec.kind, spec.combine, store.layer_dims.values(), spec.trainable_hyper, p=spec.p,
                       ratio_k=spec.ratio_k, sqrt_shared=spec.sqrt_shared)


def export_ponderations(store: AdapterStore) -> List[PonderationRow]:
    """alpha_i with omega_i (cos) or delta_i (pow) per adapter"""
    rows = []
    for adapter in store.adapters():
        if adapter.alphas is None:
            continue
        hyper = adapter.hyper.data if adapter.hyper is not None else None
        for i, alpha in enumerate(adapter.alphas.data):
            rows.append(PonderationRow(
                layer_index=adapter.layer_index,
                class_label=adapter.class_label,
                i=i + 1,
                alpha_i=float(alpha),
                omega_i=None if hyper is None else float(hyper[i]),
            ))
    return rows
