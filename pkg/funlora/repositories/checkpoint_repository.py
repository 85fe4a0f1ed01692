"""
Checkpoint persistence

A checkpoint is one JSON document holding the base parameters, the class
embeddings and the full adapter store. Floats are written with their
shortest round-trip representation, so a reload is bitwise identical.
"""
import glob
import json
import logging
import os
from typing import List, Optional

import numpy as np
from pydantic import ValidationError

from funlora.autograd import Tensor
from funlora.config.settings import CHECKPOINT_FORMAT_VERSION
from funlora.exceptions import CheckpointError
from funlora.lora.functional import Adapter
from funlora.lora.store import AdapterSpec
from funlora.models.vector_field import VectorFieldNet
from funlora.schemas.checkpoint_schemas import AdapterEntry, Architecture, CheckpointDocument
from funlora.schemas.experiment_schemas import LayersSection

logger = logging.getLogger(__name__)


def _listed(tensor: Optional[Tensor]):
    return None if tensor is None else tensor.data.tolist()


def net_to_document(net: VectorFieldNet, task_index: int, config_hash: Optional[str] = None,
                    epoch: Optional[int] = None) -> CheckpointDocument:
    spec = net.store.spec
    adapters = [
        AdapterEntry(
            layer=a.layer_index,
            label=a.class_label,
            kind=a.kind,
            combine=a.combine,
            target_shape=list(a.target_shape),
            A=_listed(a.A),
            B=_listed(a.B),
            alphas=_listed(a.alphas),
            hyper=_listed(a.hyper),
            trainable_hyper=a.trainable_hyper,
            calibrated=a.calibrated,
            ratio_k=a.ratio_k,
        )
        for a in net.store.adapters()
    ]
    return CheckpointDocument(
        config_hash=config_hash,
        task_index=task_index,
        epoch=epoch,
        architecture=Architecture(
            input_dim=net.input_dim,
            layers=net.config.model_dump(mode="json"),
            adapter={
                "kind": spec.kind.value,
                "combine": spec.combine.value,
                "p": spec.p,
                "trainable_hyper": spec.trainable_hyper,
                "calibrate": spec.calibrate,
                "ratio_k": spec.ratio_k,
                "sqrt_shared": spec.sqrt_shared,
            },
            adapted_layers=list(net.adapted_layers),
        ),
        base={name: tensor.data.tolist() for name, tensor in net.base_parameters().items()},
        base_frozen=net.base_frozen,
        adapters=adapters,
        completed_labels=sorted(net.store.completed | {l for l, e in net.embeddings.items() if not e.requires_grad}),
        task1_labels=list(net.task1_labels),
    )


def document_to_net(document: CheckpointDocument) -> VectorFieldNet:
    """Rebuild a network with exactly the stored values"""
    arch = document.architecture
    spec = AdapterSpec(**arch.adapter)
    net = VectorFieldNet(arch.input_dim, LayersSection(**arch.layers), spec)
    for index, layer in enumerate(net.layers):
        layer.weight.data = _array(document, f"layers.{index}.weight", layer.weight.shape)
        layer.bias.data = _array(document, f"layers.{index}.bias", layer.bias.shape)
    for name, values in document.base.items():
        if name.startswith("embeddings."):
            label = int(name.split(".", 1)[1])
            net.embeddings[label] = Tensor(values, requires_grad=True, name=name)
    net.task1_labels = list(document.task1_labels)
    for entry in document.adapters:
        net.store.put(Adapter(
            kind=entry.kind,
            combine=entry.combine,
            A=Tensor(entry.A, requires_grad=True),
            B=Tensor(entry.B, requires_grad=True),
            class_label=entry.label,
            layer_index=entry.layer,
            target_shape=tuple(entry.target_shape),
            alphas=None if entry.alphas is None else Tensor(entry.alphas, requires_grad=True),
            hyper=None if entry.hyper is None else Tensor(entry.hyper, requires_grad=entry.trainable_hyper),
            trainable_hyper=entry.trainable_hyper,
            calibrated=entry.calibrated,
            ratio_k=entry.ratio_k,
        ))
    if document.base_frozen:
        net.freeze_base()
    net.complete_labels(document.completed_labels)
    return net


def _array(document: CheckpointDocument, name: str, shape) -> np.ndarray:
    if name not in document.base:
        raise CheckpointError(f"checkpoint is missing base parameter {name}")
    values = np.array(document.base[name], dtype=np.float64)
    if values.shape != tuple(shape):
        raise CheckpointError(f"{name}: stored shape {values.shape} does not match {tuple(shape)}")
    return values


class CheckpointRepository:
    """Task checkpoints under <run>/checkpoints, epoch snapshots under checkpoints/epochs"""

    def __init__(self, root: str):
        self.root = root
        self.epoch_root = os.path.join(root, "epochs")

    def task_path(self, task_index: int) -> str:
        return os.path.join(self.root, f"task_{task_index:02d}.json")

    def epoch_path(self, task_index: int, label: int, epoch: int) -> str:
        return os.path.join(self.epoch_root, f"task_{task_index:02d}_class_{label:03d}_epoch_{epoch:05d}.json")

    def save(self, net: VectorFieldNet, task_index: int, config_hash: Optional[str] = None) -> str:
        return self.write(self.task_path(task_index), net_to_document(net, task_index, config_hash))

    def save_epoch(self, net: VectorFieldNet, task_index: int, label: int, epoch: int,
                   config_hash: Optional[str] = None) -> str:
        document = net_to_document(net, task_index, config_hash, epoch=epoch)
        return self.write(self.epoch_path(task_index, label, epoch), document)

    @staticmethod
    def write(path: str, document: CheckpointDocument) -> str:
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(document.model_dump(mode="json"), handle)
        logger.debug("Wrote checkpoint %s", path)
        return path

    @staticmethod
    def load(path: str) -> CheckpointDocument:
        try:
            with open(path, "r", encoding="utf-8") as handle:
                raw = json.load(handle)
        except (OSError, ValueError) as exc:
            raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from None
        version = raw.get("format_version") if isinstance(raw, dict) else None
        if version != CHECKPOINT_FORMAT_VERSION:
            raise CheckpointError(f"{path}: format version {version}, expected {CHECKPOINT_FORMAT_VERSION}")
        try:
            return CheckpointDocument.model_validate(raw)
        except ValidationError as exc:
            raise CheckpointError(f"{path}: malformed checkpoint ({exc.errors()[0]['msg']})") from None

    def task_checkpoints(self) -> List[str]:
        return sorted(glob.glob(os.path.join(self.root, "task_*.json")))

    @staticmethod
    def epoch_checkpoints(directory: str) -> List[str]:
        return sorted(glob.glob(os.path.join(directory, "*.json")))
