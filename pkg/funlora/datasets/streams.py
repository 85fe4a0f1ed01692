"""
Desk-scale class-incremental task streams

Each task holds its own labels, train split and test split. Labels are
globally numbered 0..K-1 in task order and never repeat across tasks.
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from funlora.exceptions import StreamError
from funlora.schemas.experiment_schemas import StreamFamily, StreamSection

logger = logging.getLogger(__name__)


@dataclass
class Task:
    index: int
    labels: List[int]
    x_train: np.ndarray
    y_train: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray

    def train_for(self, label: int) -> np.ndarray:
        return self.x_train[self.y_train == label]


class TaskStream:
    def __init__(self, tasks: Sequence[Task]):
        if not tasks:
            raise StreamError("a task stream needs at least one task")
        seen = set()
        for task in tasks:
            if not task.labels:
                raise StreamError(f"task {task.index} has no classes")
            overlap = seen.intersection(task.labels)
            if overlap:
                raise StreamError(f"task {task.index} repeats labels {sorted(overlap)} from earlier tasks")
            seen.update(task.labels)
            for label in task.labels:
                if not np.any(task.y_train == label):
                    raise StreamError(f"class {label} of task {task.index} has no training samples")
        self.tasks = list(tasks)

    def __len__(self) -> int:
        return len(self.tasks)

    def __iter__(self):
        return iter(self.tasks)

    @property
    def dim(self) -> int:
        return self.tasks[0].x_train.shape[1]

    def labels_upto(self, t: int) -> List[int]:
        """Y^{1:t} for a 1-based task index"""
        return [label for task in self.tasks[:t] for label in task.labels]

    def test_upto(self, t: int) -> Tuple[np.ndarray, np.ndarray]:
        tasks = self.tasks[:t]
        return np.concatenate([task.x_test for task in tasks]), np.concatenate([task.y_test for task in tasks])

    def train_upto(self, t: int) -> Tuple[np.ndarray, np.ndarray]:
        tasks = self.tasks[:t]
        return np.concatenate([task.x_train for task in tasks]), np.concatenate([task.y_train for task in tasks])

    def train_per_class(self) -> int:
        """Smallest per-class training count"""
        return min(int(np.sum(task.y_train == label)) for task in self.tasks for label in task.labels)


def _class_center(label: int, total: int, spec: StreamSection) -> np.ndarray:
    center = np.zeros(spec.dim)
    angle = 2.0 * math.pi * label / total
    center[0] = spec.center_radius * math.cos(angle)
    if spec.dim > 1:
        center[1] = spec.center_radius * math.sin(angle)
    return center


def _draw(label: int, total: int, count: int, spec: StreamSection, rng: np.random.Generator) -> np.ndarray:
    if spec.family is StreamFamily.GAUSSIAN:
        return _class_center(label, total, spec) + spec.sigma * rng.standard_normal((count, spec.dim))
    # rings: radius grows with the label, noise is a tenth of the gap
    radius = spec.ring_gap * (label + 1)
    directions = rng.standard_normal((count, spec.dim))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    radii = radius + 0.1 * spec.ring_gap * rng.standard_normal((count, 1))
    return radii * directions


def make_task_stream(spec: StreamSection, seed: int = 0) -> TaskStream:
    """Deterministic stream of spec.tasks tasks with spec.classes_per_task new classes each"""
    if spec.tasks < 2:
        raise StreamError(f"a continual stream needs at least 2 tasks, got {spec.tasks}")
    rng = np.random.default_rng(seed)
    total = spec.tasks * spec.classes_per_task
    tasks = []
    for t in range(spec.tasks):
        labels = list(range(t * spec.classes_per_task, (t + 1) * spec.classes_per_task))
        train = [_draw(label, total, spec.train_per_class, spec, rng) for label in labels]
        test = [_draw(label, total, spec.test_per_class, spec, rng) for label in labels]
        tasks.append(Task(
            index=t + 1,
            labels=labels,
            x_train=np.concatenate(train),
            y_train=np.repeat(labels, spec.train_per_class),
            x_test=np.concatenate(test),
            y_test=np.repeat(labels, spec.test_per_class),
        ))
    logger.info("Built %s stream: %d tasks x %d classes (seed %d)", spec.family.value, spec.tasks,
                spec.classes_per_task, seed)
    return TaskStream(tasks)
