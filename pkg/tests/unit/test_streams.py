"""
Unit tests for the synthetic class-incremental task streams
"""
import numpy as np
import pytest

from funlora.datasets.streams import Task, TaskStream, make_task_stream
from funlora.exceptions import StreamError
from funlora.schemas.experiment_schemas import StreamSection


def nearest_center_accuracy(x, y, centers):
    labels = np.array(sorted(centers))
    stacked = np.stack([centers[label] for label in labels])
    distances = np.linalg.norm(x[:, None, :] - stacked[None, :, :], axis=2)
    return 100.0 * np.mean(labels[distances.argmin(axis=1)] == y)


class TestMakeTaskStream:
    """Deterministic construction of the streams"""

    def test_labels_are_disjoint_and_ordered(self):
        """Labels run 0..K-1 in task order without repeats"""
        stream = make_task_stream(StreamSection(tasks=4, classes_per_task=3, train_per_class=5, test_per_class=2))
        assert [task.labels for task in stream] == [[0, 1, 2], [3, 4, 5], [6, 7, 8], [9, 10, 11]]
        assert stream.labels_upto(2) == [0, 1, 2, 3, 4, 5]

    def test_split_sizes(self):
        """Every class gets its train and test counts"""
        stream = make_task_stream(StreamSection(tasks=2, train_per_class=7, test_per_class=3))
        task = stream.tasks[1]
        assert task.x_train.shape == (14, 2)
        assert task.x_test.shape == (6, 2)
        assert task.train_for(3).shape == (7, 2)
        assert stream.train_per_class() == 7
        x, y = stream.test_upto(2)
        assert x.shape == (12, 2)
        assert sorted(set(y)) == [0, 1, 2, 3]

    def test_same_seed_same_stream(self):
        """The stream is a pure function of (spec, seed)"""
        spec = StreamSection(tasks=2, train_per_class=10, test_per_class=4)
        first, second = make_task_stream(spec, seed=3), make_task_stream(spec, seed=3)
        for a, b in zip(first, second):
            np.testing.assert_array_equal(a.x_train, b.x_train)
            np.testing.assert_array_equal(a.x_test, b.x_test)

    def test_seed_changes_samples(self):
        """A different seed draws different points"""
        spec = StreamSection(tasks=2, train_per_class=10, test_per_class=4)
        a = make_task_stream(spec, seed=0).tasks[0].x_train
        b = make_task_stream(spec, seed=1).tasks[0].x_train
        assert not np.allclose(a, b)

    def test_gaussian_classes_are_separable(self):
        """Nearest class center classifies the default gaussian stream"""
        spec = StreamSection(tasks=5, train_per_class=50, test_per_class=50)
        stream = make_task_stream(spec)
        x, y = stream.test_upto(5)
        x_train, y_train = stream.train_upto(5)
        centers = {label: x_train[y_train == label].mean(axis=0) for label in range(10)}
        assert nearest_center_accuracy(x, y, centers) > 95.0

    def test_ring_classes_are_separable_by_radius(self):
        """Ring k sits at radius (k + 1) * ring_gap"""
        spec = StreamSection(family="rings", tasks=3, train_per_class=50, test_per_class=50)
        stream = make_task_stream(spec)
        x, y = stream.test_upto(3)
        predicted = np.clip(np.rint(np.linalg.norm(x, axis=1) / spec.ring_gap) - 1, 0, 5)
        assert 100.0 * np.mean(predicted == y) > 95.0

    def test_single_task_rejected(self):
        """A continual stream needs at least two tasks"""
        with pytest.raises(StreamError):
            make_task_stream(StreamSection(tasks=1))


class TestTaskStream:
    """Validation of hand-built streams"""

    @staticmethod
    def task(index, labels, rows=2):
        y = np.repeat(labels, rows)
        return Task(index, list(labels), np.zeros((y.size, 2)), y, np.zeros((y.size, 2)), y)

    def test_single_task_stream_is_allowed(self):
        """Degenerate one-task streams can still be built by hand"""
        stream = TaskStream([self.task(1, [0, 1])])
        assert len(stream) == 1
        assert stream.dim == 2

    def test_repeated_labels(self):
        """A label may appear in one task only"""
        with pytest.raises(StreamError):
            TaskStream([self.task(1, [0, 1]), self.task(2, [1, 2])])

    def test_class_without_samples(self):
        """Every declared class needs training data"""
        bad = self.task(1, [0])
        bad.labels = [0, 5]
        with pytest.raises(StreamError):
            TaskStream([bad])

    def test_empty(self):
        """No tasks, no stream"""
        with pytest.raises(StreamError):
            TaskStream([])


if __name__ == "__main__":
    pytest.main([__file__])
