"""
Pytest configuration and shared fixtures
"""
import os
import sys
import warnings

import numpy as np
import pytest

# Add the repository root to the Python path
repo_root = os.path.join(os.path.dirname(__file__), "..")
sys.path.insert(0, os.path.abspath(repo_root))

from funlora.config.loader import parse_config  # noqa: E402
from funlora.datasets.streams import make_task_stream  # noqa: E402

# Small enough that a full pipeline run takes a few seconds
TINY_CONFIG = {
    "stream": {"tasks": 3, "classes_per_task": 2, "train_per_class": 40, "test_per_class": 20},
    "adapter": {"kind": "cos", "combine": "mul", "p": 4, "trainable_hyper": True},
    "layers": {"hidden_width": 16, "hidden_layers": 4, "time_features": 4, "embed_dim": 4},
    "solver": {"method": "euler", "steps": 4},
    "task1": {"epochs": 3, "lr": 0.005, "warmup_steps": 2, "ema_start": 1, "batch_size": 32},
    "incremental": {"epochs": 2, "lr": 0.01, "ema_start": 1, "batch_size": 32},
    "classifier": {"hidden_width": 8, "hidden_layers": 1, "epochs": 3, "batch_size": 32},
}


@pytest.fixture(scope="session", autouse=True)
def setup_test_environment():
    """Keep progress bars off and silence the expected numerical warnings"""
    os.environ["FUNLORA_PROGRESS"] = "0"
    warnings.filterwarnings("ignore", category=RuntimeWarning, module="funlora")
    yield


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_config_dict():
    return {section: dict(values) for section, values in TINY_CONFIG.items()}


@pytest.fixture
def tiny_config(tiny_config_dict):
    return parse_config(tiny_config_dict)


@pytest.fixture
def tiny_stream(tiny_config):
    return make_task_stream(tiny_config.stream, seed=0)


@pytest.fixture
def output_dir(tmp_path, monkeypatch):
    """Run directory under tmp_path, also used as the default output root"""
    out = tmp_path / "run"
    monkeypatch.setenv("FUNLORA_OUTPUT_ROOT", str(out))
    return out
