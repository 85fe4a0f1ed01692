"""
Application settings read from the environment
"""
import os

from funlora import __version__

ARTIFACT_VERSION = __version__

# Bumped whenever the JSON layout of metrics or checkpoints changes
METRICS_SCHEMA_VERSION = 1
CHECKPOINT_FORMAT_VERSION = 1

# Default output root for every subcommand; --out overrides it
OUTPUT_ROOT = os.getenv("FUNLORA_OUTPUT_ROOT", "runs")

LOG_LEVEL = os.getenv("FUNLORA_LOG_LEVEL", "INFO")

# tqdm progress bars on long training loops
SHOW_PROGRESS = os.getenv("FUNLORA_PROGRESS", "0") == "1"


def output_root() -> str:
    """Output root, re-read so tests can patch the environment"""
    return os.getenv("FUNLORA_OUTPUT_ROOT", OUTPUT_ROOT)
