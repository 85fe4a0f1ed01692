"""
YAML experiment configuration loading and hashing
"""
import hashlib
import json
import logging
import os
from typing import Any, Dict, Optional

import yaml
from pydantic import ValidationError

from funlora.exceptions import ConfigError
from funlora.schemas.experiment_schemas import ExperimentConfig

logger = logging.getLogger(__name__)


def parse_config(document: Optional[Dict[str, Any]]) -> ExperimentConfig:
    """Validate a mapping; the first problem is reported with its dotted key path"""
    if document is None:
        document = {}
    if not isinstance(document, dict):
        raise ConfigError(f"config must be a mapping, got {type(document).__name__}")
    try:
        return ExperimentConfig.model_validate(document)
    except ValidationError as exc:
        error = exc.errors()[0]
        key_path = ".".join(str(part) for part in error["loc"]) or None
        raise ConfigError(error["msg"], key_path=key_path) from None


def load_config(path: Optional[str] = None) -> ExperimentConfig:
    """Defaults when path is None"""
    if path is None:
        return ExperimentConfig()
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path, "r", encoding="utf-8") as handle:
        try:
            document = yaml.safe_load(handle)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from None
    config = parse_config(document)
    logger.info("Loaded config %s (hash %s)", path, config_hash(config)[:12])
    return config


def canonical_config(config: ExperimentConfig) -> str:
    return json.dumps(config.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))


def config_hash(config: ExperimentConfig) -> str:
    """SHA-256 of the canonical JSON of the validated config"""
    return hashlib.sha256(canonical_config(config).encode("utf-8")).hexdigest()


def with_seed(config: ExperimentConfig, seed: int) -> ExperimentConfig:
    return config.model_copy(update={"run": config.run.model_copy(update={"seed": seed})})
