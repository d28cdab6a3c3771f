"""Single JSON configuration file with environment overrides.

Precedence: CLI flags > config file > defaults. Unknown keys are rejected
so typos fail loudly.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .gateway import (
    ANALYZER_KEY_ENV,
    ANALYZER_URL_ENV,
    GENERATOR_KEY_ENV,
    GENERATOR_URL_ENV,
    EndpointConfig,
)
from .pipeline import PipelineConfig
from .rewards import RewardWeights

CONFIG_ENV = "FORGE_CONFIG"

_TOP_KEYS = {
    "pipeline",
    "rewards",
    "analyzer",
    "generator",
    "templates_dir",
    "image_dir",
    "dataset_path",
    "ledger_path",
    "tokens_file",
    "rollout_size",
}
_PIPELINE_KEYS = {"max_reflection_iters", "max_plan_steps", "per_step_retries", "pass_threshold"}
_REWARD_KEYS = {"alpha_outcome", "alpha_format", "alpha_stepwise", "epsilon"}
_ENDPOINT_KEYS = {"base_url", "api_key", "model", "timeout", "max_retries"}


@dataclass
class ForgeConfig:
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    rewards: RewardWeights = field(default_factory=RewardWeights)
    analyzer: EndpointConfig | None = None
    generator: EndpointConfig | None = None
    templates_dir: str | None = None
    image_dir: str = "images"
    dataset_path: str | None = None
    ledger_path: str | None = None
    tokens_file: str | None = None
    rollout_size: int = 8


def _check_keys(section: str, data: dict, allowed: set[str]) -> None:
    unknown = set(data) - allowed
    if unknown:
        raise ValueError(f"unknown {section} config keys: {sorted(unknown)}")


def _endpoint(data: dict, url_env: str, key_env: str) -> EndpointConfig:
    _check_keys("endpoint", data, _ENDPOINT_KEYS)
    return EndpointConfig(
        base_url=os.environ.get(url_env) or data.get("base_url", ""),
        api_key=os.environ.get(key_env) or data.get("api_key", ""),
        model=data.get("model", ""),
        timeout=data.get("timeout", 120.0),
        max_retries=data.get("max_retries", 3),
    )


def load_config(path: str | Path | None = None) -> ForgeConfig:
    """Load configuration; a missing path yields pure defaults."""
    if path is None:
        path = os.environ.get(CONFIG_ENV)
    if path is None:
        return ForgeConfig()
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    _check_keys("top-level", data, _TOP_KEYS)

    pipeline_data = data.get("pipeline", {})
    _check_keys("pipeline", pipeline_data, _PIPELINE_KEYS)
    rewards_data = data.get("rewards", {})
    _check_keys("rewards", rewards_data, _REWARD_KEYS)

    return ForgeConfig(
        pipeline=PipelineConfig(**pipeline_data),
        rewards=RewardWeights(**rewards_data),
        analyzer=_endpoint(data.get("analyzer", {}), ANALYZER_URL_ENV, ANALYZER_KEY_ENV)
        if "analyzer" in data
        else None,
        generator=_endpoint(
            data.get("generator", {}), GENERATOR_URL_ENV, GENERATOR_KEY_ENV
        )
        if "generator" in data
        else None,
        templates_dir=data.get("templates_dir"),
        image_dir=data.get("image_dir", "images"),
        dataset_path=data.get("dataset_path"),
        ledger_path=data.get("ledger_path"),
        tokens_file=data.get("tokens_file"),
        rollout_size=data.get("rollout_size", 8),
    )
