# Copyright 2025 Liatrio
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""
Layered configuration for pipeline runs.

Precedence, highest first: explicit values (CLI flags), ``TRIANGLE_STREAM_*``
environment variables, a ``key = value`` config file, dataclass defaults.
"""

import os
from pathlib import Path
from typing import Any, Mapping, Optional, Union

from .pipeline import ConfigError, PipelineConfig
from .telemetry import get_logger

logger = get_logger()

ENV_PREFIX = "TRIANGLE_STREAM_"

ENV_KEYS = {
    "ALGORITHM": "algorithm",
    "K": "k",
    "BUDGET": "budget",
    "THETA": "theta",
    "SEED": "seed",
    "AGGREGATION": "aggregation",
    "EXECUTION": "execution",
    "INSTRUMENT": "instrumentation",
    "CHANNEL_CAPACITY": "channel_capacity",
    "MAPPING": "mapping",
    "EAGER_ZERO": "eager_zero",
}

DEFAULT_JOBS = 1


def load_config_file(path: Union[str, Path]) -> dict[str, str]:
    """Read ``key = value`` lines; ``#`` starts a comment.

    Raises:
        ConfigError: On a line without ``=`` or a repeated key.
    """
    values: dict[str, str] = {}
    try:
        with open(path, "r", encoding="utf-8") as handle:
            lines = handle.readlines()
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e

    for line_number, line in enumerate(lines, start=1):
        content = line.split("#", 1)[0].strip()
        if not content:
            continue
        key, sep, value = content.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{line_number}: expected key = value")
        key = key.strip().lower().replace("-", "_")
        if key in values:
            raise ConfigError(f"{path}:{line_number}: duplicate key {key}")
        values[key] = value.strip()
    return values


def env_overrides(environ: Optional[Mapping[str, str]] = None) -> dict[str, str]:
    """Pipeline settings present in the environment."""
    environ = os.environ if environ is None else environ
    values = {}
    for suffix, key in ENV_KEYS.items():
        raw = environ.get(ENV_PREFIX + suffix)
        if raw is not None and raw.strip():
            values[key] = raw.strip()
    return values


def resolve_config(
    flags: Optional[Mapping[str, Any]] = None,
    config_path: Optional[Union[str, Path]] = None,
    environ: Optional[Mapping[str, str]] = None,
) -> PipelineConfig:
    """Merge every configuration layer into one validated ``PipelineConfig``.

    ``None`` flag values mean "not given" and fall through to lower layers.
    """
    merged: dict[str, Any] = {}
    if config_path is not None:
        merged.update(load_config_file(config_path))
    merged.update(env_overrides(environ))
    if flags:
        merged.update({key: value for key, value in flags.items() if value is not None})

    config = PipelineConfig.from_mapping(merged)
    logger.debug("Resolved pipeline configuration", extra=config.to_dict())
    return config


def resolve_jobs(
    flag: Optional[int] = None, environ: Optional[Mapping[str, str]] = None
) -> int:
    """Trial thread-pool size from ``--jobs`` or ``TRIANGLE_STREAM_JOBS``."""
    environ = os.environ if environ is None else environ
    if flag is not None:
        jobs = flag
    else:
        raw = environ.get(ENV_PREFIX + "JOBS", "").strip()
        try:
            jobs = int(raw) if raw else DEFAULT_JOBS
        except ValueError:
            raise ConfigError(
                f"{ENV_PREFIX}JOBS must be an integer, got {raw!r}"
            ) from None
    if jobs < 1:
        raise ConfigError(f"jobs must be at least 1, got {jobs}")
    return jobs
