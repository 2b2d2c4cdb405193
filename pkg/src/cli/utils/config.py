# Copyright 2025 The aqe-wmmse Authors
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

import logging
import pathlib
from collections.abc import Sequence

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from src.aqe_wmmse.errors import ConfigError
from src.aqe_wmmse.models import METHODS, parse_method
from src.aqe_wmmse.sysmodel import SystemConfig
from src.aqe_wmmse.training import TrainConfig

logger = logging.getLogger(__name__)

DEFAULT_POWER_DBM = (15.0, 20.0, 25.0, 30.0, 35.0)
DEFAULT_BITS = (10, 20, 40, 100)
DEFAULT_METHODS = (*METHODS, "aqe_wmmse+random")


class ExperimentSpec(BaseModel):
    """Everything one CLI invocation needs to locate inputs and place outputs."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    config: pathlib.Path | None = None
    train_config: pathlib.Path | None = None
    dataset: pathlib.Path | None = None
    methods: tuple[str, ...] = DEFAULT_METHODS
    power_dbm: tuple[float, ...] = DEFAULT_POWER_DBM
    bits: tuple[int, ...] = DEFAULT_BITS
    out: pathlib.Path = pathlib.Path("runs")
    seeds: tuple[int, ...] = (0,)
    jobs: int = Field(1, ge=1)

    @field_validator("methods")
    @classmethod
    def _methods_resolvable(cls, value: tuple[str, ...]) -> tuple[str, ...]:
        if not value:
            raise ValueError("at least one method is required")
        for name in value:
            parse_method(name)
        return value

    @field_validator("power_dbm", "bits", "seeds")
    @classmethod
    def _sorted_nonempty(cls, value: tuple[float, ...]) -> tuple[float, ...]:
        if not value:
            raise ValueError("list must not be empty")
        if list(value) != sorted(set(value)):
            raise ValueError(f"list must be sorted without duplicates, got {list(value)}")
        return value

    @field_validator("bits")
    @classmethod
    def _positive_bits(cls, value: tuple[int, ...]) -> tuple[int, ...]:
        if any(b < 1 for b in value):
            raise ValueError("bit budgets must be positive")
        return value

    def system(self) -> SystemConfig:
        return load_system(self.config)

    def training(self) -> TrainConfig:
        return load_train_config(self.train_config)

    def require_dataset(self) -> pathlib.Path:
        if self.dataset is None:
            raise ConfigError("--dataset is required")
        if not self.dataset.exists():
            raise ConfigError(f"Dataset not found: {self.dataset}")
        return self.dataset


def build_spec(**options: object) -> ExperimentSpec:
    """Validate CLI options, turning pydantic errors into ConfigError."""
    values = {k: v for k, v in options.items() if v is not None}
    try:
        return ExperimentSpec.model_validate(values)
    except ValidationError as err:
        raise ConfigError(f"Invalid experiment options: {err}") from err


def load_system(path: pathlib.Path | None) -> SystemConfig:
    if path is None:
        logger.debug("No scenario config given, using defaults")
        return SystemConfig()
    if not path.exists():
        raise ConfigError(f"Scenario config not found: {path}")
    return SystemConfig.from_file(path)


def load_train_config(path: pathlib.Path | None) -> TrainConfig:
    if path is None:
        return TrainConfig()
    if not path.exists():
        raise ConfigError(f"Train config not found: {path}")
    return TrainConfig.from_file(path)


def split_list(value: str | None) -> tuple[str, ...] | None:
    """Comma-separated option value to a tuple; None passes through."""
    if value is None:
        return None
    return tuple(item.strip() for item in value.split(",") if item.strip())


def parse_floats(value: str | None) -> tuple[float, ...] | None:
    items = split_list(value)
    if items is None:
        return None
    try:
        return tuple(float(v) for v in items)
    except ValueError as err:
        raise ConfigError(f"Expected comma-separated numbers, got {value!r}") from err


def parse_ints(value: str | None) -> tuple[int, ...] | None:
    items = split_list(value)
    if items is None:
        return None
    try:
        return tuple(int(v) for v in items)
    except ValueError as err:
        raise ConfigError(f"Expected comma-separated integers, got {value!r}") from err


def system_for_bits(system: SystemConfig, bits: int) -> SystemConfig:
    """Same scenario with N_c = B / log2(D); B must be a multiple of log2(D)."""
    per_feature = system.bits_per_feature
    if bits % per_feature:
        raise ConfigError(
            f"B={bits} is not a multiple of log2(D)={per_feature} bits per feature"
        )
    return SystemConfig.model_validate({**system.model_dump(), "N_c": bits // per_feature})


def trainable_methods(methods: Sequence[str]) -> list[str]:
    """Base identifiers that need a checkpoint, in first-seen order."""
    bases: list[str] = []
    for name in methods:
        base, _ = parse_method(name)
        if base not in ("upper_bound", "naive") and base not in bases:
            bases.append(base)
    return bases
