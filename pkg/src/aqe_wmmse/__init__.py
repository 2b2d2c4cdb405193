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

"""Learned RIS control-message compression with a differentiable WMMSE updater."""

from .errors import (
    AqeError,
    ConfigError,
    DomainError,
    FormatError,
    NumericalError,
    ShapeError,
    TapeError,
    TrainingAborted,
)
from .evaluation import EvalReport, evaluate
from .models import METHODS, build_method, parse_method
from .sysmodel import (
    ChannelSample,
    SystemConfig,
    achievable_rates,
    dataset_read,
    dataset_write,
    dbm_to_watt,
    gen_channels,
    watt_to_dbm,
)
from .training import TrainConfig, load_checkpoint, save_checkpoint, train
from .wmmse import label_samples, wmmse_fixed_phase, wmmse_pi

__all__ = [
    "METHODS",
    "AqeError",
    "ChannelSample",
    "ConfigError",
    "DomainError",
    "EvalReport",
    "FormatError",
    "NumericalError",
    "ShapeError",
    "SystemConfig",
    "TapeError",
    "TrainConfig",
    "TrainingAborted",
    "achievable_rates",
    "build_method",
    "dataset_read",
    "dataset_write",
    "dbm_to_watt",
    "evaluate",
    "gen_channels",
    "label_samples",
    "load_checkpoint",
    "parse_method",
    "save_checkpoint",
    "train",
    "wmmse_fixed_phase",
    "wmmse_pi",
    "watt_to_dbm",
]
