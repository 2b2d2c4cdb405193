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

"""Minimal reverse-mode automatic differentiation over float64 numpy arrays."""

from . import ops
from .gradcheck import GradCheckReport, grad_check
from .layers import Abs, Affine, BatchNorm, Dropout, Module, ReLU, Sequential, mlp
from .optim import Adam, AdamState, EarlyStopping, PlateauScheduler, adam_step
from .tensor import Mode, Tape, Tensor, as_tensor, current_tape

__all__ = [
    "Abs",
    "Adam",
    "AdamState",
    "Affine",
    "BatchNorm",
    "Dropout",
    "EarlyStopping",
    "GradCheckReport",
    "Mode",
    "Module",
    "PlateauScheduler",
    "ReLU",
    "Sequential",
    "Tape",
    "Tensor",
    "adam_step",
    "as_tensor",
    "current_tape",
    "grad_check",
    "mlp",
    "ops",
]
