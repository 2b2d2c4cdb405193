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

from .config import (
    ExperimentSpec,
    build_spec,
    load_system,
    load_train_config,
    parse_floats,
    parse_ints,
    split_list,
    system_for_bits,
    trainable_methods,
)
from .logging import handle_cli_error, setup_logging

__all__ = [
    "ExperimentSpec",
    "build_spec",
    "handle_cli_error",
    "load_system",
    "load_train_config",
    "parse_floats",
    "parse_ints",
    "setup_logging",
    "split_list",
    "system_for_bits",
    "trainable_methods",
]
