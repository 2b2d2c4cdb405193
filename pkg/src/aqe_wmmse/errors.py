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

"""Exception types raised by the library."""


class AqeError(Exception):
    """Base class for all library errors."""


class ConfigError(AqeError, ValueError):
    """Invalid scenario, training or experiment configuration."""


class ShapeError(AqeError, ValueError):
    """Array or tensor dimensions do not match."""


class DomainError(AqeError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class FormatError(AqeError, ValueError):
    """Malformed dataset, checkpoint or control-message bytes."""


class NumericalError(AqeError, ArithmeticError):
    """NaN values, failed solves or degenerate weights."""


class TapeError(AqeError, RuntimeError):
    """Misuse of the autodiff tape."""


class TrainingAborted(NumericalError):
    """Training stopped on a non-finite loss."""

    def __init__(self, message: str, epoch: int, batch: int) -> None:
        super().__init__(f"{message} (epoch {epoch}, batch {batch})")
        self.epoch = epoch
        self.batch = batch
