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

"""Pipelines compared in experiments, all mapping labelled channels to (W, theta).

Identifiers are stable and used in file names and reports; appending
``+random`` to any of them selects the fallback where the RIS applies random
phases while the access point keeps the method's beamformer.
"""

import dataclasses
from typing import ClassVar

import numpy as np

from .aqe import AutoQuantizationEncoder, Quantizer, encoder_features
from .autodiff import Affine, Module, Tensor, ops
from .errors import ConfigError
from .sysmodel import ChannelBatch, SystemConfig
from .updater import ChannelTensors, InitMode, Updater, effective_channel
from .wmmse import wrap_phase

METHODS = ("upper_bound", "aqe_wmmse", "aqe", "linq", "naive")
FALLBACK_SUFFIX = "+random"


def parse_method(name: str) -> tuple[str, bool]:
    """Split ``<method>[+random]`` into (base identifier, fallback flag)."""
    fallback = name.endswith(FALLBACK_SUFFIX)
    base = name.removesuffix(FALLBACK_SUFFIX)
    if base not in METHODS:
        raise ConfigError(f"unknown method {name!r}; choose from {', '.join(METHODS)}")
    return base, fallback


@dataclasses.dataclass
class MethodOutput:
    W: Tensor
    theta: Tensor

    def beamformers(self) -> np.ndarray:
        return ops.to_complex(self.W.data)


class Method(Module):
    name: ClassVar[str]
    trainable: ClassVar[bool] = True

    def __init__(self, system: SystemConfig) -> None:
        super().__init__()
        self.system = system

    @property
    def message_bits(self) -> int:
        return self.system.B

    def fit_normalization(self, batch: ChannelBatch) -> None:
        """Fix input statistics from the training split."""

    def forward(
        self,
        channels: ChannelTensors,
        batch: ChannelBatch,
        P: float,
        rng: np.random.Generator | None = None,
    ) -> MethodOutput:
        raise NotImplementedError


class UpperBound(Method):
    name = "upper_bound"
    trainable = False

    def forward(
        self,
        channels: ChannelTensors,
        batch: ChannelBatch,
        P: float,
        rng: np.random.Generator | None = None,
    ) -> MethodOutput:
        return MethodOutput(ops.complex_tensor(batch.W_opt), Tensor(batch.theta_opt))


class NaiveQuantize(Method):
    """(pi / 2) sign(wrap(theta_opt)) with W_opt unchanged; one bit per element."""

    name = "naive"
    trainable = False

    @property
    def message_bits(self) -> int:
        return self.system.N

    def forward(
        self,
        channels: ChannelTensors,
        batch: ChannelBatch,
        P: float,
        rng: np.random.Generator | None = None,
    ) -> MethodOutput:
        theta = np.where(wrap_phase(batch.theta_opt) >= 0, np.pi / 2, -np.pi / 2)
        return MethodOutput(ops.complex_tensor(batch.W_opt), Tensor(theta))


class Aqe(Method):
    """AQE alone: decoded phases, W = W_opt."""

    name = "aqe"

    def __init__(self, system: SystemConfig, rng: np.random.Generator, dropout: float = 0.5) -> None:
        super().__init__(system)
        self.aqe = AutoQuantizationEncoder(
            system.M, system.K, system.N, system.N_c, system.D, rng, dropout
        )
        self.add_child("aqe", self.aqe)

    def fit_normalization(self, batch: ChannelBatch) -> None:
        x = encoder_features(batch.theta_opt, batch.W_opt, self.system.P)
        self.aqe.encoder.normalizer.fit(x)

    def decoded_phases(
        self, batch: ChannelBatch, P: float, rng: np.random.Generator | None
    ) -> Tensor:
        return self.aqe(Tensor(encoder_features(batch.theta_opt, batch.W_opt, P)), rng)

    def forward(
        self,
        channels: ChannelTensors,
        batch: ChannelBatch,
        P: float,
        rng: np.random.Generator | None = None,
    ) -> MethodOutput:
        return MethodOutput(ops.complex_tensor(batch.W_opt), self.decoded_phases(batch, P, rng))


class AqeWmmse(Aqe):
    """AQE followed by the WMMSE updater on the decoded effective channel."""

    name = "aqe_wmmse"

    def __init__(
        self,
        system: SystemConfig,
        rng: np.random.Generator,
        dropout: float = 0.5,
        unrolled_layers: int = 1,
        init_mode: InitMode = "learned",
    ) -> None:
        super().__init__(system, rng, dropout)
        self.updater = Updater(system.M, system.K, rng, dropout, unrolled_layers, init_mode)
        self.add_child("updater", self.updater)

    def fit_normalization(self, batch: ChannelBatch) -> None:
        super().fit_normalization(batch)
        G = effective_channel(ChannelTensors.from_batch(batch), Tensor(batch.theta_opt))
        self.updater.fit_scale(ops.to_complex(G.data))

    def forward(
        self,
        channels: ChannelTensors,
        batch: ChannelBatch,
        P: float,
        rng: np.random.Generator | None = None,
    ) -> MethodOutput:
        theta = self.decoded_phases(batch, P, rng)
        G = effective_channel(channels, theta)
        W = self.updater.beamform(batch.W_opt, G, P, self.system.sigma2, self.system.p, rng)
        return MethodOutput(W, theta)


class LinQ(Method):
    """theta = f_D(f_Q(f_C(theta_opt))), W = f_W(W_opt); every f affine."""

    name = "linq"

    def __init__(self, system: SystemConfig, rng: np.random.Generator) -> None:
        super().__init__(system)
        width = 2 * system.M * system.K
        self.f_C = Affine(system.N, system.N_c, rng)
        self.quantizer = Quantizer(system.D)
        self.f_D = Affine(system.N_c, system.N, rng)
        self.f_W = Affine(width, width, rng)
        for name, child in (
            ("f_C", self.f_C),
            ("quantizer", self.quantizer),
            ("f_D", self.f_D),
            ("f_W", self.f_W),
        ):
            self.add_child(name, child)

    def forward(
        self,
        channels: ChannelTensors,
        batch: ChannelBatch,
        P: float,
        rng: np.random.Generator | None = None,
    ) -> MethodOutput:
        S = len(batch)
        M, K = self.system.M, self.system.K
        theta = self.f_D(self.quantizer(self.f_C(Tensor(batch.theta_opt))))
        W_in = ops.complex_tensor(np.asarray(batch.W_opt) / np.sqrt(P))
        W = ops.reshape(self.f_W(ops.reshape(W_in, (S, -1))), (S, M, K, 2))
        norm = ops.sqrt(ops.sum(ops.cabs2(W), axis=(1, 2)))
        W = ops.creal_scale(W, ops.reshape(ops.div(np.sqrt(P), norm), (S, 1, 1)))
        return MethodOutput(W, theta)


def build_method(
    name: str,
    system: SystemConfig,
    seed: int = 0,
    dropout: float = 0.5,
    unrolled_layers: int = 1,
    init_mode: InitMode = "learned",
) -> Method:
    """Instantiate a method with freshly initialized parameters."""
    base, _ = parse_method(name)
    rng = np.random.default_rng(seed)
    if base == "upper_bound":
        return UpperBound(system)
    if base == "naive":
        return NaiveQuantize(system)
    if base == "aqe":
        return Aqe(system, rng, dropout)
    if base == "linq":
        return LinQ(system, rng)
    return AqeWmmse(system, rng, dropout, unrolled_layers, init_mode)
