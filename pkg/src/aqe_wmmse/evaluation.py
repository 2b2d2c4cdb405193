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

"""Test-set evaluation of trained and baseline methods."""

import dataclasses
import logging

import numpy as np

from .models import FALLBACK_SUFFIX, Method
from .sysmodel import ChannelBatch, ChannelSample, SystemConfig, achievable_rates, watt_to_dbm
from .updater import ChannelTensors
from .wmmse import random_phase, wmmse_fixed_phase

logger = logging.getLogger(__name__)

Z_95 = 1.96


def confidence_interval(values: np.ndarray) -> float:
    """Half-width of the normal-approximation 95% interval of the mean."""
    values = np.asarray(values, dtype=np.float64)
    if values.size < 2:
        return 0.0
    return float(Z_95 * values.std(ddof=1) / np.sqrt(values.size))


@dataclasses.dataclass(frozen=True)
class EvalReport:
    method: str
    P: float
    B: int
    per_sample: np.ndarray

    @property
    def mean(self) -> float:
        return float(np.mean(self.per_sample))

    @property
    def ci95(self) -> float:
        return confidence_interval(self.per_sample)

    @property
    def P_dbm(self) -> float:
        return watt_to_dbm(self.P)

    def merged(self, other: "EvalReport") -> "EvalReport":
        """Pool per-sample rates of two runs (e.g. seeds) of the same method and grid point."""
        return dataclasses.replace(
            self, per_sample=np.concatenate([self.per_sample, other.per_sample])
        )


def _sample(batch: ChannelBatch, i: int) -> ChannelSample:
    return ChannelSample(H_AU=batch.H_AU[i], H_AR=batch.H_AR[i], H_RU=batch.H_RU[i])


def _upper_bound_at_power(
    batch: ChannelBatch, system: SystemConfig, P: float
) -> tuple[np.ndarray, np.ndarray]:
    """Re-run fixed-phase WMMSE at power P from theta_opt, warm-started from W_opt."""
    scaled = system.with_power(P)
    W = np.empty_like(batch.W_opt)
    for i in range(len(batch)):
        warm = batch.W_opt[i] * np.sqrt(P / system.P)
        W[i] = wmmse_fixed_phase(_sample(batch, i), batch.theta_opt[i], scaled, W0=warm).W
    return W, batch.theta_opt


def evaluate(
    method: Method,
    test_set: ChannelBatch,
    system: SystemConfig,
    P: float | None = None,
    fallback: bool = False,
    seed: int = 0,
    batch_size: int = 256,
) -> EvalReport:
    """Per-sample weighted sum-rates in eval mode.

    ``P`` overrides the transmit power: W_opt is rescaled by sqrt(P / system.P)
    and fed to the method with budget P. ``fallback`` keeps the method's W but
    lets the RIS apply uniformly random phases.
    """
    power = system.P if P is None else float(P)
    scaled_system = system.with_power(power)
    rng = np.random.default_rng(seed)
    method.eval()

    rates = np.empty(len(test_set))
    for start in range(0, len(test_set), batch_size):
        chunk = test_set.subset(slice(start, start + batch_size))
        if method.name == "upper_bound" and power != system.P:
            W, theta = _upper_bound_at_power(chunk, system, power)
        else:
            chunk = dataclasses.replace(chunk, W_opt=chunk.W_opt * np.sqrt(power / system.P))
            out = method.forward(ChannelTensors.from_batch(chunk), chunk, power)
            W, theta = out.beamformers(), out.theta.data
        for i in range(len(chunk)):
            applied = random_phase(rng, system.N) if fallback else theta[i]
            report = achievable_rates(W[i], applied, _sample(chunk, i), scaled_system)
            rates[start + i] = report.weighted_sum

    name = method.name + (FALLBACK_SUFFIX if fallback else "")
    result = EvalReport(method=name, P=power, B=method.message_bits, per_sample=rates)
    logger.info(
        f"{name} at {result.P_dbm:.1f} dBm, B={result.B}: "
        f"{result.mean:.4f} +/- {result.ci95:.4f} bits/s/Hz over {len(rates)} samples"
    )
    return result
