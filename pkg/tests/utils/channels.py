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

"""Channel builders shared by the unit tests."""

import numpy as np

from src.aqe_wmmse.sysmodel import ChannelSample, SystemConfig
from src.aqe_wmmse.wmmse import wmmse_fixed_phase


def random_sample(
    rng: np.random.Generator, M: int = 2, K: int = 2, N: int = 4
) -> ChannelSample:
    """Unit-variance i.i.d. complex normal channels."""

    def cn(*shape: int) -> np.ndarray:
        return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)

    return ChannelSample(H_AU=cn(K, M), H_AR=cn(N, M), H_RU=cn(K, N))


def labelled(
    samples: list[ChannelSample], system: SystemConfig, seed: int = 0
) -> list[ChannelSample]:
    """Cheap labels: random phases plus fixed-phase WMMSE."""
    rng = np.random.default_rng(seed)
    out = []
    for sample in samples:
        theta = rng.uniform(-np.pi, np.pi, system.N)
        W = wmmse_fixed_phase(sample, theta, system, max_iter=20).W
        out.append(sample.with_labels(W, theta))
    return out
