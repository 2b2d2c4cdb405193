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

import pathlib

import numpy as np
import pytest
import yaml

from src.aqe_wmmse.sysmodel import (
    ChannelBatch,
    ChannelSample,
    SystemConfig,
    dataset_write,
    stack_samples,
)
from src.aqe_wmmse.wmmse import label_samples
from tests.utils.channels import labelled, random_sample


@pytest.fixture
def toy_system() -> SystemConfig:
    """Unit-scale scenario where every solve is well conditioned."""
    return SystemConfig(M=2, K=2, N=4, N_c=2, P=1.0, sigma2=0.1, R=4)


@pytest.fixture
def toy_sample() -> ChannelSample:
    return random_sample(np.random.default_rng(7))


@pytest.fixture
def toy_batch(toy_system: SystemConfig) -> ChannelBatch:
    rng = np.random.default_rng(11)
    samples = [random_sample(rng) for _ in range(6)]
    return stack_samples(labelled(samples, toy_system))


@pytest.fixture(scope="session")
def optimized_batch() -> ChannelBatch:
    """Samples labelled by the joint phase/beamformer iteration."""
    system = SystemConfig(M=2, K=2, N=4, N_c=2, P=1.0, sigma2=0.1, R=4)
    rng = np.random.default_rng(13)
    samples = [random_sample(rng) for _ in range(10)]
    return stack_samples(label_samples(samples, system, outer_iters=10))


@pytest.fixture
def experiment_dir(tmp_path: pathlib.Path) -> pathlib.Path:
    """Scenario, training schedule and a cheaply labelled 25-sample dataset."""
    system = SystemConfig(M=2, K=2, N=4, N_c=2, P=1.0, sigma2=0.1, R=4)
    (tmp_path / "scenario.yaml").write_text(yaml.safe_dump(system.model_dump(mode="json")))
    (tmp_path / "train.yaml").write_text(
        yaml.safe_dump(
            {"batch_size": 4, "eval_batch_size": 8, "max_epochs": 3, "dropout": 0.0, "lr": 1e-2}
        )
    )
    rng = np.random.default_rng(17)
    samples = labelled([random_sample(rng) for _ in range(25)], system)
    dataset_write(tmp_path / "data.bin", samples, system)
    return tmp_path
