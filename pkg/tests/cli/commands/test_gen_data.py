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
from click.testing import CliRunner

from src.aqe_wmmse.sysmodel import SystemConfig, dataset_read
from src.cli.commands.gen_data import gen_data, sample_seeds
from tests.utils.output import flat_output


def test_sample_seeds_are_stable() -> None:
    assert sample_seeds(5, 4) == sample_seeds(5, 4)
    assert sample_seeds(5, 4)[:3] != sample_seeds(6, 4)[:3]
    assert len(set(sample_seeds(0, 100))) == 100


def test_gen_data_writes_labelled_samples(experiment_dir: pathlib.Path) -> None:
    runner = CliRunner()
    out = experiment_dir / "fresh.bin"
    args = ["--config", str(experiment_dir / "scenario.yaml"), "--n", "3", "--outer-iters", "2"]
    result = runner.invoke(gen_data, [*args, "--out", str(out)])

    assert result.exit_code == 0, result.output
    assert "Generating 3 samples" in flat_output(result.output)
    data = dataset_read(out)
    assert data.config == SystemConfig.from_file(experiment_dir / "scenario.yaml")
    assert len(data.samples) == 3
    assert all(s.has_labels for s in data.samples)
    power = [np.sum(np.abs(s.W_opt) ** 2) for s in data.samples]
    assert max(power) <= data.config.P * (1 + 1e-9)

    again = experiment_dir / "again.bin"
    assert runner.invoke(gen_data, [*args, "--out", str(again)]).exit_code == 0
    assert out.read_bytes() == again.read_bytes()


def test_gen_data_rejects_empty_request(tmp_path: pathlib.Path) -> None:
    result = CliRunner().invoke(gen_data, ["--n", "0", "--out", str(tmp_path / "d.bin")])
    assert result.exit_code == 1
    assert "Error" in result.output
    assert not (tmp_path / "d.bin").exists()


def test_gen_data_missing_config(tmp_path: pathlib.Path) -> None:
    result = CliRunner().invoke(
        gen_data,
        ["--config", str(tmp_path / "nope.yaml"), "--n", "1", "--out", str(tmp_path / "d.bin")],
    )
    assert result.exit_code == 1
    assert "Scenario config not found" in flat_output(result.output)
