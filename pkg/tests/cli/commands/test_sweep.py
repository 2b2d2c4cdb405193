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

import pytest
from click.testing import CliRunner
from pytest_mock import MockerFixture

from src.aqe_wmmse.reporting import read_sweep_csv
from src.cli.commands.sweep import sweep_bits, sweep_power
from tests.utils.output import flat_output


def data_args(root: pathlib.Path) -> list[str]:
    return [
        "--config",
        str(root / "scenario.yaml"),
        "--train-config",
        str(root / "train.yaml"),
        "--dataset",
        str(root / "data.bin"),
        "--out",
        str(root / "runs"),
    ]


class TestSweepPower:
    def test_baselines(self, experiment_dir: pathlib.Path) -> None:
        result = CliRunner().invoke(
            sweep_power,
            [*data_args(experiment_dir), "--methods", "upper_bound,naive", "--power-dbm", "20,30"],
        )

        assert result.exit_code == 0, result.output
        runs = experiment_dir / "runs"
        axis, points = read_sweep_csv(runs / "sweep_P_dBm.csv")
        assert axis == "P_dBm"
        assert [(p.method, p.value) for p in points] == [
            ("naive", 20.0),
            ("naive", 30.0),
            ("upper_bound", 20.0),
            ("upper_bound", 30.0),
        ]
        bound = [p.mean_rate for p in points if p.method == "upper_bound"]
        assert bound[0] < bound[1]
        assert (runs / "sweep_P_dBm.svg").read_bytes().lstrip().startswith(b"<?xml")

    def test_missing_checkpoints_are_skipped(self, experiment_dir: pathlib.Path) -> None:
        result = CliRunner().invoke(
            sweep_power,
            [*data_args(experiment_dir), "--methods", "upper_bound,linq", "--power-dbm", "30"],
        )

        assert result.exit_code == 0, result.output
        assert "Skipped (no checkpoint): linq@30" in flat_output(result.output)
        _, points = read_sweep_csv(experiment_dir / "runs" / "sweep_P_dBm.csv")
        assert {p.method for p in points} == {"upper_bound"}

    def test_non_monotone_curve_is_flagged(
        self, experiment_dir: pathlib.Path, mocker: MockerFixture
    ) -> None:
        mock_flag = mocker.patch("src.cli.commands.sweep.flag_non_monotone")
        result = CliRunner().invoke(
            sweep_power,
            [*data_args(experiment_dir), "--methods", "naive", "--power-dbm", "20,25"],
        )
        assert result.exit_code == 0, result.output
        mock_flag.assert_called_once()

    def test_unsorted_powers(self, experiment_dir: pathlib.Path) -> None:
        result = CliRunner().invoke(
            sweep_power, [*data_args(experiment_dir), "--power-dbm", "30,20"]
        )
        assert result.exit_code == 1
        assert "sorted" in flat_output(result.output)


class TestSweepBits:
    def test_train_missing_then_sweep(self, experiment_dir: pathlib.Path) -> None:
        result = CliRunner().invoke(
            sweep_bits,
            [
                *data_args(experiment_dir),
                "--methods",
                "naive,aqe",
                "--bits",
                "2,3",
                "--train-missing",
                "--epochs",
                "1",
            ],
        )

        assert result.exit_code == 0, result.output
        runs = experiment_dir / "runs"
        assert (runs / "checkpoints" / "aqe_B2_seed0.ckpt").exists()
        assert (runs / "checkpoints" / "aqe_B3_seed0.ckpt").exists()
        axis, points = read_sweep_csv(runs / "sweep_B.csv")
        assert axis == "B"
        assert [(p.method, p.value) for p in points] == [
            ("aqe", 2.0),
            ("aqe", 3.0),
            ("naive", 4.0),
        ]

    def test_existing_checkpoints_are_reused(
        self, experiment_dir: pathlib.Path, mocker: MockerFixture
    ) -> None:
        runner = CliRunner()
        args = [*data_args(experiment_dir), "--methods", "linq", "--bits", "2", "--train-missing"]
        assert runner.invoke(sweep_bits, [*args, "--epochs", "1"]).exit_code == 0
        mock_train = mocker.patch("src.cli.commands.sweep.run_train_task")
        result = runner.invoke(sweep_bits, args)
        assert result.exit_code == 0, result.output
        mock_train.assert_not_called()

    @pytest.mark.parametrize("bits", ["0,2", "2,2", "x"])
    def test_invalid_bit_budgets(self, experiment_dir: pathlib.Path, bits: str) -> None:
        result = CliRunner().invoke(sweep_bits, [*data_args(experiment_dir), "--bits", bits])
        assert result.exit_code == 1
        assert "Error" in result.output
