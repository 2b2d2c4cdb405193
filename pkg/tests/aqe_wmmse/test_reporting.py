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
from pytest_mock import MockerFixture

from src.aqe_wmmse.errors import FormatError
from src.aqe_wmmse.evaluation import EvalReport
from src.aqe_wmmse.reporting import (
    SweepPoint,
    plot_csv,
    plot_sweep,
    read_history_csv,
    read_report_csv,
    read_sweep_csv,
    write_history_csv,
    write_report_csv,
    write_sweep_csv,
)
from src.aqe_wmmse.training import HistoryRow

POINTS = [
    SweepPoint("linq", 25.0, 3.1, 0.2),
    SweepPoint("aqe_wmmse", 25.0, 4.0, 0.1),
    SweepPoint("aqe_wmmse", 15.0, 2.5, 0.1),
    SweepPoint("linq", 15.0, 2.0, 0.3),
]


def test_history_csv(tmp_path: pathlib.Path) -> None:
    rows = [HistoryRow(1, -1.5, -1.25, 1e-3), HistoryRow(2, -1.0 / 3.0, -1.3, 8e-4)]
    path = write_history_csv(tmp_path / "history" / "run.csv", rows)
    assert path.read_text().splitlines()[0] == "epoch,train_loss,val_loss,lr"
    assert read_history_csv(path) == rows
    assert not list(tmp_path.rglob("*.partial"))


class TestReportCsv:
    def test_schema(self, tmp_path: pathlib.Path) -> None:
        reports = [
            EvalReport("aqe_wmmse", 1.0, 8, np.array([3.0, 5.0])),
            EvalReport("naive+random", 0.1, 16, np.array([1.0])),
        ]
        path = write_report_csv(tmp_path / "report.csv", reports)
        lines = path.read_text().splitlines()
        assert lines[0] == "method,P_dBm,B,mean_rate,ci95"
        assert lines[1].startswith("aqe_wmmse,30,8,4.0,")
        assert lines[2] == "naive+random,20,16,1.0,0.0"
        assert [r["method"] for r in read_report_csv(path)] == ["aqe_wmmse", "naive+random"]

    def test_wrong_columns(self, tmp_path: pathlib.Path) -> None:
        path = tmp_path / "report.csv"
        path.write_text("method,P,B\naqe,30,8\n")
        with pytest.raises(FormatError, match="columns"):
            read_report_csv(path)


class TestSweepCsv:
    def test_rows_are_sorted_by_method_then_value(self, tmp_path: pathlib.Path) -> None:
        path = write_sweep_csv(tmp_path / "sweep_P_dBm.csv", "P_dBm", POINTS)
        lines = path.read_text().splitlines()
        assert lines[0] == "method,P_dBm,mean_rate,ci95"
        assert [line.split(",")[:2] for line in lines[1:]] == [
            ["aqe_wmmse", "15"],
            ["aqe_wmmse", "25"],
            ["linq", "15"],
            ["linq", "25"],
        ]
        axis, points = read_sweep_csv(path)
        assert axis == "P_dBm"
        assert sorted(points, key=lambda p: (p.method, p.value)) == points
        assert set(points) == set(POINTS)

    def test_bits_axis(self, tmp_path: pathlib.Path) -> None:
        points = [SweepPoint("aqe", 40.0, 3.0, 0.1)]
        path = write_sweep_csv(tmp_path / "sweep_B.csv", "B", points)
        assert path.read_text().splitlines() == ["method,B,mean_rate,ci95", "aqe,40,3.0,0.1"]
        assert read_sweep_csv(path) == ("B", points)

    def test_unknown_axis(self, tmp_path: pathlib.Path) -> None:
        with pytest.raises(FormatError):
            write_sweep_csv(tmp_path / "sweep.csv", "N", POINTS)

    def test_history_is_not_a_sweep(self, tmp_path: pathlib.Path) -> None:
        path = write_history_csv(tmp_path / "h.csv", [HistoryRow(1, 0.0, 0.0, 1e-3)])
        with pytest.raises(FormatError):
            read_sweep_csv(path)


class TestPlots:
    def test_svg_is_reproducible(self, tmp_path: pathlib.Path) -> None:
        csv_path = write_sweep_csv(tmp_path / "sweep_P_dBm.csv", "P_dBm", POINTS)
        first = plot_sweep(csv_path, tmp_path / "a.svg").read_bytes()
        second = plot_sweep(csv_path, tmp_path / "b.svg").read_bytes()
        assert first == second
        assert b"<svg" in first
        assert b"<dc:date>" not in first
        assert not list(tmp_path.glob("*.partial"))

    def test_plot_csv_dispatches_on_the_header(
        self, tmp_path: pathlib.Path, mocker: MockerFixture
    ) -> None:
        history = write_history_csv(tmp_path / "h.csv", [HistoryRow(1, -1.0, -1.0, 1e-3)])
        sweep = write_sweep_csv(tmp_path / "s.csv", "B", POINTS)
        mock_history = mocker.patch("src.aqe_wmmse.reporting.plot_history")
        mock_sweep = mocker.patch("src.aqe_wmmse.reporting.plot_sweep")
        plot_csv(history, tmp_path / "h.svg")
        plot_csv(sweep, tmp_path / "s.svg")
        mock_history.assert_called_once_with(history, tmp_path / "h.svg")
        mock_sweep.assert_called_once_with(sweep, tmp_path / "s.svg")

    def test_history_chart(self, tmp_path: pathlib.Path) -> None:
        rows = [HistoryRow(e, -float(e), -0.9 * e, 1e-3) for e in range(1, 6)]
        csv_path = write_history_csv(tmp_path / "h.csv", rows)
        assert plot_csv(csv_path, tmp_path / "h.svg").stat().st_size > 0
