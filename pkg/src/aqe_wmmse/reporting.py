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

"""CSV artifacts and SVG charts.

Schemas:

- history: ``epoch,train_loss,val_loss,lr``
- report: ``method,P_dBm,B,mean_rate,ci95``
- sweep: ``method,<axis>,mean_rate,ci95`` with axis ``P_dBm`` or ``B``

Charts are rendered from the CSV alone, so rerunning ``plot`` reproduces them.
"""

import csv
import dataclasses
import os
import pathlib
from collections.abc import Iterable, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .container import partial_path  # noqa: E402
from .errors import FormatError  # noqa: E402
from .evaluation import EvalReport  # noqa: E402
from .training import HistoryRow  # noqa: E402

HISTORY_COLUMNS = ("epoch", "train_loss", "val_loss", "lr")
REPORT_COLUMNS = ("method", "P_dBm", "B", "mean_rate", "ci95")
SWEEP_AXES = ("P_dBm", "B")
SVG_SALT = "aqe-wmmse"


@dataclasses.dataclass(frozen=True)
class SweepPoint:
    method: str
    value: float
    mean_rate: float
    ci95: float


def _write_rows(
    path: str | os.PathLike[str], header: Sequence[str], rows: Iterable[Sequence[object]]
) -> pathlib.Path:
    target = pathlib.Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    tmp = partial_path(target)
    with open(tmp, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(rows)
    os.replace(tmp, target)
    return target


def _read_rows(path: str | os.PathLike[str], expected: Sequence[str]) -> list[dict[str, str]]:
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if tuple(reader.fieldnames or ()) != tuple(expected):
            raise FormatError(f"{path}: columns {reader.fieldnames}, expected {list(expected)}")
        return list(reader)


def write_history_csv(path: str | os.PathLike[str], history: Sequence[HistoryRow]) -> pathlib.Path:
    return _write_rows(
        path,
        HISTORY_COLUMNS,
        ((r.epoch, repr(r.train_loss), repr(r.val_loss), repr(r.lr)) for r in history),
    )


def read_history_csv(path: str | os.PathLike[str]) -> list[HistoryRow]:
    return [
        HistoryRow(int(r["epoch"]), float(r["train_loss"]), float(r["val_loss"]), float(r["lr"]))
        for r in _read_rows(path, HISTORY_COLUMNS)
    ]


def write_report_csv(path: str | os.PathLike[str], reports: Sequence[EvalReport]) -> pathlib.Path:
    return _write_rows(
        path,
        REPORT_COLUMNS,
        ((r.method, f"{r.P_dbm:.6g}", r.B, repr(r.mean), repr(r.ci95)) for r in reports),
    )


def read_report_csv(path: str | os.PathLike[str]) -> list[dict[str, str]]:
    return _read_rows(path, REPORT_COLUMNS)


def sweep_columns(axis: str) -> tuple[str, ...]:
    if axis not in SWEEP_AXES:
        raise FormatError(f"unknown sweep axis {axis!r}")
    return ("method", axis, "mean_rate", "ci95")


def write_sweep_csv(
    path: str | os.PathLike[str], axis: str, points: Sequence[SweepPoint]
) -> pathlib.Path:
    ordered = sorted(points, key=lambda p: (p.method, p.value))
    return _write_rows(
        path,
        sweep_columns(axis),
        ((p.method, f"{p.value:.6g}", repr(p.mean_rate), repr(p.ci95)) for p in ordered),
    )


def read_sweep_csv(path: str | os.PathLike[str]) -> tuple[str, list[SweepPoint]]:
    with open(path, newline="") as f:
        header = next(csv.reader(f), [])
    if len(header) != 4:
        raise FormatError(f"{path}: not a sweep table (header {header})")
    axis = header[1]
    rows = _read_rows(path, sweep_columns(axis))
    return axis, [
        SweepPoint(r["method"], float(r[axis]), float(r["mean_rate"]), float(r["ci95"]))
        for r in rows
    ]


def _save_svg(fig: "plt.Figure", path: str | os.PathLike[str]) -> pathlib.Path:
    target = pathlib.Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    tmp = partial_path(target)
    with plt.rc_context({"svg.hashsalt": SVG_SALT}):
        fig.savefig(tmp, format="svg", metadata={"Date": None})
    plt.close(fig)
    os.replace(tmp, target)
    return target


def plot_sweep(csv_path: str | os.PathLike[str], svg_path: str | os.PathLike[str]) -> pathlib.Path:
    """Weighted sum-rate against the sweep axis, one series per method."""
    axis, points = read_sweep_csv(csv_path)
    fig, ax = plt.subplots(figsize=(6, 4))
    for method in sorted({p.method for p in points}):
        series = sorted((p for p in points if p.method == method), key=lambda p: p.value)
        ax.errorbar(
            [p.value for p in series],
            [p.mean_rate for p in series],
            yerr=[p.ci95 for p in series],
            fmt="-o",
            capsize=3,
            label=method,
        )
    ax.set_xlabel("Transmit power [dBm]" if axis == "P_dBm" else "Control bits B")
    ax.set_ylabel("Weighted sum-rate [bits/s/Hz]")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    return _save_svg(fig, svg_path)


def plot_history(csv_path: str | os.PathLike[str], svg_path: str | os.PathLike[str]) -> pathlib.Path:
    """Train and validation loss per epoch."""
    history = read_history_csv(csv_path)
    fig, ax = plt.subplots(figsize=(6, 4))
    epochs = [r.epoch for r in history]
    ax.plot(epochs, [r.train_loss for r in history], label="train")
    ax.plot(epochs, [r.val_loss for r in history], label="validation")
    ax.set_xlabel("Epoch")
    ax.set_ylabel("Loss")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    return _save_svg(fig, svg_path)


def plot_csv(csv_path: str | os.PathLike[str], svg_path: str | os.PathLike[str]) -> pathlib.Path:
    """Pick the chart type from the CSV header."""
    with open(csv_path, newline="") as f:
        header = tuple(next(csv.reader(f), []))
    if header == HISTORY_COLUMNS:
        return plot_history(csv_path, svg_path)
    return plot_sweep(csv_path, svg_path)
