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

"""Artifact layout and the train/evaluate steps shared by the commands.

Under ``--out``:

- ``checkpoints/<method>_B<B>_seed<seed>.ckpt``
- ``history/<method>_B<B>_seed<seed>.csv``
- ``config.json`` (the resolved scenario and training schedule)
- ``report.csv``
- ``sweep_<axis>.csv`` and ``sweep_<axis>.svg``
"""

import dataclasses
import json
import logging
import pathlib
from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from typing import TypeVar

import numpy as np
from pydantic import ValidationError

from src.aqe_wmmse.container import partial_path
from src.aqe_wmmse.errors import ConfigError
from src.aqe_wmmse.evaluation import EvalReport, evaluate
from src.aqe_wmmse.models import Method, UpperBound, build_method, parse_method
from src.aqe_wmmse.reporting import write_history_csv
from src.aqe_wmmse.sysmodel import ChannelBatch, SystemConfig, dataset_read, stack_samples
from src.aqe_wmmse.training import (
    HistoryRow,
    TrainConfig,
    baseline_naive_quantize,
    checkpoint_stem,
    load_checkpoint,
    save_checkpoint,
    split_dataset,
    train,
)
from src.cli.utils.config import ExperimentSpec

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


@dataclasses.dataclass(frozen=True)
class Splits:
    system: SystemConfig
    train: ChannelBatch
    val: ChannelBatch
    test: ChannelBatch


def load_splits(
    dataset: pathlib.Path,
    train_config: TrainConfig,
    expected: SystemConfig | None = None,
) -> Splits:
    """Read a labelled dataset and cut it with the configured split seed."""
    data = dataset_read(dataset, expected)
    if not data.samples:
        raise ConfigError(f"{dataset}: dataset is empty")
    if not data.samples[0].has_labels:
        raise ConfigError(f"{dataset}: dataset has no (W_opt, theta_opt) labels")
    parts = split_dataset(data.samples, train_config.split, train_config.split_seed)
    train_set, val_set, test_set = (stack_samples(p) for p in parts)
    logger.info(
        f"Loaded {len(data.samples)} samples from {dataset}: "
        f"{len(train_set)} train / {len(val_set)} val / {len(test_set)} test"
    )
    return Splits(data.config, train_set, val_set, test_set)


def checkpoint_path(out: pathlib.Path, method: str, B: int, seed: int) -> pathlib.Path:
    return out / "checkpoints" / f"{checkpoint_stem(method, B, seed)}.ckpt"


def history_path(out: pathlib.Path, method: str, B: int, seed: int) -> pathlib.Path:
    return out / "history" / f"{checkpoint_stem(method, B, seed)}.csv"


def report_path(out: pathlib.Path) -> pathlib.Path:
    return out / "report.csv"


def sweep_paths(out: pathlib.Path, axis: str) -> tuple[pathlib.Path, pathlib.Path]:
    return out / f"sweep_{axis}.csv", out / f"sweep_{axis}.svg"


def write_run_config(
    out: pathlib.Path, system: SystemConfig, train_config: TrainConfig
) -> pathlib.Path:
    """Record the scenario and schedule a command actually ran with."""
    target = out / "config.json"
    target.parent.mkdir(parents=True, exist_ok=True)
    document = {
        "system": system.model_dump(mode="json"),
        "train": train_config.model_dump(mode="json"),
    }
    tmp = partial_path(target)
    tmp.write_text(json.dumps(document, indent=2, sort_keys=True) + "\n")
    tmp.replace(target)
    logger.debug(f"Wrote {target}")
    return target


def read_run_config(out: pathlib.Path) -> TrainConfig | None:
    """Training schedule recorded under ``out``; None when nothing was recorded."""
    path = out / "config.json"
    if not path.exists():
        return None
    try:
        document = json.loads(path.read_text())
        return TrainConfig.model_validate(document["train"])
    except (json.JSONDecodeError, KeyError, TypeError, ValidationError) as err:
        raise ConfigError(f"{path}: not a readable run config: {err}") from err


def resolve_training(spec: ExperimentSpec) -> TrainConfig:
    """An explicit --train-config wins, then the schedule recorded under --out."""
    if spec.train_config is not None:
        return spec.training()
    recorded = read_run_config(spec.out)
    if recorded is None:
        return spec.training()
    logger.info(f"Using the training schedule recorded in {spec.out / 'config.json'}")
    return recorded


@dataclasses.dataclass(frozen=True)
class TrainTask:
    method: str
    system: SystemConfig
    train_config: TrainConfig
    seed: int
    out: pathlib.Path
    train_set: ChannelBatch
    val_set: ChannelBatch
    epochs: int | None = None
    resume: pathlib.Path | None = None


def run_train_task(
    task: TrainTask, on_epoch: Callable[[HistoryRow], None] | None = None
) -> pathlib.Path:
    """Train one method, then write its checkpoint and loss history."""
    if task.resume is not None:
        if not task.resume.exists():
            raise ConfigError(f"Checkpoint not found: {task.resume}")
        saved = load_checkpoint(task.resume)
        if saved.system != task.system:
            raise ConfigError(f"{task.resume}: checkpoint scenario differs from the dataset's")
        method, state, seed = saved.method, saved.state, saved.seed
        train_config = saved.train_config
        logger.info(f"Resuming {method.name} from epoch {state.epoch}")
    else:
        train_config, seed = task.train_config, task.seed
        method = build_method(
            task.method,
            task.system,
            seed,
            train_config.dropout,
            train_config.unrolled_layers,
            train_config.init_mode,
        )
        state = None

    state = train(
        method,
        task.train_set,
        task.val_set,
        task.system,
        train_config,
        seed,
        state,
        task.epochs,
        on_epoch,
    )
    B = method.message_bits
    path = save_checkpoint(
        checkpoint_path(task.out, method.name, B, seed),
        method,
        state,
        task.system,
        train_config,
        seed,
    )
    write_history_csv(history_path(task.out, method.name, B, seed), state.history)
    logger.info(f"Wrote {path} (best val loss {state.best_val_loss:.4f})")
    return path


def load_method(name: str, system: SystemConfig, seed: int, out: pathlib.Path) -> Method | None:
    """Eval-mode method for ``name``; None when its checkpoint is missing."""
    base, _ = parse_method(name)
    if base == "upper_bound":
        bound = UpperBound(system)
        bound.eval()
        return bound
    if base == "naive":
        return baseline_naive_quantize(system)
    path = checkpoint_path(out, base, system.B, seed)
    if not path.exists():
        return None
    saved = load_checkpoint(path)
    if saved.system != system:
        raise ConfigError(f"{path}: checkpoint scenario differs from the dataset's")
    return saved.trained_method()


@dataclasses.dataclass(frozen=True)
class GridPoint:
    """One evaluation: a method at a scenario, seed and optional power override."""

    method: str
    axis_value: float
    system: SystemConfig
    seed: int
    out: pathlib.Path
    test_set: ChannelBatch
    P: float | None = None
    batch_size: int = 256


def run_grid_point(point: GridPoint) -> EvalReport | None:
    method = load_method(point.method, point.system, point.seed, point.out)
    if method is None:
        base, _ = parse_method(point.method)
        logger.warning(
            f"Skipping {point.method} at {point.axis_value:g}: no checkpoint "
            f"{checkpoint_path(point.out, base, point.system.B, point.seed)}"
        )
        return None
    _, fallback = parse_method(point.method)
    return evaluate(
        method,
        point.test_set,
        point.system,
        P=point.P,
        fallback=fallback,
        seed=point.seed,
        batch_size=point.batch_size,
    )


def run_parallel(
    work: Callable[[T], R],
    items: Sequence[T],
    jobs: int = 1,
    on_done: Callable[[int], None] | None = None,
) -> list[R]:
    """Map ``work`` over items in order, on up to ``jobs`` processes."""
    results: list[R] = []
    outputs: Iterable[R]
    if jobs <= 1 or len(items) <= 1:
        outputs = map(work, items)
        for result in outputs:
            results.append(result)
            if on_done:
                on_done(len(results))
        return results
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as pool:
        for result in pool.map(work, items):
            results.append(result)
            if on_done:
                on_done(len(results))
    return results


def merge_seeds(reports: Iterable[tuple[float, EvalReport]]) -> list[tuple[float, EvalReport]]:
    """Pool per-sample rates of the same (method, axis value) across seeds."""
    merged: dict[tuple[str, float], EvalReport] = {}
    for value, report in reports:
        key = (report.method, value)
        merged[key] = merged[key].merged(report) if key in merged else report
    return [(value, report) for (_, value), report in merged.items()]


def flag_non_monotone(points: Sequence[tuple[float, EvalReport]]) -> list[str]:
    """Methods whose mean rate drops as the axis value grows; logged, not fatal."""
    flagged: list[str] = []
    for method in sorted({r.method for _, r in points}):
        series = sorted((v, r.mean) for v, r in points if r.method == method)
        means = np.array([m for _, m in series])
        if len(means) > 1 and np.any(np.diff(means) < 0):
            flagged.append(method)
            logger.warning(f"{method}: mean rate is not non-decreasing along the sweep")
    return flagged
