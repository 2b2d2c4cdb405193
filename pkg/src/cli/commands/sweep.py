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

import logging
import pathlib
from collections.abc import Callable
from typing import Any

import click
from rich.console import Console
from rich.progress import Progress

from src.aqe_wmmse.evaluation import EvalReport
from src.aqe_wmmse.models import parse_method
from src.aqe_wmmse.reporting import SweepPoint, plot_sweep, write_sweep_csv
from src.aqe_wmmse.sysmodel import SystemConfig, dbm_to_watt
from src.aqe_wmmse.training import TrainConfig
from src.cli.utils import (
    ExperimentSpec,
    build_spec,
    handle_cli_error,
    parse_floats,
    parse_ints,
    setup_logging,
    split_list,
    system_for_bits,
    trainable_methods,
)
from src.cli.utils.experiment import (
    GridPoint,
    Splits,
    TrainTask,
    checkpoint_path,
    flag_non_monotone,
    load_splits,
    merge_seeds,
    resolve_training,
    run_grid_point,
    run_parallel,
    run_train_task,
    sweep_paths,
    write_run_config,
)

console = Console()
logger = logging.getLogger(__name__)


def ensure_checkpoints(
    spec: ExperimentSpec,
    systems: list[SystemConfig],
    splits: Splits,
    training: TrainConfig,
    epochs: int | None = None,
) -> list[pathlib.Path]:
    """Train every (method, B, seed) whose checkpoint is not on disk yet."""
    tasks = [
        TrainTask(
            method=name,
            system=system,
            train_config=training,
            seed=s,
            out=spec.out,
            train_set=splits.train,
            val_set=splits.val,
            epochs=epochs,
        )
        for system in systems
        for name in trainable_methods(spec.methods)
        for s in spec.seeds
        if not checkpoint_path(spec.out, name, system.B, s).exists()
    ]
    if not tasks:
        return []
    console.print(f"> Training {len(tasks)} missing checkpoint(s)", style="bold blue")
    return run_parallel(run_train_task, tasks, spec.jobs)


def run_sweep(
    spec: ExperimentSpec, axis: str, points: list[GridPoint]
) -> tuple[pathlib.Path, pathlib.Path]:
    """Evaluate grid points, pool seeds, then write the CSV and its chart."""
    with Progress(console=console, transient=True) as progress:
        task = progress.add_task(f"Sweeping {axis}", total=len(points))
        results = run_parallel(
            run_grid_point,
            points,
            spec.jobs,
            on_done=lambda done: progress.update(task, completed=done),
        )
    evaluated: list[tuple[float, EvalReport]] = []
    skipped: set[str] = set()
    for point, report in zip(points, results, strict=True):
        if report is None:
            skipped.add(f"{point.method}@{point.axis_value:g}")
        else:
            evaluated.append((point.axis_value, report))
    if skipped:
        console.print(f"> Skipped (no checkpoint): {', '.join(sorted(skipped))}", style="yellow")

    merged = merge_seeds(evaluated)
    if axis == "P_dBm":
        flag_non_monotone(merged)
    csv_path, svg_path = sweep_paths(spec.out, axis)
    write_sweep_csv(
        csv_path,
        axis,
        [SweepPoint(r.method, value, r.mean, r.ci95) for value, r in merged],
    )
    plot_sweep(csv_path, svg_path)
    return csv_path, svg_path


def sweep_options(f: Callable[..., Any]) -> Callable[..., Any]:
    """Options shared by sweep-power and sweep-bits."""
    options = [
        click.option("--config", type=click.Path(path_type=pathlib.Path), help="Scenario YAML"),
        click.option(
            "--train-config", type=click.Path(path_type=pathlib.Path), help="Training YAML"
        ),
        click.option(
            "--dataset",
            type=click.Path(path_type=pathlib.Path),
            required=True,
            help="Labelled dataset",
        ),
        click.option(
            "--out",
            type=click.Path(path_type=pathlib.Path),
            default="runs",
            show_default=True,
            help="Output directory",
        ),
        click.option("--seed", default="0", show_default=True, help="Seed or comma list of seeds"),
        click.option("--methods", help="Comma-separated methods (default: all)"),
        click.option("--jobs", type=int, default=1, show_default=True, help="Parallel grid points"),
        click.option(
            "--train-missing", is_flag=True, help="Train missing checkpoints before evaluating"
        ),
        click.option("--epochs", type=int, help="Epoch cap when training missing checkpoints"),
        click.option("--debug", is_flag=True, help="Enable debug logging"),
    ]
    for option in reversed(options):
        f = option(f)
    return f


@click.command("sweep-power")
@sweep_options
@click.option("--power-dbm", help="Comma-separated transmit powers (default 15..35 dBm)")
@handle_cli_error
def sweep_power(
    config: pathlib.Path | None,
    train_config: pathlib.Path | None,
    dataset: pathlib.Path,
    out: pathlib.Path,
    seed: str,
    methods: str | None,
    jobs: int,
    train_missing: bool,
    epochs: int | None,
    debug: bool,
    power_dbm: str | None,
) -> None:
    """Sum-rate against transmit power at the scenario's bit budget."""
    setup_logging(debug)
    spec = build_spec(
        config=config,
        train_config=train_config,
        dataset=dataset,
        out=out,
        seeds=parse_ints(seed),
        methods=split_list(methods),
        power_dbm=parse_floats(power_dbm),
        jobs=jobs,
    )
    training = resolve_training(spec)
    splits = load_splits(spec.require_dataset(), training, spec.system() if spec.config else None)
    write_run_config(spec.out, splits.system, training)
    system = splits.system
    if train_missing:
        ensure_checkpoints(spec, [system], splits, training, epochs)

    points = [
        GridPoint(
            method=name,
            axis_value=p_dbm,
            system=system,
            seed=s,
            out=spec.out,
            test_set=splits.test,
            P=dbm_to_watt(p_dbm),
            batch_size=training.eval_batch_size,
        )
        for p_dbm in spec.power_dbm
        for name in spec.methods
        for s in spec.seeds
    ]
    csv_path, svg_path = run_sweep(spec, "P_dBm", points)
    console.print(f"✅ Wrote {csv_path} and {svg_path}", style="green")


@click.command("sweep-bits")
@sweep_options
@click.option("--bits", help="Comma-separated bit budgets B (default 10,20,40,100)")
@handle_cli_error
def sweep_bits(
    config: pathlib.Path | None,
    train_config: pathlib.Path | None,
    dataset: pathlib.Path,
    out: pathlib.Path,
    seed: str,
    methods: str | None,
    jobs: int,
    train_missing: bool,
    epochs: int | None,
    debug: bool,
    bits: str | None,
) -> None:
    """Sum-rate against the control-message size at the scenario's power.

    The naive baseline always spends N bits and appears once, at B = N.
    """
    setup_logging(debug)
    spec = build_spec(
        config=config,
        train_config=train_config,
        dataset=dataset,
        out=out,
        seeds=parse_ints(seed),
        methods=split_list(methods),
        bits=parse_ints(bits),
        jobs=jobs,
    )
    training = resolve_training(spec)
    splits = load_splits(spec.require_dataset(), training, spec.system() if spec.config else None)
    write_run_config(spec.out, splits.system, training)
    systems = [system_for_bits(splits.system, b) for b in spec.bits]
    if train_missing:
        ensure_checkpoints(spec, systems, splits, training, epochs)

    points: list[GridPoint] = []
    for name in spec.methods:
        base, _ = parse_method(name)
        if base == "naive":
            grid = [(float(splits.system.N), splits.system)]
        else:
            grid = [(float(system.B), system) for system in systems]
        points.extend(
            GridPoint(
                method=name,
                axis_value=value,
                system=system,
                seed=s,
                out=spec.out,
                test_set=splits.test,
                batch_size=training.eval_batch_size,
            )
            for value, system in grid
            for s in spec.seeds
        )
    csv_path, svg_path = run_sweep(spec, "B", points)
    console.print(f"✅ Wrote {csv_path} and {svg_path}", style="green")
