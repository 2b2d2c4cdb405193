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

import click
from rich.console import Console
from rich.progress import Progress

from src.aqe_wmmse.errors import ConfigError
from src.aqe_wmmse.models import parse_method
from src.aqe_wmmse.training import Checkpoint, HistoryRow, load_checkpoint
from src.cli.utils import (
    build_spec,
    handle_cli_error,
    parse_ints,
    setup_logging,
    split_list,
    trainable_methods,
)
from src.cli.utils.experiment import (
    TrainTask,
    load_splits,
    run_parallel,
    run_train_task,
    write_run_config,
)

console = Console()
logger = logging.getLogger(__name__)

DEFAULT_TRAIN_METHODS = "aqe_wmmse,aqe,linq"


@click.command("train")
@click.option("--config", type=click.Path(path_type=pathlib.Path), help="Scenario YAML")
@click.option(
    "--train-config", type=click.Path(path_type=pathlib.Path), help="Training YAML"
)
@click.option(
    "--dataset",
    type=click.Path(path_type=pathlib.Path),
    required=True,
    help="Labelled dataset",
)
@click.option(
    "--out",
    type=click.Path(path_type=pathlib.Path),
    default="runs",
    show_default=True,
    help="Output directory",
)
@click.option("--seed", default="0", show_default=True, help="Seed or comma list of seeds")
@click.option(
    "--methods",
    default=DEFAULT_TRAIN_METHODS,
    show_default=True,
    help="Comma-separated methods to train",
)
@click.option("--epochs", type=int, help="Train at most this many more epochs")
@click.option(
    "--resume",
    type=click.Path(path_type=pathlib.Path),
    help="Continue training from a checkpoint",
)
@click.option("--jobs", type=int, default=1, show_default=True, help="Parallel runs")
@click.option("--debug", is_flag=True, help="Enable debug logging")
@handle_cli_error
def train(
    config: pathlib.Path | None,
    train_config: pathlib.Path | None,
    dataset: pathlib.Path,
    out: pathlib.Path,
    seed: str,
    methods: str,
    epochs: int | None,
    resume: pathlib.Path | None,
    jobs: int,
    debug: bool,
) -> None:
    """Train learned methods and write checkpoints and loss histories."""
    setup_logging(debug)
    spec = build_spec(
        config=config,
        train_config=train_config,
        dataset=dataset,
        out=out,
        seeds=parse_ints(seed),
        methods=split_list(methods),
        jobs=jobs,
    )
    system = spec.system() if spec.config else None
    saved: Checkpoint | None = None
    if resume is not None:
        if not resume.exists():
            raise ConfigError(f"Checkpoint not found: {resume}")
        saved = load_checkpoint(resume)
        training = saved.train_config
        if spec.train_config is not None and spec.training() != training:
            logger.warning(
                f"Ignoring {spec.train_config}: resuming with the schedule stored in {resume}"
            )
    else:
        training = spec.training()
    splits = load_splits(spec.require_dataset(), training, system)

    if saved is not None:
        tasks = [
            TrainTask(
                method=saved.method.name,
                system=splits.system,
                train_config=training,
                seed=saved.seed,
                out=spec.out,
                train_set=splits.train,
                val_set=splits.val,
                epochs=epochs,
                resume=resume,
            )
        ]
    else:
        names = trainable_methods(spec.methods)
        skipped = [m for m in spec.methods if parse_method(m)[0] not in names]
        if skipped:
            console.print(f"> Nothing to train for {', '.join(skipped)}", style="yellow")
        tasks = [
            TrainTask(
                method=name,
                system=splits.system,
                train_config=training,
                seed=s,
                out=spec.out,
                train_set=splits.train,
                val_set=splits.val,
                epochs=epochs,
            )
            for name in names
            for s in spec.seeds
        ]

    write_run_config(spec.out, splits.system, training)
    if spec.jobs > 1 and len(tasks) > 1:
        console.print(f"> Training {len(tasks)} runs on {spec.jobs} processes", style="bold blue")
        paths = run_parallel(run_train_task, tasks, spec.jobs)
    else:
        paths = []
        for task in tasks:
            paths.append(_train_with_progress(task))
    for path in paths:
        console.print(f"✅ Wrote {path}", style="green")


def _train_with_progress(task: TrainTask) -> pathlib.Path:
    budget = task.train_config.max_epochs if task.epochs is None else task.epochs
    with Progress(console=console, transient=True) as progress:
        bar = progress.add_task(f"Training {task.method} (seed {task.seed})", total=budget)

        def on_epoch(row: HistoryRow) -> None:
            progress.update(
                bar,
                advance=1,
                description=f"Training {task.method} (seed {task.seed}) val {row.val_loss:.4f}",
            )

        return run_train_task(task, on_epoch)
