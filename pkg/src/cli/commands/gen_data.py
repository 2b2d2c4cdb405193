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
import time

import click
import numpy as np
from rich.console import Console
from rich.progress import Progress

from src.aqe_wmmse.errors import ConfigError
from src.aqe_wmmse.sysmodel import SystemConfig, dataset_write, gen_channels
from src.aqe_wmmse.wmmse import label_samples
from src.cli.utils import handle_cli_error, load_system, setup_logging

console = Console()
logger = logging.getLogger(__name__)


def sample_seeds(seed: int, n: int) -> list[int]:
    """Independent per-sample seeds, stable for a given (seed, n)."""
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(n)]


def generate_dataset(
    system: SystemConfig,
    n: int,
    seed: int,
    out: pathlib.Path,
    outer_iters: int = 100,
    jobs: int = 1,
) -> pathlib.Path:
    if n < 1:
        raise ConfigError(f"--n must be at least 1, got {n}")
    samples = [gen_channels(system, s) for s in sample_seeds(seed, n)]

    started = time.perf_counter()
    with Progress(console=console, transient=True) as progress:
        task = progress.add_task("Labelling with WMMSE-PI", total=n)
        labelled = label_samples(
            samples,
            system,
            outer_iters=outer_iters,
            jobs=jobs,
            on_done=lambda done: progress.update(task, completed=done),
        )
    elapsed = time.perf_counter() - started
    logger.info(f"Labelled {n} samples in {elapsed:.1f}s ({n / max(elapsed, 1e-9):.2f} samples/s)")
    return dataset_write(out, labelled, system)


@click.command("gen-data")
@click.option("--config", type=click.Path(path_type=pathlib.Path), help="Scenario YAML")
@click.option("--n", "n", type=int, required=True, help="Number of channel samples")
@click.option("--seed", type=int, default=0, show_default=True, help="Dataset seed")
@click.option(
    "--out",
    type=click.Path(path_type=pathlib.Path),
    required=True,
    help="Dataset file to write",
)
@click.option(
    "--outer-iters",
    type=int,
    default=100,
    show_default=True,
    help="WMMSE-PI alternations per label",
)
@click.option("--jobs", type=int, default=1, show_default=True, help="Labelling processes")
@click.option("--debug", is_flag=True, help="Enable debug logging")
@handle_cli_error
def gen_data(
    config: pathlib.Path | None,
    n: int,
    seed: int,
    out: pathlib.Path,
    outer_iters: int,
    jobs: int,
    debug: bool,
) -> None:
    """Generate channel samples and label them with WMMSE-PI."""
    setup_logging(debug)
    system = load_system(config)
    console.print(
        f"> Generating {n} samples (M={system.M}, K={system.K}, N={system.N}, "
        f"P={system.P_dbm:.1f} dBm, seed={seed})",
        style="bold blue",
    )
    path = generate_dataset(system, n, seed, out, outer_iters, jobs)
    console.print(f"✅ Wrote {path}", style="green")
