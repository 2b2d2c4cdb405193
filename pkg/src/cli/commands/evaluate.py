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

import click
from rich.console import Console
from rich.table import Table

from src.aqe_wmmse.errors import ConfigError
from src.aqe_wmmse.evaluation import EvalReport
from src.aqe_wmmse.models import parse_method
from src.aqe_wmmse.reporting import write_report_csv
from src.aqe_wmmse.sysmodel import dbm_to_watt
from src.cli.utils import (
    build_spec,
    handle_cli_error,
    parse_floats,
    parse_ints,
    setup_logging,
    split_list,
)
from src.cli.utils.experiment import (
    GridPoint,
    checkpoint_path,
    load_splits,
    merge_seeds,
    report_path,
    resolve_training,
    run_grid_point,
    run_parallel,
    write_run_config,
)

console = Console()


def print_report(reports: list[EvalReport]) -> None:
    table = Table(title="Weighted sum-rate [bits/s/Hz]")
    for column in ("method", "P [dBm]", "B", "mean", "ci95"):
        table.add_column(column)
    for r in reports:
        table.add_row(r.method, f"{r.P_dbm:.1f}", str(r.B), f"{r.mean:.4f}", f"{r.ci95:.4f}")
    console.print(table)


@click.command("eval")
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
    help="Output directory holding checkpoints/",
)
@click.option("--seed", default="0", show_default=True, help="Seed or comma list of seeds")
@click.option("--methods", help="Comma-separated methods (default: all)")
@click.option("--power-dbm", help="Evaluate at these transmit powers instead of the scenario's")
@click.option("--jobs", type=int, default=1, show_default=True, help="Parallel evaluations")
@click.option("--debug", is_flag=True, help="Enable debug logging")
@handle_cli_error
def evaluate(
    config: pathlib.Path | None,
    train_config: pathlib.Path | None,
    dataset: pathlib.Path,
    out: pathlib.Path,
    seed: str,
    methods: str | None,
    power_dbm: str | None,
    jobs: int,
    debug: bool,
) -> None:
    """Evaluate methods on the test split and write report.csv."""
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
    powers = [dbm_to_watt(p) for p in spec.power_dbm] if power_dbm else [system.P]

    missing = []
    for name in spec.methods:
        base, _ = parse_method(name)
        if base in ("upper_bound", "naive"):
            continue
        for s in spec.seeds:
            path = checkpoint_path(spec.out, base, system.B, s)
            if not path.exists():
                missing.append(str(path))
    if missing:
        raise ConfigError(f"Missing checkpoints (run train first): {', '.join(sorted(set(missing)))}")

    points = [
        GridPoint(
            method=name,
            axis_value=P,
            system=system,
            seed=s,
            out=spec.out,
            test_set=splits.test,
            P=None if P == system.P else P,
            batch_size=training.eval_batch_size,
        )
        for P in powers
        for name in spec.methods
        for s in spec.seeds
    ]
    results = run_parallel(run_grid_point, points, spec.jobs)
    evaluated = (
        (p.axis_value, r) for p, r in zip(points, results, strict=True) if r is not None
    )
    reports = [r for _, r in merge_seeds(evaluated)]
    path = write_report_csv(report_path(spec.out), reports)
    print_report(reports)
    console.print(f"✅ Wrote {path}", style="green")
