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

from src.aqe_wmmse.reporting import plot_csv
from src.cli.utils import handle_cli_error, setup_logging

console = Console()


@click.command("plot")
@click.argument("csv_path", type=click.Path(exists=True, dir_okay=False, path_type=pathlib.Path))
@click.option(
    "--out",
    type=click.Path(path_type=pathlib.Path),
    help="SVG to write (default: next to the CSV)",
)
@click.option("--debug", is_flag=True, help="Enable debug logging")
@handle_cli_error
def plot(csv_path: pathlib.Path, out: pathlib.Path | None, debug: bool) -> None:
    """Render a sweep or loss-history CSV as an SVG line chart."""
    setup_logging(debug)
    target = plot_csv(csv_path, out or csv_path.with_suffix(".svg"))
    console.print(f"✅ Wrote {target}", style="green")
