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

import importlib.metadata

import click
from rich.console import Console

from .commands.evaluate import evaluate
from .commands.gen_data import gen_data
from .commands.plot import plot
from .commands.sweep import sweep_bits, sweep_power
from .commands.train import train

console = Console()


def print_version(ctx: click.Context, param: click.Parameter, value: bool) -> None:
    if not value or ctx.resilient_parsing:
        return
    try:
        version_str = importlib.metadata.version("aqe-wmmse")
        console.print(f"aqe-wmmse version: {version_str}")
    except importlib.metadata.PackageNotFoundError:
        console.print("aqe-wmmse (development version)")
    ctx.exit()


@click.group(help="Learned RIS control-message compression with a WMMSE beamforming updater")
@click.option(
    "--version",
    "-v",
    is_flag=True,
    callback=print_version,
    expose_value=False,
    is_eager=True,
    help="Show the version and exit.",
)
def cli() -> None:
    pass


cli.add_command(gen_data)
cli.add_command(train)
cli.add_command(evaluate)
cli.add_command(sweep_power)
cli.add_command(sweep_bits)
cli.add_command(plot)


if __name__ == "__main__":
    cli()
