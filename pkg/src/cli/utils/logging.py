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
import os
import sys
from collections.abc import Callable
from functools import wraps
from typing import Any, TypeVar, cast

from rich.console import Console
from rich.logging import RichHandler

from src.aqe_wmmse.errors import TrainingAborted

console = Console()

F = TypeVar("F", bound=Callable[..., Any])

LOG_ENV_VAR = "RIS_LOG"
DEFAULT_LEVEL = "INFO"


def resolve_log_level(debug: bool = False) -> int:
    """Level from --debug, else the RIS_LOG environment variable, else INFO."""
    if debug:
        return logging.DEBUG
    name = os.environ.get(LOG_ENV_VAR, DEFAULT_LEVEL).strip().upper()
    level = logging.getLevelName(name)
    if not isinstance(level, int):
        logging.getLogger(__name__).warning(
            f"Unknown {LOG_ENV_VAR} level {name!r}, using {DEFAULT_LEVEL}"
        )
        return logging.INFO
    return level


def setup_logging(debug: bool = False) -> None:
    """Route library logs through a single RichHandler on the root logger."""
    level = resolve_log_level(debug)
    root = logging.getLogger()
    for handler in list(root.handlers):
        if isinstance(handler, RichHandler):
            root.removeHandler(handler)
    handler = RichHandler(console=console, show_path=debug, rich_tracebacks=debug)
    handler.setFormatter(logging.Formatter("%(message)s", datefmt="[%X]"))
    root.addHandler(handler)
    root.setLevel(level)


def handle_cli_error(f: F) -> F:
    """Decorator to handle CLI errors gracefully.

    Ctrl-C exits 130; any other exception is printed and exits 1.
    """

    @wraps(f)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        try:
            return f(*args, **kwargs)
        except KeyboardInterrupt:
            console.print("\nOperation cancelled by user", style="yellow")
            sys.exit(130)
        except TrainingAborted as e:
            console.print(f"Error: training aborted: {e!s}", style="bold red")
            sys.exit(1)
        except Exception as e:
            console.print(f"Error: {e!s}", style="bold red")
            sys.exit(1)

    return cast(F, wrapper)
