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

"""Compare tape gradients against central finite differences."""

import dataclasses
from collections.abc import Callable

import numpy as np

from ..errors import DomainError, TapeError
from .tensor import Tape, Tensor

ERROR_FLOOR = 1e-8


@dataclasses.dataclass
class TensorCheck:
    name: str
    coords: int
    max_rel_error: float
    passed: bool


@dataclasses.dataclass
class GradCheckReport:
    checks: list[TensorCheck]
    tol: float

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def max_rel_error(self) -> float:
        return max((c.max_rel_error for c in self.checks), default=0.0)

    def failures(self) -> list[str]:
        return [f"{c.name}: {c.max_rel_error:.3e}" for c in self.checks if not c.passed]


def _value(f: Callable[[], Tensor]) -> float:
    out = f()
    if out.size != 1:
        raise TapeError(f"grad_check needs a scalar function, got shape {out.shape}")
    return out.item()


def grad_check(
    f: Callable[[], Tensor],
    params: dict[str, Tensor],
    eps: float = 1e-5,
    tol: float = 1e-6,
    n_coords: int | None = None,
    rng: np.random.Generator | None = None,
) -> GradCheckReport:
    """Check d f / d params at the current parameter values.

    ``f`` takes no arguments and closes over ``params``. With ``n_coords`` set,
    that many coordinates are sampled across all tensors; otherwise every
    coordinate is perturbed. The error per tensor is
    ``||analytic - numeric|| / max(||analytic||, ||numeric||, 1e-8)``.
    """
    if eps <= 0:
        raise DomainError(f"eps must be positive, got {eps}")
    if _value(f) != _value(f):
        raise TapeError("function is not deterministic; put dropout layers in eval mode")

    for param in params.values():
        param.zero_grad()
    with Tape() as tape:
        loss = f()
    if loss.size != 1:
        raise TapeError(f"grad_check needs a scalar function, got shape {loss.shape}")
    tape.backward(loss)

    coords = [(name, idx) for name, p in params.items() for idx in np.ndindex(p.shape)]
    if n_coords is not None and n_coords < len(coords):
        rng = rng or np.random.default_rng(0)
        picked = rng.choice(len(coords), size=n_coords, replace=False)
        coords = [coords[i] for i in sorted(picked)]

    analytic: dict[str, list[float]] = {name: [] for name in params}
    numeric: dict[str, list[float]] = {name: [] for name in params}
    for name, idx in coords:
        param = params[name]
        original = param.data[idx]
        param.data[idx] = original + eps
        upper = _value(f)
        param.data[idx] = original - eps
        lower = _value(f)
        param.data[idx] = original
        grad = param.grad
        analytic[name].append(0.0 if grad is None else float(grad[idx]))
        numeric[name].append((upper - lower) / (2 * eps))

    checks = []
    for name in params:
        if not analytic[name]:
            continue
        a, n = np.array(analytic[name]), np.array(numeric[name])
        scale = max(np.linalg.norm(a), np.linalg.norm(n), ERROR_FLOOR)
        error = float(np.linalg.norm(a - n) / scale)
        checks.append(TensorCheck(name, len(a), error, error < tol))
    return GradCheckReport(checks=checks, tol=tol)
