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

"""Adam, the plateau learning-rate schedule and early stopping."""

import dataclasses
import logging
import math
from typing import Any

import numpy as np

from ..errors import NumericalError, ShapeError
from .tensor import Tensor

logger = logging.getLogger(__name__)


@dataclasses.dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0


def adam_step(
    params: dict[str, Tensor],
    grads: dict[str, np.ndarray | None],
    state: AdamState,
    lr: float,
    betas: tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
) -> None:
    """One bias-corrected Adam update, applied to ``params`` in place.

    A missing gradient counts as zero.
    """
    for name, grad in grads.items():
        if grad is not None and not np.all(np.isfinite(grad)):
            raise NumericalError(f"non-finite gradient for {name}")

    beta1, beta2 = betas
    state.step += 1
    correction1 = 1.0 - beta1**state.step
    correction2 = 1.0 - beta2**state.step
    for name, param in params.items():
        grad = grads.get(name)
        if grad is None:
            grad = np.zeros_like(param.data)
        if name not in state.m:
            state.m[name] = np.zeros_like(param.data)
            state.v[name] = np.zeros_like(param.data)
        if state.m[name].shape != param.shape or grad.shape != param.shape:
            raise ShapeError(f"Adam state for {name} does not match shape {param.shape}")
        m, v = state.m[name], state.v[name]
        m *= beta1
        m += (1.0 - beta1) * grad
        v *= beta2
        v += (1.0 - beta2) * grad**2
        param.data -= lr * (m / correction1) / (np.sqrt(v / correction2) + eps)


class Adam:
    def __init__(
        self,
        params: dict[str, Tensor],
        lr: float = 1e-3,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
    ) -> None:
        self.params = params
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.state = AdamState(m={}, v={})

    def zero_grad(self) -> None:
        for param in self.params.values():
            param.zero_grad()

    def step(self) -> None:
        grads = {name: p.grad for name, p in self.params.items()}
        adam_step(self.params, grads, self.state, self.lr, self.betas, self.eps)

    def state_dict(self) -> tuple[dict[str, Any], dict[str, np.ndarray]]:
        """JSON-friendly scalars plus named moment arrays."""
        arrays = {f"adam/m/{k}": v.copy() for k, v in self.state.m.items()}
        arrays.update({f"adam/v/{k}": v.copy() for k, v in self.state.v.items()})
        return {"lr": self.lr, "step": self.state.step}, arrays

    def load_state_dict(self, scalars: dict[str, Any], arrays: dict[str, np.ndarray]) -> None:
        self.lr = float(scalars["lr"])
        self.state = AdamState(
            m={k.removeprefix("adam/m/"): v.copy() for k, v in arrays.items() if k.startswith("adam/m/")},
            v={k.removeprefix("adam/v/"): v.copy() for k, v in arrays.items() if k.startswith("adam/v/")},
            step=int(scalars["step"]),
        )


class PlateauScheduler:
    """Multiply the learning rate by ``factor`` after ``patience`` epochs without
    strict improvement of the monitored loss, never going below ``min_lr``."""

    def __init__(
        self,
        lr: float = 1e-3,
        factor: float = 0.8,
        patience: int = 20,
        min_lr: float = 5e-5,
    ) -> None:
        if patience < 1:
            raise ValueError(f"patience must be >= 1, got {patience}")
        self.lr = lr
        self.factor = factor
        self.patience = patience
        self.min_lr = min_lr
        self.best = math.inf
        self.counter = 0

    def step(self, val_loss: float) -> float:
        if val_loss < self.best:
            self.best = val_loss
            self.counter = 0
            return self.lr
        self.counter += 1
        if self.counter >= self.patience:
            new_lr = max(self.lr * self.factor, self.min_lr)
            if new_lr < self.lr:
                logger.warning(f"Validation loss plateaued, learning rate {self.lr:.3g} -> {new_lr:.3g}")
            self.lr = new_lr
            self.counter = 0
        return self.lr

    def state_dict(self) -> dict[str, Any]:
        return {"lr": self.lr, "best": self.best, "counter": self.counter}

    def load_state_dict(self, state: dict[str, Any]) -> None:
        self.lr = float(state["lr"])
        self.best = float(state["best"])
        self.counter = int(state["counter"])


class EarlyStopping:
    """Signals a stop after ``patience`` epochs without strict improvement."""

    def __init__(self, patience: int = 50) -> None:
        if patience < 1:
            raise ValueError(f"patience must be >= 1, got {patience}")
        self.patience = patience
        self.best = math.inf
        self.best_epoch = -1
        self.counter = 0

    def step(self, val_loss: float, epoch: int) -> bool:
        """Record one epoch; returns True when training should stop."""
        if val_loss < self.best:
            self.best = val_loss
            self.best_epoch = epoch
            self.counter = 0
            return False
        self.counter += 1
        return self.counter >= self.patience

    @property
    def improved(self) -> bool:
        return self.counter == 0

    def state_dict(self) -> dict[str, Any]:
        return {"best": self.best, "best_epoch": self.best_epoch, "counter": self.counter}

    def load_state_dict(self, state: dict[str, Any]) -> None:
        self.best = float(state["best"])
        self.best_epoch = int(state["best_epoch"])
        self.counter = int(state["counter"])
