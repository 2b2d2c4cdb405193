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

"""Sum-rate loss, dataset splits, the training loop and checkpoints."""

import dataclasses
import logging
import os
import pathlib
import time
from collections.abc import Callable, Sequence
from typing import Any, Literal

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .autodiff import Adam, EarlyStopping, PlateauScheduler, Tape, Tensor, ops
from .container import ContainerKind, read_container, write_container
from .errors import ConfigError, DomainError, FormatError, NumericalError, TrainingAborted
from .models import Method, NaiveQuantize, build_method
from .sysmodel import ChannelBatch, ChannelSample, SystemConfig
from .updater import ChannelTensors, effective_channel

logger = logging.getLogger(__name__)

SPLIT_TOL = 1e-9


class TrainConfig(BaseModel):
    """Optimization schedule and model options shared by every learned method."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    batch_size: int = Field(128, ge=1)
    max_epochs: int = Field(1000, ge=1)
    early_stop_patience: int = Field(50, ge=1)
    lr: float = Field(1e-3, gt=0)
    lr_factor: float = Field(0.8, gt=0, lt=1)
    lr_patience: int = Field(20, ge=1)
    lr_min: float = Field(5e-5, gt=0)
    split: tuple[float, float, float] = (0.64, 0.16, 0.20)
    split_seed: int = 0
    dropout: float = Field(0.5, ge=0, lt=1)
    unrolled_layers: int = Field(1, ge=1)
    init_mode: Literal["learned", "raw"] = "learned"
    eval_batch_size: int = Field(256, ge=1)

    @model_validator(mode="after")
    def _check_split(self) -> "TrainConfig":
        if any(f < 0 for f in self.split) or abs(sum(self.split) - 1.0) > SPLIT_TOL:
            raise ValueError(f"split fractions must be non-negative and sum to 1, got {self.split}")
        return self

    @classmethod
    def from_file(cls, config_path: str | os.PathLike[str]) -> "TrainConfig":
        try:
            with open(config_path) as f:
                data = yaml.safe_load(f)
            if not isinstance(data, dict):
                raise ConfigError(f"Invalid train config format in {config_path}")
            return cls.model_validate(data)
        except yaml.YAMLError as err:
            raise ConfigError(f"Invalid YAML in {config_path}: {err}") from err
        except ValidationError as err:
            raise ConfigError(f"Invalid train config {config_path}: {err}") from err


def split_dataset(
    samples: Sequence[ChannelSample],
    fractions: tuple[float, float, float] = (0.64, 0.16, 0.20),
    seed: int = 0,
) -> tuple[list[ChannelSample], list[ChannelSample], list[ChannelSample]]:
    """Shuffle and cut into train/validation/test; the three sizes sum to len(samples)."""
    n = len(samples)
    n_train = round(fractions[0] * n)
    n_val = round(fractions[1] * n)
    n_test = n - n_train - n_val
    if min(n_train, n_val, n_test) < 1:
        raise ConfigError(f"{n} samples cannot be split {fractions} into non-empty parts")
    order = np.random.default_rng(seed).permutation(n)
    picked = [samples[i] for i in order]
    return picked[:n_train], picked[n_train : n_train + n_val], picked[n_train + n_val :]


# -- loss ------------------------------------------------------------------------


def graph_rates(G: Tensor, W: Tensor, sigma2: float) -> Tensor:
    """Per-UE rates (S, K) for channels G (S, K, M, 2) and beamformers W (S, M, K, 2)."""
    K = G.shape[1]
    power = ops.cabs2(ops.cmatmul(G, W))
    eye = np.eye(K)
    signal = ops.sum(ops.mul(power, eye), axis=-1)
    interference = ops.sum(ops.mul(power, 1.0 - eye), axis=-1)
    return ops.log2(ops.add(1.0, ops.div(signal, ops.add(interference, sigma2))))


def loss_from_rates(rates: Tensor, p: np.ndarray) -> Tensor:
    """-(1/S) sum_s sum_k p_k R_k."""
    return ops.neg(ops.mean(ops.sum(ops.mul(rates, p), axis=-1)))


def sum_rate_loss(
    W: Tensor, theta: Tensor, channels: ChannelTensors, system: SystemConfig
) -> Tensor:
    rates = graph_rates(effective_channel(channels, theta), W, system.sigma2)
    if np.isnan(rates.data).any():
        raise NumericalError("rate is NaN")
    return loss_from_rates(rates, system.p)


def batch_loss(
    method: Method,
    batch: ChannelBatch,
    system: SystemConfig,
    rng: np.random.Generator | None = None,
) -> Tensor:
    channels = ChannelTensors.from_batch(batch)
    out = method.forward(channels, batch, system.P, rng)
    return sum_rate_loss(out.W, out.theta, channels, system)


def validation_loss(
    method: Method, data: ChannelBatch, system: SystemConfig, batch_size: int = 256
) -> float:
    """Eval-mode loss averaged over samples."""
    method.eval()
    total = 0.0
    for start in range(0, len(data), batch_size):
        chunk = data.subset(slice(start, start + batch_size))
        total += batch_loss(method, chunk, system).item() * len(chunk)
    return total / len(data)


# -- training loop -------------------------------------------------------------


@dataclasses.dataclass
class HistoryRow:
    epoch: int
    train_loss: float
    val_loss: float
    lr: float


@dataclasses.dataclass
class TrainState:
    """Everything a resumed run needs to continue exactly where it stopped."""

    optimizer: Adam
    scheduler: PlateauScheduler
    stopper: EarlyStopping
    rng: np.random.Generator
    epoch: int = 0
    history: list[HistoryRow] = dataclasses.field(default_factory=list)
    best: dict[str, np.ndarray] | None = None
    stopped: bool = False

    @classmethod
    def fresh(cls, method: Method, config: TrainConfig, seed: int) -> "TrainState":
        return cls(
            optimizer=Adam(method.parameters(), lr=config.lr),
            scheduler=PlateauScheduler(
                config.lr, config.lr_factor, config.lr_patience, config.lr_min
            ),
            stopper=EarlyStopping(config.early_stop_patience),
            rng=np.random.default_rng((seed, 1)),
        )

    @property
    def best_val_loss(self) -> float:
        return self.stopper.best


def train(
    method: Method,
    train_set: ChannelBatch,
    val_set: ChannelBatch,
    system: SystemConfig,
    config: TrainConfig,
    seed: int = 0,
    state: TrainState | None = None,
    epochs: int | None = None,
    on_epoch: Callable[[HistoryRow], None] | None = None,
) -> TrainState:
    """Train until early stopping, ``max_epochs``, or ``epochs`` more epochs.

    Each epoch shuffles, takes Adam steps on the train-mode loss, then scores
    the validation split in eval mode; that loss drives the plateau schedule,
    early stopping and the best-parameter snapshot. The method keeps its
    latest parameters; ``state.best`` holds the best ones.
    """
    if not method.trainable:
        raise ConfigError(f"method {method.name!r} has no trainable parameters")
    if state is None:
        method.fit_normalization(train_set)
        state = TrainState.fresh(method, config, seed)
    target = config.max_epochs if epochs is None else min(config.max_epochs, state.epoch + epochs)
    n = len(train_set)
    optimizer = state.optimizer

    while state.epoch < target and not state.stopped:
        epoch = state.epoch + 1
        started = time.perf_counter()
        method.train()
        order = state.rng.permutation(n)
        total, seen = 0.0, 0
        for index, start in enumerate(range(0, n, config.batch_size)):
            rows = order[start : start + config.batch_size]
            if len(rows) < 2:
                logger.debug(f"Epoch {epoch}: skipping a trailing batch of {len(rows)}")
                continue
            chunk = train_set.subset(rows)
            try:
                with Tape() as tape:
                    loss = batch_loss(method, chunk, system, state.rng)
                if not np.isfinite(loss.item()):
                    raise NumericalError("non-finite training loss")
                tape.backward(loss)
                optimizer.step()
            except (NumericalError, DomainError) as err:
                raise TrainingAborted(str(err), epoch, index) from err
            optimizer.zero_grad()
            total += loss.item() * len(rows)
            seen += len(rows)

        val_loss = validation_loss(method, val_set, system, config.eval_batch_size)
        if not np.isfinite(val_loss):
            raise TrainingAborted("non-finite validation loss", epoch, -1)
        row = HistoryRow(epoch, total / max(seen, 1), val_loss, optimizer.lr)
        optimizer.lr = state.scheduler.step(val_loss)
        stop = state.stopper.step(val_loss, epoch)
        if state.stopper.improved:
            state.best = method.state_dict()
        state.history.append(row)
        state.epoch = epoch
        elapsed = time.perf_counter() - started
        logger.info(
            f"{method.name} epoch {epoch}: train {row.train_loss:.4f} val {val_loss:.4f} "
            f"lr {row.lr:.3g} ({seen / max(elapsed, 1e-9):.0f} samples/s)"
        )
        if on_epoch:
            on_epoch(row)
        if stop:
            state.stopped = True
            logger.info(
                f"Early stopping {method.name} after epoch {epoch}; "
                f"best val loss {state.stopper.best:.4f} at epoch {state.stopper.best_epoch}"
            )
    return state


def restore_best(method: Method, state: TrainState) -> Method:
    if state.best is not None:
        method.load_state_dict(state.best)
    method.eval()
    return method


def baseline_linQ(
    train_set: ChannelBatch,
    val_set: ChannelBatch,
    system: SystemConfig,
    config: TrainConfig,
    seed: int = 0,
) -> Method:
    """Train the all-affine compress/quantize/decompress baseline; best weights loaded."""
    method = build_method("linq", system, seed)
    state = train(method, train_set, val_set, system, config, seed)
    return restore_best(method, state)


def baseline_naive_quantize(system: SystemConfig) -> Method:
    method = NaiveQuantize(system)
    method.eval()
    return method


# -- checkpoints -----------------------------------------------------------------


def checkpoint_stem(method: str, B: int, seed: int) -> str:
    return f"{method}_B{B}_seed{seed}"


@dataclasses.dataclass
class Checkpoint:
    method: Method
    state: TrainState
    system: SystemConfig
    train_config: TrainConfig
    seed: int

    def trained_method(self) -> Method:
        """The method with its best validation parameters, in eval mode."""
        return restore_best(self.method, self.state)


def save_checkpoint(
    path: str | os.PathLike[str],
    method: Method,
    state: TrainState,
    system: SystemConfig,
    train_config: TrainConfig,
    seed: int,
) -> pathlib.Path:
    arrays = {f"model/{k}": v for k, v in method.state_dict().items()}
    if state.best is not None:
        arrays.update({f"best/{k}": v for k, v in state.best.items()})
    optimizer_scalars, optimizer_arrays = state.optimizer.state_dict()
    arrays.update(optimizer_arrays)

    layout: list[list[Any]] = []
    chunks: list[bytes] = []
    for name, value in arrays.items():
        data = np.ascontiguousarray(value, dtype="<f8")
        layout.append([name, list(data.shape)])
        chunks.append(data.tobytes())

    meta = {
        "method": method.name,
        "seed": seed,
        "system": system.model_dump(mode="json"),
        "train": train_config.model_dump(mode="json"),
        "state": {
            "epoch": state.epoch,
            "stopped": state.stopped,
            "history": [dataclasses.asdict(r) for r in state.history],
            "optimizer": optimizer_scalars,
            "scheduler": state.scheduler.state_dict(),
            "early_stopping": state.stopper.state_dict(),
            "rng": state.rng.bit_generator.state,
        },
        "arrays": layout,
    }
    return write_container(path, ContainerKind.CHECKPOINT, meta, b"".join(chunks))


def load_checkpoint(path: str | os.PathLike[str]) -> Checkpoint:
    meta, payload = read_container(path, ContainerKind.CHECKPOINT)
    try:
        system = SystemConfig.model_validate(meta["system"])
        train_config = TrainConfig.model_validate(meta["train"])
        seed = int(meta["seed"])
        saved = meta["state"]
        layout = [(str(name), tuple(int(d) for d in shape)) for name, shape in meta["arrays"]]
    except (KeyError, TypeError, ValueError, ValidationError) as err:
        raise FormatError(f"{path}: invalid checkpoint header: {err}") from err

    arrays: dict[str, np.ndarray] = {}
    offset = 0
    for name, shape in layout:
        size = int(np.prod(shape)) * 8
        if offset + size > len(payload):
            raise FormatError(f"{path}: payload ends inside {name}")
        arrays[name] = np.frombuffer(payload[offset : offset + size], dtype="<f8").reshape(shape).copy()
        offset += size
    if offset != len(payload):
        raise FormatError(f"{path}: {len(payload) - offset} trailing payload bytes")

    def section(prefix: str) -> dict[str, np.ndarray]:
        return {k.removeprefix(prefix): v for k, v in arrays.items() if k.startswith(prefix)}

    method = build_method(
        meta["method"],
        system,
        seed,
        train_config.dropout,
        train_config.unrolled_layers,
        train_config.init_mode,
    )
    method.load_state_dict(section("model/"))
    state = TrainState.fresh(method, train_config, seed)
    state.optimizer.load_state_dict(saved["optimizer"], {k: v for k, v in arrays.items() if k.startswith("adam/")})
    state.scheduler.load_state_dict(saved["scheduler"])
    state.stopper.load_state_dict(saved["early_stopping"])
    state.rng.bit_generator.state = saved["rng"]
    state.epoch = int(saved["epoch"])
    state.stopped = bool(saved["stopped"])
    state.history = [HistoryRow(**row) for row in saved["history"]]
    best = section("best/")
    state.best = best or None
    logger.debug(f"Loaded {meta['method']} checkpoint {path} at epoch {state.epoch}")
    return Checkpoint(method, state, system, train_config, seed)
