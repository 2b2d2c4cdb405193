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
import numpy as np
import pytest
from pydantic import ValidationError
from pytest_mock import MockerFixture

from src.aqe_wmmse.autodiff import Tensor
from src.aqe_wmmse.autodiff.tensor import Mode
from src.aqe_wmmse.container import ContainerKind, write_container
from src.aqe_wmmse.errors import ConfigError, FormatError, NumericalError, TrainingAborted
from src.aqe_wmmse.models import LinQ, Method, build_method
from src.aqe_wmmse.sysmodel import ChannelBatch, ChannelSample, SystemConfig, achievable_rates
from src.aqe_wmmse.training import (
    HistoryRow,
    TrainConfig,
    TrainState,
    baseline_linQ,
    baseline_naive_quantize,
    batch_loss,
    checkpoint_stem,
    load_checkpoint,
    loss_from_rates,
    save_checkpoint,
    split_dataset,
    train,
    validation_loss,
)
from src.aqe_wmmse.updater import ChannelTensors
from tests.utils.channels import random_sample

FAST = TrainConfig(batch_size=4, eval_batch_size=4, lr=1e-2)


def reference_loss(method: Method, batch: ChannelBatch, system: SystemConfig) -> float:
    """-(mean weighted sum-rate) computed per sample through the system model."""
    method.eval()
    out = method.forward(ChannelTensors.from_batch(batch), batch, system.P)
    W, theta = out.beamformers(), out.theta.data
    sums = [
        achievable_rates(
            W[i], theta[i], ChannelSample(batch.H_AU[i], batch.H_AR[i], batch.H_RU[i]), system
        ).weighted_sum
        for i in range(len(batch))
    ]
    return -float(np.mean(sums))


def assert_same_state(a: dict[str, np.ndarray], b: dict[str, np.ndarray]) -> None:
    assert a.keys() == b.keys()
    for name in a:
        np.testing.assert_array_equal(a[name], b[name], err_msg=name)


class TestTrainConfig:
    def test_defaults(self) -> None:
        config = TrainConfig()
        assert (config.batch_size, config.max_epochs, config.early_stop_patience) == (128, 1000, 50)
        assert (config.lr, config.lr_factor, config.lr_patience, config.lr_min) == (
            1e-3, 0.8, 20, 5e-5,
        )  # fmt: skip
        assert config.split == (0.64, 0.16, 0.20)

    @pytest.mark.parametrize(
        "overrides",
        [{"split": (0.5, 0.5, 0.5)}, {"split": (1.2, -0.1, -0.1)}, {"lr_patience": 0}, {"lr_factor": 1.0}],
    )
    def test_rejects_invalid_values(self, overrides: dict[str, object]) -> None:
        with pytest.raises(ValidationError):
            TrainConfig(**overrides)

    def test_from_file(self, tmp_path: pathlib.Path) -> None:
        path = tmp_path / "train.yaml"
        path.write_text("batch_size: 32\nsplit: [0.8, 0.1, 0.1]\n")
        config = TrainConfig.from_file(path)
        assert config.batch_size == 32
        assert config.split == (0.8, 0.1, 0.1)

    @pytest.mark.parametrize("text", ["batch_size: [", "- 1\n- 2\n", "learning_rate: 0.1\n"])
    def test_from_file_errors(self, tmp_path: pathlib.Path, text: str) -> None:
        path = tmp_path / "train.yaml"
        path.write_text(text)
        with pytest.raises(ConfigError):
            TrainConfig.from_file(path)


class TestSplit:
    def test_sizes_and_determinism(self) -> None:
        rng = np.random.default_rng(0)
        samples = [random_sample(rng) for _ in range(25)]
        train_set, val_set, test_set = split_dataset(samples, seed=5)
        assert (len(train_set), len(val_set), len(test_set)) == (16, 4, 5)
        again = split_dataset(samples, seed=5)
        assert [id(s) for s in again[2]] == [id(s) for s in test_set]
        assert {id(s) for part in (train_set, val_set, test_set) for s in part} == {
            id(s) for s in samples
        }

    def test_too_few_samples(self) -> None:
        samples = [random_sample(np.random.default_rng(0)) for _ in range(2)]
        with pytest.raises(ConfigError):
            split_dataset(samples)


class TestLoss:
    def test_single_sample(self) -> None:
        assert loss_from_rates(Tensor(np.array([[1.0, 2.0, 3.0]])), np.ones(3)).item() == -6.0

    def test_mean_over_samples(self) -> None:
        rates = Tensor(np.array([[1.0, 3.0], [2.0, 4.0]]))
        assert loss_from_rates(rates, np.ones(2)).item() == -5.0

    def test_priorities_weight_the_rates(self) -> None:
        rates = Tensor(np.array([[1.0, 3.0]]))
        assert loss_from_rates(rates, np.array([2.0, 0.5])).item() == -3.5

    @pytest.mark.parametrize("name", ["upper_bound", "naive", "aqe_wmmse", "linq"])
    def test_matches_the_system_model(
        self, name: str, toy_system: SystemConfig, toy_batch: ChannelBatch
    ) -> None:
        method = build_method(name, toy_system)
        method.fit_normalization(toy_batch)
        expected = reference_loss(method, toy_batch, toy_system)
        assert batch_loss(method, toy_batch, toy_system).item() == pytest.approx(expected, rel=1e-12)
        assert validation_loss(method, toy_batch, toy_system, batch_size=4) == pytest.approx(
            expected, rel=1e-12
        )


class TestTrain:
    def test_records_history_and_best_parameters(
        self, toy_system: SystemConfig, toy_batch: ChannelBatch
    ) -> None:
        method = build_method("aqe_wmmse", toy_system)
        rows: list[HistoryRow] = []
        state = train(method, toy_batch, toy_batch, toy_system, FAST, epochs=4, on_epoch=rows.append)
        assert [r.epoch for r in state.history] == [1, 2, 3, 4]
        assert rows == state.history
        assert state.best is not None
        assert state.best_val_loss <= state.history[-1].val_loss
        assert state.best_val_loss == min(r.val_loss for r in state.history)
        assert method.mode is Mode.EVAL

    def test_seeded_runs_are_identical(
        self, toy_system: SystemConfig, toy_batch: ChannelBatch
    ) -> None:
        runs = []
        for _ in range(2):
            method = build_method("aqe_wmmse", toy_system, seed=2)
            state = train(method, toy_batch, toy_batch, toy_system, FAST, seed=2, epochs=3)
            runs.append((method.state_dict(), state.history))
        assert_same_state(runs[0][0], runs[1][0])
        assert runs[0][1] == runs[1][1]

    def test_resumed_training_matches_a_single_run(
        self, toy_system: SystemConfig, toy_batch: ChannelBatch, tmp_path: pathlib.Path
    ) -> None:
        straight = build_method("aqe_wmmse", toy_system, seed=1)
        full = train(straight, toy_batch, toy_batch, toy_system, FAST, seed=1, epochs=10)

        first = build_method("aqe_wmmse", toy_system, seed=1)
        half = train(first, toy_batch, toy_batch, toy_system, FAST, seed=1, epochs=5)
        path = save_checkpoint(tmp_path / "ckpt", first, half, toy_system, FAST, seed=1)
        resumed = load_checkpoint(path)
        state = train(
            resumed.method, toy_batch, toy_batch, toy_system, resumed.train_config,
            seed=1, state=resumed.state, epochs=5,
        )  # fmt: skip

        assert state.epoch == full.epoch == 10
        assert state.history == full.history
        assert_same_state(resumed.method.state_dict(), straight.state_dict())
        assert state.best is not None and full.best is not None
        assert_same_state(state.best, full.best)

    def test_plateau_then_early_stop(
        self, toy_system: SystemConfig, toy_batch: ChannelBatch, mocker: MockerFixture
    ) -> None:
        config = TrainConfig(batch_size=4, lr_patience=20, early_stop_patience=25, max_epochs=100)
        method = build_method("linq", toy_system)
        mocker.patch("src.aqe_wmmse.training.validation_loss", return_value=1.0)
        state = train(method, toy_batch, toy_batch, toy_system, config)
        lrs = [row.lr for row in state.history]
        assert lrs[:21] == [1e-3] * 21
        assert lrs[21] == pytest.approx(8e-4)
        assert state.stopped
        assert state.epoch == 26
        assert state.stopper.best_epoch == 1

    def test_stops_at_max_epochs(self, toy_system: SystemConfig, toy_batch: ChannelBatch) -> None:
        config = TrainConfig(batch_size=4, max_epochs=3)
        state = train(build_method("linq", toy_system), toy_batch, toy_batch, toy_system, config)
        assert state.epoch == 3
        assert not state.stopped

    def test_non_trainable_methods(self, toy_system: SystemConfig, toy_batch: ChannelBatch) -> None:
        with pytest.raises(ConfigError):
            train(build_method("naive", toy_system), toy_batch, toy_batch, toy_system, FAST)

    def test_nan_loss_aborts_with_position(
        self, toy_system: SystemConfig, toy_batch: ChannelBatch, mocker: MockerFixture
    ) -> None:
        method = build_method("linq", toy_system)
        mocker.patch("src.aqe_wmmse.training.batch_loss", side_effect=NumericalError("rate is NaN"))
        with pytest.raises(TrainingAborted, match=r"rate is NaN \(epoch 1, batch 0\)") as info:
            train(method, toy_batch, toy_batch, toy_system, FAST)
        assert (info.value.epoch, info.value.batch) == (1, 0)

    def test_fresh_state_seeds_the_shuffle(self, toy_system: SystemConfig) -> None:
        method = build_method("linq", toy_system)
        a = TrainState.fresh(method, FAST, seed=4).rng.permutation(10)
        b = TrainState.fresh(method, FAST, seed=4).rng.permutation(10)
        np.testing.assert_array_equal(a, b)


class TestCheckpoint:
    def test_round_trip(
        self, toy_system: SystemConfig, toy_batch: ChannelBatch, tmp_path: pathlib.Path
    ) -> None:
        method = build_method("linq", toy_system, seed=3)
        state = train(method, toy_batch, toy_batch, toy_system, FAST, seed=3, epochs=2)
        path = tmp_path / checkpoint_stem("linq", toy_system.B, 3)
        save_checkpoint(path, method, state, toy_system, FAST, seed=3)

        loaded = load_checkpoint(path)
        assert loaded.system == toy_system
        assert loaded.train_config == FAST
        assert loaded.seed == 3
        assert loaded.state.history == state.history
        assert loaded.state.optimizer.lr == state.optimizer.lr
        assert_same_state(loaded.method.state_dict(), method.state_dict())

        trained = loaded.trained_method()
        assert trained.mode is Mode.EVAL
        assert state.best is not None
        assert_same_state(trained.state_dict(), state.best)

    def test_stem(self) -> None:
        assert checkpoint_stem("aqe_wmmse", 8, 2) == "aqe_wmmse_B8_seed2"

    def test_rejects_other_containers(self, tmp_path: pathlib.Path) -> None:
        path = write_container(tmp_path / "data.bin", ContainerKind.DATASET, {}, b"")
        with pytest.raises(FormatError, match="checkpoint"):
            load_checkpoint(path)

    def test_rejects_a_truncated_payload(
        self, toy_system: SystemConfig, toy_batch: ChannelBatch, tmp_path: pathlib.Path
    ) -> None:
        method = build_method("linq", toy_system)
        state = TrainState.fresh(method, FAST, seed=0)
        path = save_checkpoint(tmp_path / "ckpt", method, state, toy_system, FAST, seed=0)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(FormatError):
            load_checkpoint(path)


def test_baselines(toy_system: SystemConfig, toy_batch: ChannelBatch) -> None:
    linq = baseline_linQ(toy_batch, toy_batch, toy_system, TrainConfig(batch_size=4, max_epochs=2))
    assert isinstance(linq, LinQ)
    assert linq.mode is Mode.EVAL
    naive = baseline_naive_quantize(toy_system)
    assert naive.name == "naive"
    assert naive.mode is Mode.EVAL
