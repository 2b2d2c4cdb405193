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

import dataclasses

import numpy as np
import pytest

from src.aqe_wmmse.autodiff import Tape, Tensor, grad_check, mlp, ops
from src.aqe_wmmse.errors import NumericalError, ShapeError
from src.aqe_wmmse.models import build_method
from src.aqe_wmmse.sysmodel import (
    ChannelBatch,
    ChannelSample,
    SystemConfig,
    achievable_rates,
    effective_channel_matrix,
)
from src.aqe_wmmse.training import batch_loss, graph_rates
from src.aqe_wmmse.updater import (
    ChannelTensors,
    InitMode,
    Updater,
    effective_channel,
    init_beamformer,
    receiver_weight_net,
    unrolled_wmmse_step,
)
from src.aqe_wmmse.wmmse import mmse_receiver_and_weights, mrt_init, wmmse_beamformer
from tests.utils.channels import random_sample


def complex_normal(rng: np.random.Generator, *shape: int) -> np.ndarray:
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def classical_inputs(
    sample: ChannelSample, system: SystemConfig, theta: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    G = effective_channel_matrix(sample, theta)
    u, lam = mmse_receiver_and_weights(G, mrt_init(G, system.P), system.sigma2)
    return G, u, lam


def one(z: np.ndarray) -> Tensor:
    return ops.complex_tensor(z[None])


class TestEffectiveChannel:
    def test_matches_the_classical_channel(self, toy_sample: ChannelSample) -> None:
        theta = np.random.default_rng(0).uniform(-np.pi, np.pi, 4)
        G = effective_channel(ChannelTensors.from_batch(toy_sample), Tensor(theta[None]))
        np.testing.assert_allclose(
            ops.to_complex(G.data)[0], effective_channel_matrix(toy_sample, theta), atol=1e-12
        )

    def test_zero_phase(self, toy_sample: ChannelSample) -> None:
        G = effective_channel(ChannelTensors.from_batch(toy_sample), Tensor(np.zeros((1, 4))))
        expected = toy_sample.H_AU + toy_sample.H_RU @ toy_sample.H_AR
        np.testing.assert_allclose(ops.to_complex(G.data)[0], expected, atol=1e-12)

    def test_without_ris_path(self, toy_sample: ChannelSample) -> None:
        blocked = dataclasses.replace(toy_sample, H_RU=np.zeros((2, 4)))
        G = effective_channel(ChannelTensors.from_batch(blocked), Tensor(np.ones((1, 4))))
        np.testing.assert_array_equal(ops.to_complex(G.data)[0], toy_sample.H_AU)

    def test_wrong_phase_count(self, toy_sample: ChannelSample) -> None:
        with pytest.raises(ShapeError):
            effective_channel(ChannelTensors.from_batch(toy_sample), Tensor(np.zeros((1, 5))))

    def test_rate_gradient_with_respect_to_phases(
        self, toy_batch: ChannelBatch, toy_system: SystemConfig
    ) -> None:
        channels = ChannelTensors.from_batch(toy_batch)
        theta = Tensor(toy_batch.theta_opt.copy(), requires_grad=True)
        W = ops.complex_tensor(toy_batch.W_opt)

        def f() -> Tensor:
            rates = graph_rates(effective_channel(channels, theta), W, toy_system.sigma2)
            return ops.sum(rates)

        report = grad_check(f, {"theta": theta}, tol=1e-5)
        assert report.passed, report.failures()

    def test_graph_rates_match_the_system_model(
        self, toy_batch: ChannelBatch, toy_system: SystemConfig
    ) -> None:
        G = effective_channel(ChannelTensors.from_batch(toy_batch), Tensor(toy_batch.theta_opt))
        rates = graph_rates(G, ops.complex_tensor(toy_batch.W_opt), toy_system.sigma2).data
        for i in range(len(toy_batch)):
            sample = ChannelSample(toy_batch.H_AU[i], toy_batch.H_AR[i], toy_batch.H_RU[i])
            report = achievable_rates(toy_batch.W_opt[i], toy_batch.theta_opt[i], sample, toy_system)
            np.testing.assert_allclose(rates[i], report.rates, rtol=1e-12)


class TestUnrolledStep:
    def test_agrees_with_the_classical_beamformer(self, toy_system: SystemConfig) -> None:
        rng = np.random.default_rng(1)
        for _ in range(20):
            sample = random_sample(rng)
            G, u, lam = classical_inputs(sample, toy_system, rng.uniform(-np.pi, np.pi, 4))
            expected = wmmse_beamformer(u, lam, G, toy_system.P, toy_system.sigma2, toy_system.p)
            W = unrolled_wmmse_step(
                one(u), Tensor(lam[None]), one(G), toy_system.P, toy_system.sigma2, toy_system.p
            )
            np.testing.assert_allclose(ops.to_complex(W.data)[0], expected, rtol=0, atol=1e-12)

    def test_power_budget_on_every_sample(self) -> None:
        rng = np.random.default_rng(2)
        S, K, M, P = 1000, 3, 4, 2.5
        G = ops.complex_tensor(complex_normal(rng, S, K, M))
        u = ops.complex_tensor(complex_normal(rng, S, K))
        lam = Tensor(rng.uniform(0.1, 3.0, (S, K)))
        W = unrolled_wmmse_step(u, lam, G, P, 0.3, np.ones(K))
        power = ops.cabs2(W).data.sum(axis=(1, 2))
        np.testing.assert_allclose(power, P, rtol=1e-12)

    def test_weight_scale_invariance(self) -> None:
        rng = np.random.default_rng(3)
        G = ops.complex_tensor(complex_normal(rng, 4, 2, 2))
        u = ops.complex_tensor(complex_normal(rng, 4, 2))
        lam = rng.uniform(0.5, 2.0, (4, 2))
        W1 = unrolled_wmmse_step(u, Tensor(lam), G, 1.0, 0.1, np.ones(2)).data
        W2 = unrolled_wmmse_step(u, Tensor(7.5 * lam), G, 1.0, 0.1, np.ones(2)).data
        np.testing.assert_allclose(W1, W2, rtol=0, atol=1e-10)

    def test_gradients(self) -> None:
        rng = np.random.default_rng(4)
        G = ops.complex_tensor(complex_normal(rng, 3, 2, 2), requires_grad=True)
        u = ops.complex_tensor(complex_normal(rng, 3, 2), requires_grad=True)
        lam = Tensor(rng.uniform(0.5, 2.0, (3, 2)), requires_grad=True)
        weights = rng.standard_normal((3, 2, 2, 2))

        def f() -> Tensor:
            W = unrolled_wmmse_step(u, lam, G, 1.0, 0.1, np.array([1.0, 2.0]))
            return ops.sum(ops.mul(W, weights))

        report = grad_check(f, {"u": u, "lam": lam, "G": G}, tol=1e-5)
        assert report.passed, report.failures()

    def test_negative_weights(self) -> None:
        G = ops.complex_tensor(np.ones((1, 2, 2)))
        u = ops.complex_tensor(np.ones((1, 2)))
        with pytest.raises(NumericalError):
            unrolled_wmmse_step(u, Tensor(np.array([[1.0, -0.1]])), G, 1.0, 0.1, np.ones(2))

    def test_degenerate_weights(self) -> None:
        G = ops.complex_tensor(np.ones((1, 2, 2)))
        u = ops.complex_tensor(np.zeros((1, 2)))
        with pytest.raises(NumericalError, match="degenerate"):
            unrolled_wmmse_step(u, Tensor(np.ones((1, 2))), G, 1.0, 0.1, np.ones(2))

    def test_shape_mismatch(self) -> None:
        G = ops.complex_tensor(np.ones((1, 2, 2)))
        with pytest.raises(ShapeError):
            unrolled_wmmse_step(
                ops.complex_tensor(np.ones((1, 3))), Tensor(np.ones((1, 3))), G, 1.0, 0.1, np.ones(2)
            )


class TestNetworks:
    M, K = 4, 3

    def test_output_sizes(self) -> None:
        rng = np.random.default_rng(5)
        width = 4 * self.M * self.K
        G = ops.complex_tensor(complex_normal(rng, 2, self.K, self.M))
        W = ops.complex_tensor(complex_normal(rng, 2, self.M, self.K))
        init = mlp([width, width, width, width, 2 * self.M * self.K], rng)
        w_prime = init_beamformer(W, G, init, 1.0)
        assert w_prime.shape == (2, 24)
        receiver = mlp([width, width, width, width, 3 * self.K], rng)
        u, lam = receiver_weight_net(w_prime, G, receiver, 1.0)
        assert u.shape == (2, 3, 2)
        assert lam.shape == (2, 3)
        assert np.all(lam.data >= 0)

    def test_receiver_net_output_width_is_checked(self) -> None:
        rng = np.random.default_rng(6)
        width = 4 * self.M * self.K
        G = ops.complex_tensor(complex_normal(rng, 1, self.K, self.M))
        with pytest.raises(ShapeError):
            receiver_weight_net(Tensor(np.zeros((1, 24))), G, mlp([width, 8], rng), 1.0)

    @pytest.mark.parametrize("init_mode", ["learned", "raw"])
    @pytest.mark.parametrize("layers", [1, 3])
    def test_beamform_meets_power_budget(self, init_mode: InitMode, layers: int) -> None:
        rng = np.random.default_rng(7)
        updater = Updater(2, 2, rng, unrolled_layers=layers, init_mode=init_mode)
        updater.eval()
        W_opt = complex_normal(rng, 5, 2, 2)
        G = ops.complex_tensor(complex_normal(rng, 5, 2, 2))
        W = updater.beamform(W_opt, G, 2.0, 0.1, np.ones(2))
        np.testing.assert_allclose(ops.cabs2(W).data.sum(axis=(1, 2)), 2.0, rtol=1e-12)
        assert len(updater.weight_nets) == layers

    def test_stacked_layers_are_untied(self) -> None:
        updater = Updater(2, 2, np.random.default_rng(8), unrolled_layers=2)
        names = set(updater.parameters())
        assert "receiver0/affine0/weight" in names
        assert "receiver1/affine0/weight" in names
        with pytest.raises(ShapeError):
            Updater(2, 2, np.random.default_rng(8), unrolled_layers=0)

    def test_fit_scale(self) -> None:
        updater = Updater(2, 2, np.random.default_rng(9))
        updater.fit_scale(np.full((3, 2, 2), 2.0 + 0j))
        assert updater.g_scale[0] == 2.0
        updater.fit_scale(np.zeros((3, 2, 2)))
        assert updater.g_scale[0] == 1.0


class TestEndToEnd:
    def test_loss_gradient_matches_finite_differences(
        self, toy_batch: ChannelBatch, toy_system: SystemConfig
    ) -> None:
        method = build_method("aqe_wmmse", toy_system, seed=0, dropout=0.0)
        method.fit_normalization(toy_batch)
        method.train()
        report = grad_check(
            lambda: batch_loss(method, toy_batch, toy_system),
            method.parameters(),
            tol=1e-4,
            n_coords=20,
            rng=np.random.default_rng(0),
        )
        assert report.passed, report.failures()

    def test_every_parameter_receives_a_finite_gradient(
        self, toy_batch: ChannelBatch, toy_system: SystemConfig
    ) -> None:
        method = build_method("aqe_wmmse", toy_system, seed=1)
        method.fit_normalization(toy_batch)
        method.train()
        with Tape() as tape:
            loss = batch_loss(method, toy_batch, toy_system, np.random.default_rng(0))
        tape.backward(loss)
        params = method.parameters()
        assert {name.split("/")[0] for name in params} == {"aqe", "updater"}
        for name, param in params.items():
            assert param.grad is not None, name
            assert np.all(np.isfinite(param.grad)), name
        assert np.any(params["updater/receiver0/affine0/weight"].grad)
