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

"""WMMSE beamforming updater executed inside the autodiff graph.

The decoded phases give the effective channel G; f_w' adjusts W_opt for that
G, f_u_lambda predicts the receivers and weights, and the closed-form WMMSE
beamformer turns them into a normalized W. Complex tensors use trailing
(real, imaginary) pairs and a leading batch axis.
"""

import dataclasses
from collections.abc import Sequence
from typing import Literal

import numpy as np

from .autodiff import Module, Tensor, mlp, ops
from .errors import NumericalError, ShapeError
from .sysmodel import ChannelBatch, ChannelSample

InitMode = Literal["learned", "raw"]


@dataclasses.dataclass(frozen=True)
class ChannelTensors:
    """Constant channel tensors for a batch: (S,K,M,2), (S,N,M,2), (S,K,N,2)."""

    H_AU: Tensor
    H_AR: Tensor
    H_RU: Tensor

    @classmethod
    def from_batch(cls, batch: ChannelBatch | ChannelSample) -> "ChannelTensors":
        lead = batch.H_AU.ndim == 2
        H_AU, H_AR, H_RU = (
            np.asarray(h)[None] if lead else np.asarray(h)
            for h in (batch.H_AU, batch.H_AR, batch.H_RU)
        )
        return cls(ops.complex_tensor(H_AU), ops.complex_tensor(H_AR), ops.complex_tensor(H_RU))

    @classmethod
    def from_samples(cls, samples: Sequence[ChannelSample]) -> "ChannelTensors":
        return cls(
            ops.complex_tensor(np.stack([s.H_AU for s in samples])),
            ops.complex_tensor(np.stack([s.H_AR for s in samples])),
            ops.complex_tensor(np.stack([s.H_RU for s in samples])),
        )

    @property
    def batch_size(self) -> int:
        return self.H_AU.shape[0]


def effective_channel(channels: ChannelTensors, theta: Tensor) -> Tensor:
    """G = H_AU + H_RU diag(e^{j theta}) H_AR, differentiable in theta."""
    S, K, N = channels.H_RU.shape[:3]
    if theta.shape != (S, N):
        raise ShapeError(f"theta has shape {theta.shape}, expected {(S, N)}")
    phi = ops.reshape(ops.cis(theta), (S, 1, N, 2))
    return ops.add(channels.H_AU, ops.cmatmul(ops.cmul(channels.H_RU, phi), channels.H_AR))


def channel_features(G: Tensor, g_scale: float) -> Tensor:
    """Split-complex G^T flattened per sample (length 2MK), divided by g_scale."""
    S = G.shape[0]
    return ops.div(ops.reshape(ops.transpose(G, (0, 2, 1, 3)), (S, -1)), g_scale)


def init_beamformer(
    W_in: Tensor, G: Tensor, net: Module, g_scale: float, rng: np.random.Generator | None = None
) -> Tensor:
    """w' = f_w'([W_opt / sqrt(P); G^T / g_scale]), length 2MK per sample."""
    S = G.shape[0]
    x = ops.concat([ops.reshape(W_in, (S, -1)), channel_features(G, g_scale)], axis=-1)
    return net(x, rng)


def receiver_weight_net(
    w_prime: Tensor, G: Tensor, net: Module, g_scale: float, rng: np.random.Generator | None = None
) -> tuple[Tensor, Tensor]:
    """Receivers u (S, K, 2) and weights lambda = |.| >= 0 (S, K)."""
    S, K = G.shape[:2]
    x = ops.concat([ops.reshape(w_prime, (S, -1)), channel_features(G, g_scale)], axis=-1)
    out = net(x, rng)
    if out.shape[-1] != 3 * K:
        raise ShapeError(f"f_u_lambda produced {out.shape[-1]} outputs, expected {3 * K}")
    u = ops.reshape(out[:, : 2 * K], (S, K, 2))
    lam = ops.abs(out[:, 2 * K :])
    return u, lam


def unrolled_wmmse_step(
    u: Tensor, lam: Tensor, G: Tensor, P: float, sigma2: float, p: np.ndarray
) -> Tensor:
    """Closed-form WMMSE beamformer in the graph, renormalized to ||W||_F**2 = P.

    Shapes: u (S, K, 2), lam (S, K), G (S, K, M, 2); returns W (S, M, K, 2).
    Assembly order and the Cholesky solve follow ``wmmse.wmmse_beamformer``.
    """
    S, K, M = G.shape[:3]
    if u.shape != (S, K, 2) or lam.shape != (S, K):
        raise ShapeError(f"u {u.shape} / lambda {lam.shape} do not match G {G.shape}")
    if np.any(lam.data < 0):
        raise NumericalError("MSE weights must be non-negative")
    p_lam = ops.mul(lam, p)
    coef = ops.creal_scale(u, p_lam)
    if not np.any(coef.data):
        raise NumericalError("degenerate weights: every p_k u_k lambda_k is zero")
    c = ops.mul(p_lam, ops.cabs2(u))

    G_h = ops.cherm(G)
    eye = np.zeros((M, M, 2))
    eye[..., 0] = np.eye(M)
    mu = ops.mul(ops.sum(c, axis=-1), sigma2 / P)
    A = ops.add(
        ops.cmatmul(G_h, ops.creal_scale(G, ops.reshape(c, (S, K, 1)))),
        ops.mul(ops.reshape(mu, (S, 1, 1, 1)), eye),
    )
    X = ops.csolve_hpd(A, G_h)
    W = ops.cmul(X, ops.reshape(coef, (S, 1, K, 2)))
    norm = ops.sqrt(ops.sum(ops.cabs2(W), axis=(1, 2)))
    if np.any(norm.data == 0) or not np.all(np.isfinite(norm.data)):
        raise NumericalError("WMMSE beamformer has zero or non-finite norm")
    return ops.creal_scale(W, ops.reshape(ops.div(np.sqrt(P), norm), (S, 1, 1)))


class Updater(Module):
    """f_w' followed by ``unrolled_layers`` untied (f_u_lambda, closed form) layers."""

    def __init__(
        self,
        M: int,
        K: int,
        rng: np.random.Generator,
        dropout: float = 0.5,
        unrolled_layers: int = 1,
        init_mode: InitMode = "learned",
    ) -> None:
        super().__init__()
        if unrolled_layers < 1:
            raise ShapeError(f"unrolled_layers must be >= 1, got {unrolled_layers}")
        width = 4 * M * K
        self.init_mode = init_mode
        self.init_net = self.add_child(
            "init", mlp([width, width, width, width, 2 * M * K], rng, dropout=dropout)
        )
        self.weight_nets = [
            self.add_child(
                f"receiver{i}", mlp([width, width, width, width, 3 * K], rng, dropout=dropout)
            )
            for i in range(unrolled_layers)
        ]
        self.g_scale = self.add_buffer("g_scale", np.ones(1))

    def fit_scale(self, G: np.ndarray) -> None:
        """Set the channel feature scale to the RMS magnitude of G samples."""
        rms = float(np.sqrt(np.mean(np.abs(G) ** 2)))
        self.g_scale[0] = rms if rms > 0 else 1.0

    def beamform(
        self,
        W_opt: np.ndarray,
        G: Tensor,
        P: float,
        sigma2: float,
        p: np.ndarray,
        rng: np.random.Generator | None = None,
    ) -> Tensor:
        """Beamformers (S, M, K, 2) for the actual channel G, starting from W_opt."""
        S = G.shape[0]
        scale = float(self.g_scale[0])
        W_in = ops.complex_tensor(np.asarray(W_opt) / np.sqrt(P))
        if self.init_mode == "learned":
            w_prime = init_beamformer(W_in, G, self.init_net, scale, rng)
        else:
            w_prime = ops.reshape(W_in, (S, -1))
        W = w_prime
        for net in self.weight_nets:
            u, lam = receiver_weight_net(w_prime, G, net, scale, rng)
            W = unrolled_wmmse_step(u, lam, G, P, sigma2, p)
            w_prime = ops.div(ops.reshape(W, (S, -1)), np.sqrt(P))
        return W
