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

"""Auto-quantization encoder: f_EN, the soft-to-hard quantizer f_Q and f_DE.

The quantizer maps each feature to ``sum_i a_i q(c_i (x - b_i))`` with
``q = tanh`` in train mode and ``q = sign`` (sign(0) = +1) in eval mode.
All amplitudes a_i are equal and fixed, so the eval output only depends on
how many terms are positive; that count is the level index sent on the wire.
"""

import dataclasses
import math
import struct

import numpy as np

from .autodiff import Module, Tensor, mlp, ops
from .autodiff.tensor import Mode
from .errors import DomainError, FormatError, ShapeError

WIRE_VERSION = 1
_WIRE_HEADER = struct.Struct(">BH")
LEVEL_TOL = 1e-9


def bits_per_level(D: int) -> int:
    if D < 2 or D & (D - 1):
        raise DomainError(f"D must be a power of two >= 2, got {D}")
    return D.bit_length() - 1


class Quantizer(Module):
    """Trainable scalar quantizer with D levels (D - 1 tanh/sign terms)."""

    def __init__(self, D: int = 2) -> None:
        super().__init__()
        bits_per_level(D)
        self.D = D
        terms = D - 1
        self.a = np.full(terms, np.pi / 2 / terms)
        self.b = self.add_param("b", np.linspace(-1.0, 1.0, D + 1)[1:-1])
        self.c = self.add_param("c", np.full(terms, 0.5))

    def __call__(self, x: Tensor, rng: np.random.Generator | None = None) -> Tensor:
        return quantize(x, self, self.mode)


def quantize(features: Tensor, params: Quantizer, mode: Mode) -> Tensor:
    """Quantize features of shape (..., N_c); eval mode returns exact levels."""
    shape = (*features.shape, 1)
    if mode is Mode.EVAL:
        x = features.data.reshape(shape)
        q = np.where(params.c.data * (x - params.b.data) >= 0, 1.0, -1.0)
        return Tensor((params.a * q).sum(axis=-1))
    shifted = ops.sub(ops.reshape(features, shape), params.b)
    q = ops.tanh(ops.mul(shifted, params.c))
    return ops.sum(ops.mul(q, params.a), axis=-1)


def level_set(params: Quantizer) -> np.ndarray:
    """Sorted eval-mode output levels; level k has k positive terms."""
    terms = params.D - 1
    return params.a[0] * (2.0 * np.arange(params.D) - terms)


def level_index(psi: np.ndarray, params: Quantizer) -> np.ndarray:
    levels = level_set(params)
    psi = np.asarray(psi, dtype=np.float64)
    index = np.abs(psi[..., None] - levels).argmin(axis=-1)
    if np.any(np.abs(levels[index] - psi) > LEVEL_TOL):
        raise DomainError("value is not a quantizer level")
    return index


def pack_bits(psi: np.ndarray, params: Quantizer) -> np.ndarray:
    """Level values (N_c,) -> B bits, log2(D) big-endian bits per feature."""
    width = bits_per_level(params.D)
    index = level_index(psi, params).reshape(-1)
    shifts = np.arange(width - 1, -1, -1)
    return ((index[:, None] >> shifts) & 1).astype(np.uint8).reshape(-1)


def unpack_bits(bits: np.ndarray, params: Quantizer) -> np.ndarray:
    width = bits_per_level(params.D)
    bits = np.asarray(bits, dtype=np.uint8).reshape(-1)
    if bits.size % width or np.any(bits > 1):
        raise FormatError(f"{bits.size} values do not form {width}-bit groups of 0/1")
    weights = 1 << np.arange(width - 1, -1, -1)
    index = bits.reshape(-1, width) @ weights
    return level_set(params)[index]


@dataclasses.dataclass(frozen=True)
class ControlMessage:
    bits: np.ndarray
    features: np.ndarray
    quantized: np.ndarray

    @property
    def B(self) -> int:
        return int(self.bits.size)


def make_message(features: np.ndarray, params: Quantizer) -> ControlMessage:
    """Hard-quantize one feature vector and pack it."""
    features = np.asarray(features, dtype=np.float64).reshape(-1)
    quantized = quantize(Tensor(features), params, Mode.EVAL).data
    return ControlMessage(pack_bits(quantized, params), features, quantized)


def encode_message(bits: np.ndarray, D: int = 2) -> bytes:
    """Wire format: u8 version, u16 big-endian N_c, then packed bits."""
    bits = np.asarray(bits, dtype=np.uint8).reshape(-1)
    width = bits_per_level(D)
    if bits.size % width:
        raise FormatError(f"{bits.size} bits is not a multiple of {width}")
    n_c = bits.size // width
    if n_c >= 1 << 16:
        raise FormatError(f"N_c={n_c} does not fit the 16-bit length field")
    return _WIRE_HEADER.pack(WIRE_VERSION, n_c) + np.packbits(bits).tobytes()


def decode_message(data: bytes, D: int = 2) -> np.ndarray:
    if len(data) < _WIRE_HEADER.size:
        raise FormatError("control message shorter than its header")
    version, n_c = _WIRE_HEADER.unpack_from(data)
    if version != WIRE_VERSION:
        raise FormatError(f"unsupported control message version {version}")
    B = n_c * bits_per_level(D)
    body = data[_WIRE_HEADER.size :]
    if len(body) != math.ceil(B / 8):
        raise FormatError(f"expected {math.ceil(B / 8)} payload bytes for {B} bits, got {len(body)}")
    return np.unpackbits(np.frombuffer(body, dtype=np.uint8))[:B]


class FeatureNormalizer(Module):
    """Per-feature standardization with statistics kept as buffers."""

    def __init__(self, features: int) -> None:
        super().__init__()
        self.mean = self.add_buffer("mean", np.zeros(features))
        self.std = self.add_buffer("std", np.ones(features))

    def fit(self, x: np.ndarray) -> "FeatureNormalizer":
        if x.ndim != 2 or x.shape[1] != self.mean.shape[0]:
            raise ShapeError(f"expected (samples, {self.mean.shape[0]}), got {x.shape}")
        std = x.std(axis=0)
        self.mean[...] = x.mean(axis=0)
        self.std[...] = np.where(std > 0, std, 1.0)
        return self

    def __call__(self, x: Tensor, rng: np.random.Generator | None = None) -> Tensor:
        return Tensor((x.data - self.mean) / self.std)


def encoder_features(theta_opt: np.ndarray, W_opt: np.ndarray, P: float) -> np.ndarray:
    """[theta_opt (N); split W_opt / sqrt(P) (2MK)] per sample."""
    S = theta_opt.shape[0]
    W = ops.to_pairs(np.asarray(W_opt) / np.sqrt(P)).reshape(S, -1)
    return np.concatenate([theta_opt, W], axis=1)


def encoder_widths(M: int, K: int, N: int, N_c: int) -> list[int]:
    H = N + 2 * M * K
    return [H, 32 * H, 16 * H, 8 * H, 4 * H, N_c]


class Encoder(Module):
    def __init__(self, M: int, K: int, N: int, N_c: int, rng: np.random.Generator, dropout: float = 0.5) -> None:
        super().__init__()
        self.widths = encoder_widths(M, K, N, N_c)
        self.normalizer = FeatureNormalizer(self.widths[0])
        self.add_child("normalizer", self.normalizer)
        self.net = self.add_child(
            "net", mlp(self.widths, rng, batchnorm=True, dropout=dropout)
        )

    def __call__(self, x: Tensor, rng: np.random.Generator | None = None) -> Tensor:
        if x.shape[-1] != self.widths[0]:
            raise ShapeError(f"encoder expects {self.widths[0]} inputs, got {x.shape[-1]}")
        return self.net(self.normalizer(x), rng)


class Decoder(Module):
    def __init__(self, N_c: int, N: int, rng: np.random.Generator) -> None:
        super().__init__()
        self.N_c = N_c
        self.net = self.add_child("net", mlp([N_c, N, N, N], rng))

    def __call__(self, psi: Tensor, rng: np.random.Generator | None = None) -> Tensor:
        if psi.shape[-1] != self.N_c:
            raise ShapeError(f"decoder expects {self.N_c} inputs, got {psi.shape[-1]}")
        return self.net(psi, rng)


class AutoQuantizationEncoder(Module):
    """encode -> quantize -> decode; outputs are phases, never wrapped."""

    def __init__(self, M: int, K: int, N: int, N_c: int, D: int, rng: np.random.Generator, dropout: float = 0.5) -> None:
        super().__init__()
        self.encoder = Encoder(M, K, N, N_c, rng, dropout)
        self.add_child("encoder", self.encoder)
        self.quantizer = Quantizer(D)
        self.add_child("quantizer", self.quantizer)
        self.decoder = Decoder(N_c, N, rng)
        self.add_child("decoder", self.decoder)

    def encode(self, x: Tensor, rng: np.random.Generator | None = None) -> Tensor:
        return self.encoder(x, rng)

    def decode(self, psi: Tensor, rng: np.random.Generator | None = None) -> Tensor:
        return self.decoder(psi, rng)

    def __call__(self, x: Tensor, rng: np.random.Generator | None = None) -> Tensor:
        return self.decode(self.quantizer(self.encode(x, rng)), rng)

    def messages(self, x: Tensor) -> list[ControlMessage]:
        """Control messages for a batch of encoder inputs (eval mode)."""
        mode = self.mode
        self.eval()
        try:
            features = self.encode(x).data
        finally:
            self.set_mode(mode)
        return [make_message(f, self.quantizer) for f in features]
