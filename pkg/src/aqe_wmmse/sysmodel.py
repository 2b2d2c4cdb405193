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

"""RIS-assisted downlink system model: scenario config, channels, rates, datasets.

Complex arrays are numpy ``complex128``, whose memory layout is interleaved
(re, im) float64 pairs; dataset files store exactly that layout.
"""

import dataclasses
import logging
import math
import os
import pathlib
from collections.abc import Sequence
from typing import Any, Literal, NamedTuple

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .container import ContainerKind, read_container, write_container
from .errors import ConfigError, DomainError, FormatError, NumericalError, ShapeError

logger = logging.getLogger(__name__)

POWER_SLACK = 1e-9


def dbm_to_watt(p_dbm: float) -> float:
    return 10.0 ** ((p_dbm - 30.0) / 10.0)


def watt_to_dbm(p_watt: float) -> float:
    if p_watt <= 0:
        raise DomainError(f"power must be positive, got {p_watt}")
    return 10.0 * math.log10(p_watt) + 30.0


def noise_power(psd_dbm_hz: float = -170.0, bandwidth_hz: float = 180e3) -> float:
    """Thermal noise power in watts for a PSD in dBm/Hz over a bandwidth."""
    return 10.0 ** ((psd_dbm_hz + 10.0 * math.log10(bandwidth_hz) - 30.0) / 10.0)


def path_loss(d: float, a: float, rho0_lin: float) -> float:
    """Linear path gain rho0 * (d / 1 m) ** -a."""
    if d <= 0:
        raise DomainError(f"distance must be positive, got {d}")
    if a <= 0:
        raise DomainError(f"path-loss exponent must be positive, got {a}")
    return rho0_lin * d ** (-a)


def _square_factors(n: int) -> tuple[int, int]:
    rows = max(r for r in range(1, math.isqrt(n) + 1) if n % r == 0)
    return rows, n // rows


class SystemConfig(BaseModel):
    """All scalars of one RIS-assisted downlink scenario (powers in watts)."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    M: int = Field(4, ge=1)
    K: int = Field(3, ge=1)
    N: int = Field(16, ge=1)
    N_c: int = Field(8, ge=1)
    D: int = Field(2, ge=2)
    P: float = Field(1.0, gt=0)
    sigma2: float = Field(default_factory=noise_power, gt=0)
    priorities: tuple[float, ...] | None = None
    R: int = Field(100, ge=1)
    d_AR: float = Field(50.0, gt=0)
    d_RU: float = Field(2.0, gt=0)
    d_AU: float = Field(50.04, gt=0)
    a_AR: float = Field(2.8, gt=0)
    a_RU: float = Field(2.8, gt=0)
    a_AU: float = Field(3.5, gt=0)
    # The stated path gains are reproduced by rho0 = 30 (linear); -30 dB is
    # kept selectable through path_gain_reference.
    rho0_lin: float = Field(30.0, gt=0)
    rho0_db: float = -30.0
    path_gain_reference: Literal["linear", "db"] = "linear"
    ris_shape: tuple[int, int] | None = None

    @model_validator(mode="after")
    def _check_invariants(self) -> "SystemConfig":
        if self.D & (self.D - 1):
            raise ValueError(f"D must be a power of 2, got {self.D}")
        if self.priorities is not None:
            if len(self.priorities) != self.K:
                raise ValueError(
                    f"priorities has {len(self.priorities)} entries, expected K={self.K}"
                )
            if any(p < 0 for p in self.priorities):
                raise ValueError("priorities must be non-negative")
        if self.ris_shape is not None and self.ris_shape[0] * self.ris_shape[1] != self.N:
            raise ValueError(f"ris_shape {self.ris_shape} does not hold N={self.N} elements")
        return self

    @classmethod
    def from_file(cls, config_path: str | os.PathLike[str]) -> "SystemConfig":
        """Load a scenario from a JSON or YAML document."""
        try:
            with open(config_path) as f:
                data = yaml.safe_load(f)
            if not isinstance(data, dict):
                raise ConfigError(f"Invalid scenario config format in {config_path}")
            if "P_dbm" in data:
                data["P"] = dbm_to_watt(float(data.pop("P_dbm")))
            return cls.model_validate(data)
        except yaml.YAMLError as err:
            raise ConfigError(f"Invalid YAML in {config_path}: {err}") from err
        except ValidationError as err:
            raise ConfigError(f"Invalid scenario config {config_path}: {err}") from err

    def with_power(self, P: float) -> "SystemConfig":
        return self.model_copy(update={"P": float(P)})

    @property
    def bits_per_feature(self) -> int:
        return self.D.bit_length() - 1

    @property
    def B(self) -> int:
        return self.N_c * self.bits_per_feature

    @property
    def P_dbm(self) -> float:
        return watt_to_dbm(self.P)

    @property
    def p(self) -> np.ndarray:
        if self.priorities is None:
            return np.ones(self.K)
        return np.asarray(self.priorities, dtype=np.float64)

    @property
    def rho0(self) -> float:
        if self.path_gain_reference == "db":
            return 10.0 ** (self.rho0_db / 10.0)
        return self.rho0_lin

    @property
    def rho_AR(self) -> float:
        return path_loss(self.d_AR, self.a_AR, self.rho0)

    @property
    def rho_RU(self) -> float:
        return path_loss(self.d_RU, self.a_RU, self.rho0)

    @property
    def rho_AU(self) -> float:
        return path_loss(self.d_AU, self.a_AU, self.rho0)

    @property
    def ris_dims(self) -> tuple[int, int]:
        return self.ris_shape if self.ris_shape is not None else _square_factors(self.N)


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array


@dataclasses.dataclass(frozen=True, eq=False)
class ChannelSample:
    """One channel realization and, once labelled, its (W_opt, theta_opt)."""

    H_AU: np.ndarray
    H_AR: np.ndarray
    H_RU: np.ndarray
    W_opt: np.ndarray | None = None
    theta_opt: np.ndarray | None = None

    def __post_init__(self) -> None:
        for field in dataclasses.fields(self):
            value = getattr(self, field.name)
            if value is not None:
                dtype = np.float64 if field.name == "theta_opt" else np.complex128
                object.__setattr__(self, field.name, _frozen(np.asarray(value, dtype=dtype)))
        K, M = self.H_AU.shape
        N = self.H_AR.shape[0]
        if self.H_AR.shape != (N, M) or self.H_RU.shape != (K, N):
            raise ShapeError(
                f"inconsistent channel shapes H_AU {self.H_AU.shape}, "
                f"H_AR {self.H_AR.shape}, H_RU {self.H_RU.shape}"
            )
        if (self.W_opt is None) != (self.theta_opt is None):
            raise ShapeError("W_opt and theta_opt must be set together")
        if self.W_opt is not None and self.W_opt.shape != (M, K):
            raise ShapeError(f"W_opt has shape {self.W_opt.shape}, expected {(M, K)}")
        if self.theta_opt is not None and self.theta_opt.shape != (N,):
            raise ShapeError(f"theta_opt has shape {self.theta_opt.shape}, expected {(N,)}")

    @property
    def dims(self) -> tuple[int, int, int]:
        """(M, K, N)"""
        K, M = self.H_AU.shape
        return M, K, self.H_AR.shape[0]

    @property
    def has_labels(self) -> bool:
        return self.W_opt is not None

    def with_labels(self, W_opt: np.ndarray, theta_opt: np.ndarray) -> "ChannelSample":
        return dataclasses.replace(self, W_opt=W_opt, theta_opt=theta_opt)


@dataclasses.dataclass(frozen=True)
class RateReport:
    rates: np.ndarray
    weighted_sum: float


@dataclasses.dataclass(frozen=True, eq=False)
class ChannelBatch:
    """Samples stacked along a leading batch axis."""

    H_AU: np.ndarray
    H_AR: np.ndarray
    H_RU: np.ndarray
    W_opt: np.ndarray
    theta_opt: np.ndarray

    def __len__(self) -> int:
        return self.H_AU.shape[0]

    def subset(self, index: np.ndarray | slice) -> "ChannelBatch":
        return ChannelBatch(
            H_AU=self.H_AU[index],
            H_AR=self.H_AR[index],
            H_RU=self.H_RU[index],
            W_opt=self.W_opt[index],
            theta_opt=self.theta_opt[index],
        )


def stack_samples(samples: Sequence[ChannelSample]) -> ChannelBatch:
    if not samples:
        raise ShapeError("cannot stack an empty sample list")
    if not all(s.has_labels for s in samples):
        raise ShapeError("every sample in a batch needs (W_opt, theta_opt) labels")
    return ChannelBatch(
        H_AU=np.stack([s.H_AU for s in samples]),
        H_AR=np.stack([s.H_AR for s in samples]),
        H_RU=np.stack([s.H_RU for s in samples]),
        W_opt=np.stack([s.W_opt for s in samples]),  # type: ignore[misc]
        theta_opt=np.stack([s.theta_opt for s in samples]),  # type: ignore[misc]
    )


def ula_steering(n: int, angle: np.ndarray) -> np.ndarray:
    """Half-wavelength ULA responses, one unit-norm column per angle."""
    index = np.arange(n)[:, None]
    return np.exp(1j * np.pi * index * np.sin(angle)[None, :]) / np.sqrt(n)


def ura_steering(rows: int, cols: int, az: np.ndarray, el: np.ndarray) -> np.ndarray:
    """Half-wavelength URA responses (row-major element order), unit-norm columns."""
    m = np.repeat(np.arange(rows), cols)[:, None]
    n = np.tile(np.arange(cols), rows)[:, None]
    phase = np.pi * (m * (np.sin(az) * np.cos(el))[None, :] + n * np.sin(el)[None, :])
    return np.exp(1j * phase) / np.sqrt(rows * cols)


def _gains(rng: np.random.Generator, R: int) -> np.ndarray:
    return (rng.standard_normal(R) + 1j * rng.standard_normal(R)) / np.sqrt(2.0)


def _angles(rng: np.random.Generator, R: int) -> np.ndarray:
    return rng.uniform(-np.pi / 2, np.pi / 2, R)


def _normalize(H: np.ndarray, rho: float) -> np.ndarray:
    return np.sqrt(rho) * H / np.linalg.norm(H)


def gen_channels(config: SystemConfig, rng_seed: int) -> ChannelSample:
    """Draw one geometric multipath realization (no labels).

    Every link is a sum of ``R`` planar-wave paths with complex normal gains;
    the aggregate matrices are then scaled to ``||H_x||_F**2 = rho_x``.
    """
    rng = np.random.default_rng(rng_seed)
    M, K, R = config.M, config.K, config.R
    rows, cols = config.ris_dims
    scale = np.sqrt(1.0 / R)

    # AP -> RIS
    alpha = _gains(rng, R)
    a_ris = ura_steering(rows, cols, _angles(rng, R), _angles(rng, R))
    a_ap = ula_steering(M, _angles(rng, R))
    H_AR = scale * (a_ris * alpha) @ a_ap.conj().T

    # RIS -> UE k and AP -> UE k, single receive antenna per UE
    H_RU = np.empty((K, config.N), dtype=np.complex128)
    H_AU = np.empty((K, M), dtype=np.complex128)
    for k in range(K):
        alpha = _gains(rng, R)
        a_ris = ura_steering(rows, cols, _angles(rng, R), _angles(rng, R))
        H_RU[k] = scale * (a_ris.conj() @ alpha)
        alpha = _gains(rng, R)
        a_ap = ula_steering(M, _angles(rng, R))
        H_AU[k] = scale * (a_ap.conj() @ alpha)

    return ChannelSample(
        H_AU=_normalize(H_AU, config.rho_AU),
        H_AR=_normalize(H_AR, config.rho_AR),
        H_RU=_normalize(H_RU, config.rho_RU),
    )


def cascaded_channel(h_RU_k: np.ndarray, H_AR: np.ndarray) -> np.ndarray:
    """diag(h_RU_k) @ H_AR without forming the diagonal matrix."""
    h = np.asarray(h_RU_k).reshape(-1)
    if H_AR.ndim != 2 or h.shape[0] != H_AR.shape[0]:
        raise ShapeError(
            f"h_RU_k has {h.shape[0]} entries but H_AR has shape {H_AR.shape}"
        )
    return h[:, None] * H_AR


def effective_channel_matrix(sample: ChannelSample, theta: np.ndarray) -> np.ndarray:
    """G with rows g_k = h_AU,k + phi H_k, phi = exp(j theta)."""
    M, K, N = sample.dims
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (N,):
        raise ShapeError(f"theta has shape {theta.shape}, expected {(N,)}")
    phi = np.exp(1j * theta)
    G = np.empty((K, M), dtype=np.complex128)
    for k in range(K):
        G[k] = sample.H_AU[k] + phi @ cascaded_channel(sample.H_RU[k], sample.H_AR)
    return G


def rates_from_channel(
    G: np.ndarray, W: np.ndarray, sigma2: float, p: np.ndarray
) -> RateReport:
    """Per-UE rates under treating interference as noise for channel rows G."""
    K = G.shape[0]
    if W.shape[1] != K or W.shape[0] != G.shape[1]:
        raise ShapeError(f"W has shape {W.shape}, incompatible with G {G.shape}")
    power = np.abs(G @ W) ** 2
    eye = np.eye(K)
    signal = (power * eye).sum(axis=1)
    interference = (power * (1.0 - eye)).sum(axis=1)
    rates = np.log2(1.0 + signal / (interference + sigma2))
    return RateReport(rates=rates, weighted_sum=float(np.dot(p, rates)))


def _check_finite(name: str, value: np.ndarray) -> None:
    if np.isnan(value).any():
        raise NumericalError(f"{name} contains NaN")


def achievable_rates(
    W: np.ndarray, theta: np.ndarray, sample: ChannelSample, config: SystemConfig
) -> RateReport:
    """Achievable rates of beamformer W under RIS phases theta."""
    W = np.asarray(W, dtype=np.complex128)
    _check_finite("W", W)
    _check_finite("theta", np.asarray(theta, dtype=np.float64))
    power = float(np.sum(np.abs(W) ** 2))
    if power > config.P * (1.0 + POWER_SLACK):
        logger.warning(f"Beamformer power {power:.6g} W exceeds budget P={config.P:.6g} W")
    G = effective_channel_matrix(sample, theta)
    return rates_from_channel(G, W, config.sigma2, config.p)


def simulate_rx(
    W: np.ndarray,
    theta: np.ndarray,
    s: np.ndarray,
    n: np.ndarray,
    sample: ChannelSample,
) -> np.ndarray:
    """Received symbols y_k = sum_l (h_AU,k + phi H_k) w_l s_l + n_k."""
    M, K, _ = sample.dims
    W = np.asarray(W)
    s = np.asarray(s).reshape(-1)
    n = np.asarray(n).reshape(-1)
    if W.shape != (M, K) or s.shape != (K,) or n.shape != (K,):
        raise ShapeError(
            f"expected W {(M, K)}, s ({K},), n ({K},); got {W.shape}, {s.shape}, {n.shape}"
        )
    return effective_channel_matrix(sample, theta) @ (W @ s) + n


class DatasetFile(NamedTuple):
    config: SystemConfig
    samples: list[ChannelSample]


_FIELDS = ("H_AU", "H_AR", "H_RU", "W_opt", "theta_opt")


def _field_shapes(config: SystemConfig) -> dict[str, tuple[int, ...]]:
    M, K, N = config.M, config.K, config.N
    return {
        "H_AU": (K, M),
        "H_AR": (N, M),
        "H_RU": (K, N),
        "W_opt": (M, K),
        "theta_opt": (N,),
    }


def dataset_write(
    path: str | os.PathLike[str],
    samples: Sequence[ChannelSample],
    config: SystemConfig,
) -> pathlib.Path:
    """Persist samples; all must share the config dimensions and labelling."""
    has_labels = bool(samples) and samples[0].has_labels
    if any(s.has_labels != has_labels for s in samples):
        raise FormatError("cannot mix labelled and unlabelled samples in one dataset")
    shapes = _field_shapes(config)
    fields = _FIELDS if has_labels else _FIELDS[:3]

    chunks: list[bytes] = []
    for index, sample in enumerate(samples):
        for name in fields:
            value = getattr(sample, name)
            if value.shape != shapes[name]:
                raise ShapeError(
                    f"sample {index}: {name} has shape {value.shape}, "
                    f"config implies {shapes[name]}"
                )
            dtype = "<f8" if name == "theta_opt" else "<c16"
            chunks.append(np.ascontiguousarray(value, dtype=dtype).tobytes())

    meta: dict[str, Any] = {
        "config": config.model_dump(mode="json"),
        "count": len(samples),
        "has_labels": has_labels,
        "fields": list(fields),
    }
    return write_container(path, ContainerKind.DATASET, meta, b"".join(chunks))


def dataset_read(
    path: str | os.PathLike[str], expected: SystemConfig | None = None
) -> DatasetFile:
    meta, payload = read_container(path, ContainerKind.DATASET)
    try:
        config = SystemConfig.model_validate(meta["config"])
        count = int(meta["count"])
        fields = tuple(meta["fields"])
    except (KeyError, ValidationError, TypeError, ValueError) as err:
        raise FormatError(f"{path}: invalid dataset header: {err}") from err
    if expected is not None and expected != config:
        raise ConfigError(f"{path}: dataset config does not match the expected scenario")
    if fields not in (_FIELDS, _FIELDS[:3]):
        raise FormatError(f"{path}: unknown field layout {fields}")

    shapes = _field_shapes(config)
    item_bytes = {
        name: int(np.prod(shapes[name])) * (8 if name == "theta_opt" else 16)
        for name in fields
    }
    per_sample = sum(item_bytes.values())
    if len(payload) != count * per_sample:
        raise FormatError(
            f"{path}: payload of {len(payload)} bytes does not hold {count} samples "
            f"of {per_sample} bytes"
        )

    samples = []
    offset = 0
    for _ in range(count):
        values: dict[str, np.ndarray] = {}
        for name in fields:
            dtype = "<f8" if name == "theta_opt" else "<c16"
            chunk = payload[offset : offset + item_bytes[name]]
            values[name] = np.frombuffer(chunk, dtype=dtype).reshape(shapes[name])
            offset += item_bytes[name]
        samples.append(ChannelSample(**values))
    return DatasetFile(config=config, samples=samples)
