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

"""Classical WMMSE beamforming and the WMMSE + phase-iteration label generator."""

import dataclasses
import logging
from collections.abc import Callable, Sequence
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import NumericalError
from .sysmodel import (
    ChannelSample,
    SystemConfig,
    effective_channel_matrix,
    rates_from_channel,
)

logger = logging.getLogger(__name__)

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclasses.dataclass
class WmmseState:
    u: np.ndarray
    lam: np.ndarray
    W: np.ndarray
    trace: list[float]


class PhaseIterationResult(NamedTuple):
    W: np.ndarray
    theta: np.ndarray
    trace: list[float]


def wrap_phase(theta: np.ndarray) -> np.ndarray:
    """Map angles to [-pi, pi)."""
    wrapped = np.mod(np.asarray(theta, dtype=np.float64) + np.pi, 2 * np.pi) - np.pi
    wrapped[wrapped >= np.pi] -= 2 * np.pi
    return wrapped


def random_phase(rng: np.random.Generator, N: int) -> np.ndarray:
    """i.i.d. uniform phases on [-pi, pi), the fallback when a message is lost."""
    return rng.uniform(-np.pi, np.pi, N)


def mmse_receiver_and_weights(
    G: np.ndarray, W: np.ndarray, sigma2: float, p: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Per-UE MMSE scalar receivers u and MSE weights lambda = 1 / e.

    ``p`` is accepted for signature symmetry with the beamformer; the MMSE
    receiver does not depend on priorities.
    """
    S = G @ W
    power = np.abs(S) ** 2
    desired = np.diag(S)
    total = power.sum(axis=1) + sigma2
    u = desired / total
    # e_k = 1 - |g_k w_k|^2 / total, written without the cancellation
    e = (total - np.abs(desired) ** 2) / total
    if np.any(e <= 0) or not np.all(np.isfinite(e)):
        raise NumericalError(f"non-positive MMSE {e}")
    return u, 1.0 / e


def wmmse_beamformer(
    u: np.ndarray,
    lam: np.ndarray,
    G: np.ndarray,
    P: float,
    sigma2: float,
    p: np.ndarray,
) -> np.ndarray:
    """Closed-form WMMSE beamformer, renormalized so that ||W||_F**2 = P."""
    if np.any(lam < 0):
        raise NumericalError("MSE weights must be non-negative")
    coef = p * u * lam
    if not np.any(coef):
        raise NumericalError("degenerate weights: every p_k u_k lambda_k is zero")
    c = p * np.abs(u) ** 2 * lam
    M = G.shape[1]
    A = G.conj().T @ (c[:, None] * G) + (sigma2 / P) * c.sum() * np.eye(M)
    try:
        factor = scipy.linalg.cho_factor(A)
        X = scipy.linalg.cho_solve(factor, G.conj().T)
    except (np.linalg.LinAlgError, ValueError) as err:
        raise NumericalError(f"WMMSE system matrix is not positive definite: {err}") from err
    W = X * coef[None, :]
    norm = np.sqrt(np.sum(np.abs(W) ** 2))
    if not np.isfinite(norm) or norm == 0:
        raise NumericalError("WMMSE beamformer has zero or non-finite norm")
    return np.sqrt(P) * W / norm


def mrt_init(G: np.ndarray, P: float) -> np.ndarray:
    W = G.conj().T
    norm = np.linalg.norm(W)
    if norm == 0:
        raise NumericalError("cannot initialize a beamformer on an all-zero channel")
    return np.sqrt(P) * W / norm


def wmmse_fixed_phase(
    sample: ChannelSample,
    theta: np.ndarray,
    config: SystemConfig,
    max_iter: int = 50,
    tol: float = 1e-6,
    W0: np.ndarray | None = None,
) -> WmmseState:
    """Alternate receiver/weight and beamformer updates for fixed RIS phases."""
    if max_iter < 1:
        raise ValueError(f"max_iter must be >= 1, got {max_iter}")
    G = effective_channel_matrix(sample, theta)
    p = config.p
    W = mrt_init(G, config.P) if W0 is None else np.asarray(W0, dtype=np.complex128)
    trace = [rates_from_channel(G, W, config.sigma2, p).weighted_sum]
    u = np.zeros(config.K, dtype=np.complex128)
    lam = np.ones(config.K)

    for _ in range(max_iter):
        u, lam = mmse_receiver_and_weights(G, W, config.sigma2, p)
        W = wmmse_beamformer(u, lam, G, config.P, config.sigma2, p)
        trace.append(rates_from_channel(G, W, config.sigma2, p).weighted_sum)
        if abs(trace[-1] - trace[-2]) < tol:
            break
    return WmmseState(u=u, lam=lam, W=W, trace=trace)


def _weighted_sum_rate(S: np.ndarray, sigma2: float, p: np.ndarray) -> np.ndarray:
    """Weighted sum-rate for stacked products S = G W of shape (..., K, K)."""
    power = np.abs(S) ** 2
    eye = np.eye(S.shape[-1])
    signal = (power * eye).sum(axis=-1)
    interference = (power * (1.0 - eye)).sum(axis=-1)
    return np.log2(1.0 + signal / (interference + sigma2)) @ p


def _golden_max(
    f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-10
) -> tuple[float, float]:
    x1 = hi - GOLDEN * (hi - lo)
    x2 = lo + GOLDEN * (hi - lo)
    f1, f2 = f(x1), f(x2)
    while hi - lo > tol:
        if f1 >= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - GOLDEN * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + GOLDEN * (hi - lo)
            f2 = f(x2)
    return (x1, f1) if f1 >= f2 else (x2, f2)


def coordinate_phase_update(
    sample: ChannelSample,
    theta: np.ndarray,
    W: np.ndarray,
    config: SystemConfig,
    grid_points: int = 64,
) -> np.ndarray:
    """One sweep of per-element phase maximization with W held fixed.

    Each theta_n moves to the best of a ``grid_points`` grid (the current value
    is grid point 0, so ties keep it), refined by golden-section search on the
    neighbouring grid cell. A move is only accepted on strict improvement.
    """
    theta = np.array(theta, dtype=np.float64)
    p, sigma2 = config.p, config.sigma2
    # per-element contributions phi_n * (H_RU[:, n] H_AR[n, :]) W
    contrib = (sample.H_RU.T[:, :, None] * sample.H_AR[:, None, :]) @ W
    S = effective_channel_matrix(sample, theta) @ W
    step = 2 * np.pi / grid_points
    offsets = step * np.arange(grid_points)

    for n in range(theta.shape[0]):
        rest = S - np.exp(1j * theta[n]) * contrib[n]
        current = float(_weighted_sum_rate(S, sigma2, p))

        grid = theta[n] + offsets
        values = _weighted_sum_rate(
            rest[None] + np.exp(1j * grid)[:, None, None] * contrib[n][None], sigma2, p
        )
        best = int(np.argmax(values))
        best_t, best_v = float(grid[best]), float(values[best])

        def objective(t: float, n: int = n, rest: np.ndarray = rest) -> float:
            return float(_weighted_sum_rate(rest + np.exp(1j * t) * contrib[n], sigma2, p))

        refined_t, refined_v = _golden_max(objective, best_t - step, best_t + step)
        if refined_v > best_v:
            best_t, best_v = refined_t, refined_v
        if best_v > current:
            theta[n] = best_t
            S = rest + np.exp(1j * best_t) * contrib[n]
    return wrap_phase(theta)


def wmmse_pi(
    sample: ChannelSample,
    config: SystemConfig,
    outer_iters: int = 100,
    inner_max_iter: int = 50,
    inner_tol: float = 1e-6,
    outer_tol: float = 1e-9,
    grid_points: int = 64,
) -> PhaseIterationResult:
    """Joint WMMSE beamforming and coordinate phase iteration from theta = 0.

    Returns the best (W, theta) pair met; ``trace`` is the best-so-far weighted
    sum-rate after the initial WMMSE run and after each outer iteration. The
    loop stops early once an outer iteration gains less than ``outer_tol``.
    """
    if outer_iters < 1:
        raise ValueError(f"outer_iters must be >= 1, got {outer_iters}")
    theta = np.zeros(config.N)
    state = wmmse_fixed_phase(sample, theta, config, inner_max_iter, inner_tol)
    W = state.W
    best_value, best_W, best_theta = state.trace[-1], W, theta
    trace = [best_value]

    for _ in range(outer_iters):
        previous_best = best_value
        theta = coordinate_phase_update(sample, theta, W, config, grid_points)
        candidates = [(W, theta)]
        state = wmmse_fixed_phase(sample, theta, config, inner_max_iter, inner_tol, W0=W)
        W = state.W
        candidates.append((W, theta))
        for cand_W, cand_theta in candidates:
            G = effective_channel_matrix(sample, cand_theta)
            value = rates_from_channel(G, cand_W, config.sigma2, config.p).weighted_sum
            if value > best_value:
                best_value, best_W, best_theta = value, cand_W, cand_theta
        trace.append(best_value)
        if best_value - previous_best < outer_tol:
            break

    return PhaseIterationResult(W=best_W, theta=wrap_phase(best_theta), trace=trace)


def _label_one(
    sample: ChannelSample, config: SystemConfig, outer_iters: int
) -> ChannelSample:
    result = wmmse_pi(sample, config, outer_iters=outer_iters)
    return sample.with_labels(result.W, result.theta)


def label_samples(
    samples: Sequence[ChannelSample],
    config: SystemConfig,
    outer_iters: int = 100,
    jobs: int = 1,
    on_done: Callable[[int], None] | None = None,
) -> list[ChannelSample]:
    """Attach (W_opt, theta_opt) labels, fanning out over processes when jobs > 1."""
    work = partial(_label_one, config=config, outer_iters=outer_iters)
    labelled: list[ChannelSample] = []
    if jobs <= 1:
        for sample in samples:
            labelled.append(work(sample))
            if on_done:
                on_done(len(labelled))
        return labelled

    with ProcessPoolExecutor(max_workers=jobs) as pool:
        for result in pool.map(work, samples, chunksize=8):
            labelled.append(result)
            if on_done:
                on_done(len(labelled))
    return labelled
