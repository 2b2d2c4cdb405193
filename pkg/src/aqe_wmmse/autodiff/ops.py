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

"""Differentiable primitives.

Real ops work on plain arrays. Complex ops take tensors whose trailing axis
has length 2 holding (real, imaginary); their gradients use the same layout,
so the gradient of a real loss L w.r.t. z is (dL/dRe z, dL/dIm z).
"""

from collections.abc import Sequence
from typing import Any

import numpy as np
import scipy.linalg

from ..errors import DomainError, NumericalError, ShapeError
from .tensor import VJP, Mode, Tensor, as_tensor, current_tape

HERMITIAN_TOL = 1e-8


def _apply(op: str, inputs: Sequence[Tensor], value: np.ndarray, vjp: VJP) -> Tensor:
    out = Tensor(value)
    tape = current_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        tape.record(op, tuple(inputs), out, vjp)
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError as err:
        raise ShapeError(f"{op}: cannot broadcast {a.shape} with {b.shape}") from err


# -- elementwise arithmetic ------------------------------------------------


def add(a: Any, b: Any) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "add")
    return _apply(
        "add",
        (a, b),
        a.data + b.data,
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def sub(a: Any, b: Any) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "sub")
    return _apply(
        "sub",
        (a, b),
        a.data - b.data,
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
    )


def mul(a: Any, b: Any) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "mul")
    return _apply(
        "mul",
        (a, b),
        a.data * b.data,
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def div(a: Any, b: Any) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "div")
    out = a.data / b.data
    return _apply(
        "div",
        (a, b),
        out,
        lambda g: (
            _unbroadcast(g / b.data, a.shape),
            _unbroadcast(-g * out / b.data, b.shape),
        ),
    )


def neg(x: Tensor) -> Tensor:
    return _apply("neg", (x,), -x.data, lambda g: (-g,))


def relu(x: Tensor) -> Tensor:
    return _apply("relu", (x,), np.maximum(x.data, 0.0), lambda g: (g * (x.data > 0),))


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)
    return _apply("tanh", (x,), out, lambda g: (g * (1.0 - out**2),))


def abs(x: Tensor) -> Tensor:  # noqa: A001
    # np.sign(0) == 0, so the gradient at the kink is 0.
    return _apply("abs", (x,), np.abs(x.data), lambda g: (g * np.sign(x.data),))


def sign(x: Tensor) -> Tensor:
    """Hard sign with sign(0) = +1. Not differentiable, never recorded."""
    return Tensor(np.where(x.data >= 0, 1.0, -1.0))


def log2(x: Tensor) -> Tensor:
    if np.any(x.data <= 0):
        raise DomainError("log2 of a non-positive value")
    return _apply("log2", (x,), np.log2(x.data), lambda g: (g / (x.data * np.log(2.0)),))


def sqrt(x: Tensor) -> Tensor:
    if np.any(x.data < 0):
        raise DomainError("sqrt of a negative value")
    out = np.sqrt(x.data)
    return _apply("sqrt", (x,), out, lambda g: (g / (2.0 * out),))


# -- reductions and shape ----------------------------------------------------


def sum(x: Tensor, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def vjp(g: np.ndarray) -> tuple[np.ndarray]:
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _apply("sum", (x,), out, vjp)


def mean(x: Tensor, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> Tensor:
    count = x.size if axis is None else int(np.prod([x.shape[a] for a in np.atleast_1d(axis)]))
    return sum(x, axis=axis, keepdims=keepdims) / float(count)


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    return _apply("reshape", (x,), x.data.reshape(shape), lambda g: (g.reshape(x.shape),))


def transpose(x: Tensor, axes: tuple[int, ...]) -> Tensor:
    inverse = tuple(np.argsort(axes))
    return _apply(
        "transpose", (x,), np.transpose(x.data, axes), lambda g: (np.transpose(g, inverse),)
    )


def getitem(x: Tensor, index: Any) -> Tensor:
    def vjp(g: np.ndarray) -> tuple[np.ndarray]:
        full = np.zeros_like(x.data)
        np.add.at(full, index, g)
        return (full,)

    return _apply("getitem", (x,), x.data[index], vjp)


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as err:
        raise ShapeError(f"concat: {err}") from err
    return _apply("concat", tensors, out, lambda g: tuple(np.split(g, splits, axis=axis)))


def stack(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = np.stack([t.data for t in tensors], axis=axis)
    except ValueError as err:
        raise ShapeError(f"stack: {err}") from err
    return _apply(
        "stack",
        tensors,
        out,
        lambda g: tuple(np.take(g, i, axis=axis) for i in range(len(tensors))),
    )


# -- layers ------------------------------------------------------------------


def affine(x: Tensor, W: Tensor, b: Tensor | None = None) -> Tensor:
    """x @ W.T + b with W of shape (out, in) and x of shape (batch, in) or (in,)."""
    if x.shape[-1] != W.shape[1]:
        raise ShapeError(f"affine: input width {x.shape[-1]} != weight fan-in {W.shape[1]}")
    out = x.data @ W.data.T
    inputs: tuple[Tensor, ...] = (x, W)
    if b is not None:
        if b.shape != (W.shape[0],):
            raise ShapeError(f"affine: bias shape {b.shape} != ({W.shape[0]},)")
        out = out + b.data
        inputs = (x, W, b)

    def vjp(g: np.ndarray) -> tuple[np.ndarray, ...]:
        g2 = g.reshape(-1, W.shape[0])
        x2 = x.data.reshape(-1, W.shape[1])
        grads = (g @ W.data, g2.T @ x2)
        return grads if b is None else (*grads, g2.sum(axis=0))

    return _apply("affine", inputs, out, vjp)


def dropout(
    x: Tensor, rate: float, mode: Mode, rng: np.random.Generator | None = None
) -> Tensor:
    """Inverted dropout: survivors are scaled by 1 / (1 - rate) in train mode."""
    if not 0.0 <= rate < 1.0:
        raise DomainError(f"dropout rate must be in [0, 1), got {rate}")
    if mode is Mode.EVAL or rate == 0.0:
        return x
    if rng is None:
        raise ValueError("dropout in train mode needs a random generator")
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return _apply("dropout", (x,), x.data * mask, lambda g: (g * mask,))


def batchnorm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    mode: Mode,
    momentum: float = 0.1,
    eps: float = 1e-5,
) -> Tensor:
    """Per-feature batch normalization over axis 0.

    In train mode the running statistics are updated in place (unbiased
    variance); eval mode normalizes with them and never samples.
    """
    if x.ndim != 2 or x.shape[1] != gamma.shape[0]:
        raise ShapeError(f"batchnorm: expected (batch, {gamma.shape[0]}), got {x.shape}")

    if mode is Mode.EVAL:
        inv_std = 1.0 / np.sqrt(running_var + eps)
        xhat = (x.data - running_mean) * inv_std
        return _apply(
            "batchnorm",
            (x, gamma, beta),
            gamma.data * xhat + beta.data,
            lambda g: (g * gamma.data * inv_std, (g * xhat).sum(axis=0), g.sum(axis=0)),
        )

    n = x.shape[0]
    if n < 2:
        raise ShapeError("batchnorm in train mode needs a batch of at least 2")
    mu = x.data.mean(axis=0)
    var = x.data.var(axis=0)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv_std
    running_mean *= 1.0 - momentum
    running_mean += momentum * mu
    running_var *= 1.0 - momentum
    running_var += momentum * var * n / (n - 1)

    def vjp(g: np.ndarray) -> tuple[np.ndarray, ...]:
        dxhat = g * gamma.data
        dx = (
            inv_std
            / n
            * (n * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0))
        )
        return dx, (g * xhat).sum(axis=0), g.sum(axis=0)

    return _apply("batchnorm", (x, gamma, beta), gamma.data * xhat + beta.data, vjp)


# -- complex pairs -------------------------------------------------------------


def to_complex(x: np.ndarray) -> np.ndarray:
    if x.shape[-1] != 2:
        raise ShapeError(f"complex pair arrays need a trailing axis of 2, got {x.shape}")
    return x[..., 0] + 1j * x[..., 1]


def to_pairs(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z)
    return np.stack([z.real, z.imag], axis=-1).astype(np.float64)


def complex_tensor(z: np.ndarray, requires_grad: bool = False, name: str | None = None) -> Tensor:
    return Tensor(to_pairs(z), requires_grad=requires_grad, name=name)


def cis(theta: Tensor) -> Tensor:
    """e^{j theta} as pairs."""
    c, s = np.cos(theta.data), np.sin(theta.data)
    return _apply(
        "cis",
        (theta,),
        np.stack([c, s], axis=-1),
        lambda g: (-s * g[..., 0] + c * g[..., 1],),
    )


def cabs2(z: Tensor) -> Tensor:
    """|z|**2, dropping the pair axis."""
    re, im = z.data[..., 0], z.data[..., 1]
    return _apply(
        "cabs2", (z,), re**2 + im**2, lambda g: (2.0 * z.data * g[..., None],)
    )


def cconj(z: Tensor) -> Tensor:
    flip = np.array([1.0, -1.0])
    return _apply("cconj", (z,), z.data * flip, lambda g: (g * flip,))


def creal_scale(z: Tensor, r: Tensor) -> Tensor:
    """Multiply complex ``z`` by real ``r`` (broadcast over the pair axis)."""
    return mul(z, reshape(r, (*r.shape, 1)))


def cmul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise complex product with broadcasting."""
    za, zb = to_complex(a.data), to_complex(b.data)
    shape_a, shape_b = a.shape[:-1], b.shape[:-1]

    def vjp(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        gz = to_complex(g)
        return (
            to_pairs(_unbroadcast(gz * np.conj(zb), shape_a)),
            to_pairs(_unbroadcast(gz * np.conj(za), shape_b)),
        )

    return _apply("cmul", (a, b), to_pairs(za * zb), vjp)


def cherm(A: Tensor) -> Tensor:
    """Conjugate transpose over the last two complex axes."""
    if A.ndim < 3:
        raise ShapeError(f"cherm needs a complex matrix, got shape {A.shape}")

    def herm(z: np.ndarray) -> np.ndarray:
        return np.conj(np.swapaxes(z, -1, -2))

    return _apply(
        "cherm",
        (A,),
        to_pairs(herm(to_complex(A.data))),
        lambda g: (to_pairs(herm(to_complex(g))),),
    )


def cmatmul(A: Tensor, B: Tensor) -> Tensor:
    """Batched complex matrix product with gradients g_A = g B^H, g_B = A^H g."""
    za, zb = to_complex(A.data), to_complex(B.data)
    if za.ndim < 2 or zb.ndim < 2 or za.shape[-1] != zb.shape[-2]:
        raise ShapeError(f"cmatmul: incompatible shapes {A.shape} and {B.shape}")

    def vjp(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        gz = to_complex(g)
        ga = gz @ np.conj(np.swapaxes(zb, -1, -2))
        gb = np.conj(np.swapaxes(za, -1, -2)) @ gz
        return to_pairs(_unbroadcast(ga, za.shape)), to_pairs(_unbroadcast(gb, zb.shape))

    return _apply("cmatmul", (A, B), to_pairs(za @ zb), vjp)


def csolve_hpd(A: Tensor, B: Tensor) -> Tensor:
    """X = A^{-1} B for Hermitian positive-definite A of shape (..., M, M).

    Solved per matrix by Cholesky. Backward: g_B = A^{-1} g_X and
    g_A = -g_B X^H.
    """
    za, zb = to_complex(A.data), to_complex(B.data)
    if za.shape[-1] != za.shape[-2] or zb.shape[:-1] != za.shape[:-1]:
        raise ShapeError(f"csolve_hpd: incompatible shapes {A.shape} and {B.shape}")
    herm_gap = np.abs(za - np.conj(np.swapaxes(za, -1, -2))).max(initial=0.0)
    if herm_gap > HERMITIAN_TOL * max(np.abs(za).max(initial=0.0), 1e-300):
        raise DomainError(f"csolve_hpd: matrix is not Hermitian (gap {herm_gap:.3e})")

    batch = za.shape[:-2]
    flat_a = za.reshape(-1, *za.shape[-2:])
    flat_b = zb.reshape(-1, *zb.shape[-2:])
    factors = []
    try:
        for mat in flat_a:
            factors.append(scipy.linalg.cho_factor(mat))
    except np.linalg.LinAlgError as err:
        raise NumericalError(f"csolve_hpd: matrix is not positive definite: {err}") from err
    X = np.stack([scipy.linalg.cho_solve(f, rhs) for f, rhs in zip(factors, flat_b, strict=True)])
    X = X.reshape(*batch, *zb.shape[-2:])

    def vjp(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        gz = to_complex(g).reshape(flat_b.shape)
        gb = np.stack([scipy.linalg.cho_solve(f, rhs) for f, rhs in zip(factors, gz, strict=True)])
        gb = gb.reshape(zb.shape)
        ga = -gb @ np.conj(np.swapaxes(X, -1, -2))
        return to_pairs(ga), to_pairs(gb)

    return _apply("csolve_hpd", (A, B), to_pairs(X), vjp)
