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

"""Parameter containers and the feed-forward layers used by the networks."""

from collections.abc import Iterator, Sequence

import numpy as np

from ..errors import FormatError, ShapeError
from . import ops
from .tensor import Mode, Tensor


class Module:
    """Tree of named parameters and buffers with a shared train/eval mode.

    Names are slash-separated paths such as ``encoder/affine0/weight``.
    """

    def __init__(self) -> None:
        self.mode = Mode.TRAIN
        self._params: dict[str, Tensor] = {}
        self._buffers: dict[str, np.ndarray] = {}
        self._children: dict[str, Module] = {}

    def add_param(self, name: str, value: np.ndarray) -> Tensor:
        tensor = Tensor(value, requires_grad=True, name=name)
        self._params[name] = tensor
        return tensor

    def add_buffer(self, name: str, value: np.ndarray) -> np.ndarray:
        self._buffers[name] = np.array(value, dtype=np.float64)
        return self._buffers[name]

    def add_child(self, name: str, module: "Module") -> "Module":
        self._children[name] = module
        return module

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for name, tensor in self._params.items():
            yield prefix + name, tensor
        for child_name, child in self._children.items():
            yield from child.named_parameters(f"{prefix}{child_name}/")

    def named_buffers(self, prefix: str = "") -> Iterator[tuple[str, np.ndarray]]:
        for name, buffer in self._buffers.items():
            yield prefix + name, buffer
        for child_name, child in self._children.items():
            yield from child.named_buffers(f"{prefix}{child_name}/")

    def parameters(self) -> dict[str, Tensor]:
        return dict(self.named_parameters())

    def set_mode(self, mode: Mode) -> "Module":
        self.mode = mode
        for child in self._children.values():
            child.set_mode(mode)
        return self

    def train(self) -> "Module":
        return self.set_mode(Mode.TRAIN)

    def eval(self) -> "Module":
        return self.set_mode(Mode.EVAL)

    def zero_grad(self) -> None:
        for _, tensor in self.named_parameters():
            tensor.zero_grad()

    def state_dict(self) -> dict[str, np.ndarray]:
        """Copies of every parameter and buffer, keyed by name path."""
        state = {name: t.data.copy() for name, t in self.named_parameters()}
        state.update({name: b.copy() for name, b in self.named_buffers()})
        return state

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        targets: dict[str, np.ndarray] = {n: t.data for n, t in self.named_parameters()}
        targets.update(dict(self.named_buffers()))
        missing = sorted(set(targets) - set(state))
        unexpected = sorted(set(state) - set(targets))
        if missing or unexpected:
            raise FormatError(f"state mismatch: missing {missing}, unexpected {unexpected}")
        for name, target in targets.items():
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != target.shape:
                raise FormatError(f"{name}: stored shape {value.shape} != {target.shape}")
            # in place, so Tensor objects held by optimizers stay valid
            target[...] = value

    def __call__(self, x: Tensor, rng: np.random.Generator | None = None) -> Tensor:
        raise NotImplementedError

    def parameter_count(self) -> int:
        return sum(t.size for _, t in self.named_parameters())


class Affine(Module):
    def __init__(self, fan_in: int, fan_out: int, rng: np.random.Generator) -> None:
        super().__init__()
        bound = np.sqrt(1.0 / fan_in)
        self.weight = self.add_param("weight", rng.uniform(-bound, bound, (fan_out, fan_in)))
        self.bias = self.add_param("bias", rng.uniform(-bound, bound, fan_out))

    def __call__(self, x: Tensor, rng: np.random.Generator | None = None) -> Tensor:
        return ops.affine(x, self.weight, self.bias)


class BatchNorm(Module):
    def __init__(self, features: int, momentum: float = 0.1, eps: float = 1e-5) -> None:
        super().__init__()
        self.momentum = momentum
        self.eps = eps
        self.gamma = self.add_param("gamma", np.ones(features))
        self.beta = self.add_param("beta", np.zeros(features))
        self.running_mean = self.add_buffer("running_mean", np.zeros(features))
        self.running_var = self.add_buffer("running_var", np.ones(features))

    def __call__(self, x: Tensor, rng: np.random.Generator | None = None) -> Tensor:
        return ops.batchnorm(
            x,
            self.gamma,
            self.beta,
            self.running_mean,
            self.running_var,
            self.mode,
            self.momentum,
            self.eps,
        )


class Dropout(Module):
    def __init__(self, rate: float) -> None:
        super().__init__()
        self.rate = rate

    def __call__(self, x: Tensor, rng: np.random.Generator | None = None) -> Tensor:
        return ops.dropout(x, self.rate, self.mode, rng)


class ReLU(Module):
    def __call__(self, x: Tensor, rng: np.random.Generator | None = None) -> Tensor:
        return ops.relu(x)


class Abs(Module):
    def __call__(self, x: Tensor, rng: np.random.Generator | None = None) -> Tensor:
        return ops.abs(x)


class Sequential(Module):
    """Layers applied in order; children are named ``<kind><index>``."""

    def __init__(self, layers: Sequence[tuple[str, Module]]) -> None:
        super().__init__()
        self.layers: list[Module] = []
        for name, layer in layers:
            if name in self._children:
                raise ShapeError(f"duplicate layer name {name!r}")
            self.layers.append(self.add_child(name, layer))

    def __call__(self, x: Tensor, rng: np.random.Generator | None = None) -> Tensor:
        for layer in self.layers:
            x = layer(x, rng)
        return x


def mlp(
    widths: Sequence[int],
    rng: np.random.Generator,
    activation: type[Module] | None = ReLU,
    batchnorm: bool = False,
    dropout: float = 0.0,
) -> Sequential:
    """Affine stack ``widths[0] -> ... -> widths[-1]``.

    Hidden layers get ``activation``, then batch norm, then dropout, each when
    enabled; the last layer is a bare affine map.
    """
    if len(widths) < 2:
        raise ShapeError("an MLP needs at least an input and an output width")
    layers: list[tuple[str, Module]] = []
    last = len(widths) - 2
    for i, (fan_in, fan_out) in enumerate(zip(widths[:-1], widths[1:], strict=True)):
        layers.append((f"affine{i}", Affine(fan_in, fan_out, rng)))
        if i == last:
            break
        if activation is not None:
            layers.append((f"act{i}", activation()))
        if batchnorm:
            layers.append((f"bn{i}", BatchNorm(fan_out)))
        if dropout > 0:
            layers.append((f"dropout{i}", Dropout(dropout)))
    return Sequential(layers)
