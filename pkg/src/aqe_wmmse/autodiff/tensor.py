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

"""Tensor values and the tape that records operations for reverse mode."""

import contextvars
import dataclasses
import enum
import logging
from collections.abc import Callable, Sequence
from typing import Any

import numpy as np

from ..errors import ShapeError, TapeError

logger = logging.getLogger(__name__)

VJP = Callable[[np.ndarray], Sequence[np.ndarray | None]]

_active_tape: contextvars.ContextVar["Tape | None"] = contextvars.ContextVar(
    "active_tape", default=None
)


class Mode(enum.Enum):
    """Switches dropout, batch-norm statistics and the quantizer's q()."""

    TRAIN = "train"
    EVAL = "eval"


class Tensor:
    """A float64 array with an optional gradient slot."""

    __slots__ = ("_node", "data", "grad", "name", "requires_grad")

    def __init__(
        self, data: Any, requires_grad: bool = False, name: str | None = None
    ) -> None:
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.name = name
        self._node: Node | None = None

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label}, requires_grad={self.requires_grad})"

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return self._node is None

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single value, got shape {self.shape}")
        return float(self.data.reshape(()))

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        """Back-propagate from this scalar through the tape that produced it."""
        if self._node is None:
            raise TapeError("tensor was not produced by a recorded operation")
        self._node.tape.backward(self)

    # Operator sugar; the implementations live in ops.
    def __add__(self, other: Any) -> "Tensor":
        from . import ops

        return ops.add(self, other)

    def __radd__(self, other: Any) -> "Tensor":
        from . import ops

        return ops.add(other, self)

    def __sub__(self, other: Any) -> "Tensor":
        from . import ops

        return ops.sub(self, other)

    def __rsub__(self, other: Any) -> "Tensor":
        from . import ops

        return ops.sub(other, self)

    def __mul__(self, other: Any) -> "Tensor":
        from . import ops

        return ops.mul(self, other)

    def __rmul__(self, other: Any) -> "Tensor":
        from . import ops

        return ops.mul(other, self)

    def __truediv__(self, other: Any) -> "Tensor":
        from . import ops

        return ops.div(self, other)

    def __rtruediv__(self, other: Any) -> "Tensor":
        from . import ops

        return ops.div(other, self)

    def __neg__(self) -> "Tensor":
        from . import ops

        return ops.neg(self)

    def __getitem__(self, index: Any) -> "Tensor":
        from . import ops

        return ops.getitem(self, index)


@dataclasses.dataclass(eq=False)
class Node:
    op: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    vjp: VJP
    tape: "Tape"


class Tape:
    """Ordered record of operations, active as a context manager.

    Operations are recorded only while a tape is active and at least one
    input requires a gradient. ``backward`` may run once per recording;
    call ``reset`` to record again.
    """

    def __init__(self) -> None:
        self.nodes: list[Node] = []
        self._spent = False
        self._token: contextvars.Token[Tape | None] | None = None

    def __enter__(self) -> "Tape":
        self._token = _active_tape.set(self)
        return self

    def __exit__(self, *exc: object) -> None:
        if self._token is not None:
            _active_tape.reset(self._token)
            self._token = None

    def __len__(self) -> int:
        return len(self.nodes)

    def record(self, op: str, inputs: tuple[Tensor, ...], output: Tensor, vjp: VJP) -> None:
        if self._spent:
            raise TapeError("tape already ran backward; call reset() before recording")
        node = Node(op, inputs, output, vjp, self)
        output.requires_grad = True
        output._node = node
        self.nodes.append(node)

    def reset(self) -> None:
        self.nodes = []
        self._spent = False

    def backward(self, loss: Tensor) -> None:
        """Accumulate d(loss)/d(leaf) into ``grad`` of every requires-grad leaf."""
        if self._spent:
            raise TapeError("backward already called on this tape; call reset() first")
        if not self.nodes:
            raise TapeError("backward called on an empty tape")
        if loss.size != 1:
            raise TapeError(f"backward needs a scalar loss, got shape {loss.shape}")
        if loss._node is None or loss._node.tape is not self:
            raise TapeError("loss was not recorded on this tape")
        self._spent = True

        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        for node in reversed(self.nodes):
            upstream = grads.pop(id(node.output), None)
            if upstream is None:
                continue
            for tensor, grad in zip(node.inputs, node.vjp(upstream), strict=True):
                if grad is None or not tensor.requires_grad:
                    continue
                if grad.shape != tensor.shape:
                    raise ShapeError(
                        f"{node.op}: gradient shape {grad.shape} != input shape {tensor.shape}"
                    )
                if tensor.is_leaf:
                    tensor.grad = grad.copy() if tensor.grad is None else tensor.grad + grad
                elif id(tensor) in grads:
                    grads[id(tensor)] = grads[id(tensor)] + grad
                else:
                    grads[id(tensor)] = grad
        logger.debug(f"Backward pass over {len(self.nodes)} recorded operations")


def current_tape() -> Tape | None:
    return _active_tape.get()


def as_tensor(value: Any) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)
