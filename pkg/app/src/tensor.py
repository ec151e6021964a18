"""
Tensor and Tape

Dense float64 tensors with reverse-mode differentiation. Operations whose
operands carry a grad-node are recorded on the active Tape in execution order;
backward() replays the tape in reverse and returns the gradient of a scalar
loss with respect to every leaf parameter reachable from it.
"""

from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np


class ShapeError(ValueError):
    """Raised when operands violate an operation's shape contract."""


BackwardRule = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


@dataclass
class TapeEntry:
    """One recorded operation: its output, operands and backward rule."""
    op: str
    output: "Tensor"
    inputs: Tuple["Tensor", ...]
    backward: BackwardRule


class Tape:
    """Ordered record of differentiable operations."""

    def __init__(self):
        self.entries: List[TapeEntry] = []

    def record(self, op: str, output: "Tensor", inputs: Tuple["Tensor", ...], backward: BackwardRule) -> None:
        output._node = len(self.entries)
        self.entries.append(TapeEntry(op=op, output=output, inputs=inputs, backward=backward))

    def clear(self) -> None:
        """Drop every entry and detach the outputs that referenced them."""
        for entry in self.entries:
            entry.output._node = None
        self.entries = []

    def __len__(self) -> int:
        return len(self.entries)


_TAPE = Tape()
_GRAD_ENABLED = [True]


def get_tape() -> Tape:
    """Return the process-wide tape."""
    return _TAPE


def is_grad_enabled() -> bool:
    return _GRAD_ENABLED[-1]


@contextmanager
def no_grad() -> Iterator[None]:
    """Run the enclosed block without recording anything on the tape."""
    _GRAD_ENABLED.append(False)
    try:
        yield
    finally:
        _GRAD_ENABLED.pop()


class Tensor:
    """
    Dense row-major float64 array participating in reverse-mode differentiation.

    A tensor carries a grad-node when it is a trainable leaf
    (``requires_grad=True``) or the recorded output of an operation. Tensors
    without a grad-node are constants and never receive a gradient.
    """

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        self.data = np.ascontiguousarray(np.asarray(data, dtype=np.float64))
        self.requires_grad = requires_grad
        self.name = name
        self._node: Optional[int] = None

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def tracked(self) -> bool:
        """True when this tensor carries a grad-node."""
        return self.requires_grad or self._node is not None

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item: tensor of shape {self.shape} is not a scalar")
        return float(self.data.reshape(-1)[0])

    def __add__(self, other):
        from app.src import ops
        return ops.add(self, other)

    def __radd__(self, other):
        from app.src import ops
        return ops.add(other, self)

    def __sub__(self, other):
        from app.src import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from app.src import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from app.src import ops
        return ops.mul(self, other)

    def __rmul__(self, other):
        from app.src import ops
        return ops.mul(other, self)

    def __neg__(self):
        from app.src import ops
        return ops.mul(self, -1.0)

    def __matmul__(self, other):
        from app.src import ops
        return ops.matmul(self, other)

    def __repr__(self) -> str:
        label = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, tracked={self.tracked}{label})"


def backward(loss: Tensor, tape: Optional[Tape] = None) -> Dict[Tensor, np.ndarray]:
    """
    Differentiate a scalar loss with respect to every reachable leaf.

    Args:
        loss: Scalar tensor produced on the current tape.
        tape: Tape to replay. Defaults to the process-wide tape.

    Returns:
        Mapping from each trainable leaf tensor reachable from ``loss`` to its
        gradient array. The tape is cleared afterwards.

    Raises:
        ShapeError: If ``loss`` is not a scalar.
    """
    tape = tape if tape is not None else get_tape()
    if loss.data.size != 1:
        tape.clear()
        raise ShapeError(f"backward: loss must be a scalar, got shape {loss.shape}")

    grads: Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    leaves: Dict[int, Tensor] = {}
    if loss.requires_grad and loss._node is None:
        leaves[id(loss)] = loss

    for entry in reversed(tape.entries):
        upstream = grads.pop(id(entry.output), None)
        if upstream is None:
            continue
        input_grads = entry.backward(upstream)
        for operand, grad in zip(entry.inputs, input_grads):
            if grad is None or not operand.tracked:
                continue
            key = id(operand)
            if key in grads:
                grads[key] = grads[key] + grad
            else:
                grads[key] = grad
            if operand._node is None:
                leaves[key] = operand

    tape.clear()
    return {leaf: grads[key] for key, leaf in leaves.items() if key in grads}
