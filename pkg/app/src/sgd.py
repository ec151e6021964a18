"""SGD with momentum, additive weight decay and a step learning-rate schedule."""

from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import numpy as np

from app.src.tensor import Tensor


@dataclass
class StepSchedule:
    """Learning rate multiplied by ``factor`` at each epoch listed in ``drop_epochs``."""
    initial_lr: float
    drop_epochs: Sequence[int] = ()
    factor: float = 0.1

    def lr_at(self, epoch: int) -> float:
        drops = sum(1 for d in self.drop_epochs if epoch >= d)
        return self.initial_lr * self.factor ** drops


@dataclass
class SgdState:
    """
    Optimizer state for a set of named parameters.

    Update rule per parameter p with gradient g:
        v <- momentum * v + g + weight_decay * p
        p <- p - lr * v
    """
    params: Dict[str, Tensor]
    lr: float
    momentum: float = 0.9
    weight_decay: float = 5e-4
    velocity: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        for name, param in self.params.items():
            if name not in self.velocity:
                self.velocity[name] = np.zeros_like(param.data)
            elif self.velocity[name].shape != param.shape:
                raise ValueError(
                    f"SgdState: velocity for {name} has shape {self.velocity[name].shape}, "
                    f"parameter has {param.shape}"
                )


def sgd_step(state: SgdState, grads: Dict[Tensor, np.ndarray]) -> Dict[str, Tensor]:
    """
    Apply one momentum step in place.

    Args:
        state: Optimizer state; parameters are updated in place.
        grads: Gradient map as returned by ``backward``.

    Returns:
        The updated parameter mapping.

    Raises:
        ValueError: If any registered parameter has no gradient.
    """
    missing: List[str] = [name for name, p in state.params.items() if p not in grads]
    if missing:
        raise ValueError(f"sgd_step: missing gradient for parameters {missing}")
    for name, param in state.params.items():
        velocity = state.velocity[name]
        velocity *= state.momentum
        velocity += grads[param]
        if state.weight_decay:
            velocity += state.weight_decay * param.data
        param.data -= state.lr * velocity
    return state.params
