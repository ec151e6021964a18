"""Central finite-difference checks for the tape's analytic gradients."""

from typing import Callable, Dict, Sequence

import numpy as np

from app.src.tensor import Tensor, backward, no_grad


def numerical_gradient(fn: Callable[[], Tensor], tensor: Tensor, eps: float = 1e-5) -> np.ndarray:
    """Central differences of the scalar ``fn()`` with respect to each entry of ``tensor``."""
    grad = np.zeros_like(tensor.data)
    flat = tensor.data.reshape(-1)
    grad_flat = grad.reshape(-1)
    with no_grad():
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + eps
            upper = fn().item()
            flat[i] = original - eps
            lower = fn().item()
            flat[i] = original
            grad_flat[i] = (upper - lower) / (2.0 * eps)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-5) -> float:
    """Max over entries of |a - n| / max(|a|, |n|, floor)."""
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / scale)) if analytic.size else 0.0


def check_gradients(fn: Callable[[], Tensor], tensors: Sequence[Tensor], eps: float = 1e-5) -> Dict[str, float]:
    """
    Compare backward() against central finite differences.

    Args:
        fn: Zero-argument callable building a fresh scalar loss from ``tensors``.
        tensors: Leaf tensors with ``requires_grad=True``.
        eps: Finite-difference step.

    Returns:
        Maximum relative error per tensor, keyed by tensor name (or position).
    """
    grads = backward(fn())
    errors: Dict[str, float] = {}
    for position, tensor in enumerate(tensors):
        analytic = grads.get(tensor, np.zeros_like(tensor.data))
        numeric = numerical_gradient(fn, tensor, eps)
        errors[tensor.name or str(position)] = relative_error(analytic, numeric)
    return errors
