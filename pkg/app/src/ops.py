"""
Differentiable operations over Tensor.

Every op computes its forward result with numpy and, when any operand carries
a grad-node, records a backward rule on the active tape. Reductions run in a
fixed order so repeated runs are bitwise identical.
"""

from typing import Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from app.src.tensor import ShapeError, Tensor, get_tape, is_grad_enabled

Operand = Union[Tensor, np.ndarray, float, int]


def as_tensor(value: Operand) -> Tensor:
    """Wrap arrays and scalars as constant tensors; pass tensors through."""
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def _record(op: str, out_data: np.ndarray, inputs: Tuple[Tensor, ...], rule) -> Tensor:
    out = Tensor(out_data)
    if is_grad_enabled() and any(t.tracked for t in inputs):
        get_tape().record(op, out, inputs, rule)
    return out


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to an operand's shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _check_broadcast(op: str, a: Tensor, b: Tensor) -> Tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None


# Elementwise arithmetic

def add(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("add", a, b)

    def rule(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)
    return _record("add", a.data + b.data, (a, b), rule)


def sub(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("sub", a, b)

    def rule(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)
    return _record("sub", a.data - b.data, (a, b), rule)


def mul(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("mul", a, b)

    def rule(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)
    return _record("mul", a.data * b.data, (a, b), rule)


def exp(x: Tensor) -> Tensor:
    out = np.exp(x.data)

    def rule(g):
        return (g * out,)
    return _record("exp", out, (x,), rule)


def relu(x: Tensor) -> Tensor:
    positive = x.data > 0

    def rule(g):
        return (g * positive,)
    return _record("relu", np.where(positive, x.data, 0.0), (x,), rule)


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)

    def rule(g):
        return (g * (1.0 - out * out),)
    return _record("tanh", out, (x,), rule)


def sigmoid(x: Tensor) -> Tensor:
    out = 0.5 * (np.tanh(0.5 * x.data) + 1.0)

    def rule(g):
        return (g * out * (1.0 - out),)
    return _record("sigmoid", out, (x,), rule)


# Shape manipulation

def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    original = x.shape
    try:
        out = x.data.reshape(tuple(shape))
    except ValueError:
        raise ShapeError(f"reshape: cannot reshape {original} into {tuple(shape)}") from None

    def rule(g):
        return (g.reshape(original),)
    return _record("reshape", out, (x,), rule)


def flatten(x: Tensor) -> Tensor:
    """Flatten every axis after the first, row-major."""
    return reshape(x, (x.shape[0], -1))


def take_rows(x: Tensor, index: np.ndarray) -> Tensor:
    """Gather rows along axis 0; repeated indices accumulate gradient."""
    index = np.asarray(index, dtype=np.int64)
    if index.size and (index.min() < 0 or index.max() >= x.shape[0]):
        raise ShapeError(f"take_rows: index out of range for {x.shape[0]} rows")

    def rule(g):
        full = np.zeros_like(x.data)
        np.add.at(full, index, g)
        return (full,)
    return _record("take_rows", x.data[index], (x,), rule)


# Reductions

def sum(x: Tensor, axis: Optional[Union[int, Tuple[int, ...]]] = None, keepdims: bool = False) -> Tensor:
    out = np.sum(x.data, axis=axis, keepdims=keepdims)

    def rule(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)
    return _record("sum", np.asarray(out), (x,), rule)


def mean(x: Tensor, axis: Optional[Union[int, Tuple[int, ...]]] = None, keepdims: bool = False) -> Tensor:
    if axis is None:
        count = x.size
    else:
        axes = (axis,) if isinstance(axis, int) else axis
        count = int(np.prod([x.shape[a] for a in axes]))
    if count == 0:
        raise ShapeError(f"mean: empty reduction over shape {x.shape}")
    return mul(sum(x, axis=axis, keepdims=keepdims), 1.0 / count)


def l2_norm(x: Tensor, axis: Optional[int] = None) -> Tensor:
    """Euclidean norm over ``axis`` (all entries when None); zero rows get zero gradient."""
    norm = np.sqrt(np.sum(x.data * x.data, axis=axis, keepdims=True))

    def rule(g):
        g = g if axis is None else np.expand_dims(g, axis)
        safe = np.where(norm > 0, norm, 1.0)
        return (np.where(norm > 0, x.data / safe, 0.0) * g,)
    out = norm.reshape(()) if axis is None else np.squeeze(norm, axis=axis)
    return _record("l2_norm", out, (x,), rule)


# Linear algebra

def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")

    def rule(g):
        return g @ b.data.T, a.data.T @ g
    return _record("matmul", a.data @ b.data, (a, b), rule)


def linear(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """Affine map ``x @ weight.T + bias`` for x of shape (N, in)."""
    if x.ndim != 2 or weight.ndim != 2 or x.shape[1] != weight.shape[1]:
        raise ShapeError(f"linear: input {x.shape} does not match weight {weight.shape}")
    out = x.data @ weight.data.T
    if bias is not None:
        out = out + bias.data
    inputs = (x, weight) if bias is None else (x, weight, bias)

    def rule(g):
        grads = [g @ weight.data, g.T @ x.data]
        if bias is not None:
            grads.append(g.sum(axis=0))
        return grads
    return _record("linear", out, inputs, rule)


def pairwise_sqdist(x: Tensor, y: Tensor) -> Tensor:
    """Matrix of squared Euclidean distances between rows of x (m, d) and y (n, d)."""
    if x.ndim != 2 or y.ndim != 2 or x.shape[1] != y.shape[1]:
        raise ShapeError(f"pairwise_sqdist: incompatible shapes {x.shape} and {y.shape}")
    xx = np.sum(x.data * x.data, axis=1)
    yy = np.sum(y.data * y.data, axis=1)
    out = xx[:, None] + yy[None, :] - 2.0 * (x.data @ y.data.T)

    def rule(g):
        gx = 2.0 * (g.sum(axis=1)[:, None] * x.data - g @ y.data)
        gy = 2.0 * (g.sum(axis=0)[:, None] * y.data - g.T @ x.data)
        return gx, gy
    return _record("pairwise_sqdist", out, (x, y), rule)


def sort(x: Tensor, axis: int = 0, key: Optional[np.ndarray] = None) -> Tensor:
    """
    Sort along ``axis`` by ``key`` (the values themselves when None).

    The permutation is treated as a constant during backward, so gradients
    flow back to the positions the values came from.
    """
    key = x.data if key is None else np.asarray(key)
    if key.shape != x.shape:
        raise ShapeError(f"sort: key shape {key.shape} does not match {x.shape}")
    order = np.argsort(key, axis=axis, kind="stable")

    def rule(g):
        full = np.zeros_like(x.data)
        np.put_along_axis(full, order, g, axis=axis)
        return (full,)
    return _record("sort", np.take_along_axis(x.data, order, axis=axis), (x,), rule)


# Convolutional building blocks

def conv2d(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None, padding: Optional[int] = None) -> Tensor:
    """
    2-D convolution with stride 1 and zero padding.

    Args:
        x: Input of shape (N, C, H, W).
        weight: Kernels of shape (O, C, kh, kw).
        bias: Optional per-output-channel bias of shape (O,).
        padding: Zero padding on each side; defaults to kh // 2 ("same").
    """
    if x.ndim != 4 or weight.ndim != 4 or x.shape[1] != weight.shape[1]:
        raise ShapeError(f"conv2d: input {x.shape} does not match weight {weight.shape}")
    n, c, h, w = x.shape
    o, _, kh, kw = weight.shape
    pad = kh // 2 if padding is None else padding
    out_h, out_w = h + 2 * pad - kh + 1, w + 2 * pad - kw + 1
    if out_h <= 0 or out_w <= 0:
        raise ShapeError(f"conv2d: kernel {weight.shape} too large for input {x.shape}")

    padded = np.pad(x.data, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    windows = sliding_window_view(padded, (kh, kw), axis=(2, 3))
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(n * out_h * out_w, c * kh * kw)
    kernel = weight.data.reshape(o, -1)
    out = cols @ kernel.T
    if bias is not None:
        out = out + bias.data
    out = np.ascontiguousarray(out.reshape(n, out_h, out_w, o).transpose(0, 3, 1, 2))
    inputs = (x, weight) if bias is None else (x, weight, bias)

    def rule(g):
        g_mat = g.transpose(0, 2, 3, 1).reshape(-1, o)
        grad_w = (g_mat.T @ cols).reshape(weight.shape)
        grad_cols = (g_mat @ kernel).reshape(n, out_h, out_w, c, kh, kw)
        grad_padded = np.zeros_like(padded)
        for i in range(kh):
            for j in range(kw):
                grad_padded[:, :, i:i + out_h, j:j + out_w] += grad_cols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
        grad_x = grad_padded[:, :, pad:pad + h, pad:pad + w]
        grads = [grad_x, grad_w]
        if bias is not None:
            grads.append(g_mat.sum(axis=0))
        return grads
    return _record("conv2d", out, inputs, rule)


def batch_norm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    training: bool,
    momentum: float = 0.1,
    eps: float = 1e-5,
) -> Tensor:
    """
    Per-channel batch normalization over (N, C, H, W) or (N, C).

    Training mode normalizes with batch statistics and updates the running
    buffers in place (running_var uses the unbiased batch variance). Eval mode
    is the fixed affine map given by the running buffers.
    """
    if x.ndim not in (2, 4) or gamma.shape != (x.shape[1],) or beta.shape != (x.shape[1],):
        raise ShapeError(f"batch_norm: input {x.shape} does not match scale {gamma.shape} / shift {beta.shape}")
    axes = (0,) if x.ndim == 2 else (0, 2, 3)
    view = (1, -1) if x.ndim == 2 else (1, -1, 1, 1)
    g_view, b_view = gamma.data.reshape(view), beta.data.reshape(view)

    if training:
        count = x.size // x.shape[1]
        if count < 2:
            raise ShapeError(f"batch_norm: need at least 2 values per channel in training, got {x.shape}")
        mu = x.data.mean(axis=axes, keepdims=True)
        centered = x.data - mu
        var = (centered * centered).mean(axis=axes, keepdims=True)
        inv_std = 1.0 / np.sqrt(var + eps)
        x_hat = centered * inv_std
        running_mean *= 1.0 - momentum
        running_mean += momentum * mu.reshape(-1)
        running_var *= 1.0 - momentum
        running_var += momentum * var.reshape(-1) * count / (count - 1)

        def rule(g):
            grad_hat = g * g_view
            sum_hat = grad_hat.sum(axis=axes, keepdims=True)
            sum_hat_x = (grad_hat * x_hat).sum(axis=axes, keepdims=True)
            grad_x = inv_std * (grad_hat - sum_hat / count - x_hat * sum_hat_x / count)
            return grad_x, (g * x_hat).sum(axis=axes), g.sum(axis=axes)
    else:
        inv_std = 1.0 / np.sqrt(running_var.reshape(view) + eps)
        x_hat = (x.data - running_mean.reshape(view)) * inv_std

        def rule(g):
            return g * g_view * inv_std, (g * x_hat).sum(axis=axes), g.sum(axis=axes)

    return _record("batch_norm", x_hat * g_view + b_view, (x, gamma, beta), rule)


def max_pool2x2(x: Tensor) -> Tensor:
    """2x2 max-pool with stride 2; ties resolve to the first window position."""
    if x.ndim != 4 or x.shape[2] % 2 or x.shape[3] % 2:
        raise ShapeError(f"max_pool2x2: need (N, C, H, W) with even H and W, got {x.shape}")
    n, c, h, w = x.shape
    windows = x.data.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h // 2, w // 2, 4)
    winner = np.argmax(windows, axis=-1)[..., None]
    out = np.take_along_axis(windows, winner, axis=-1)[..., 0]

    def rule(g):
        grad_windows = np.zeros_like(windows)
        np.put_along_axis(grad_windows, winner, g[..., None], axis=-1)
        grad = grad_windows.reshape(n, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h, w)
        return (grad,)
    return _record("max_pool2x2", out, (x,), rule)


def global_avg_pool(x: Tensor) -> Tensor:
    """Mean over the spatial axes of (N, C, H, W) -> (N, C)."""
    if x.ndim != 4:
        raise ShapeError(f"global_avg_pool: need (N, C, H, W), got {x.shape}")
    return mean(x, axis=(2, 3))


# Losses

def softmax_cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean softmax cross-entropy of (N, K) logits against integer labels."""
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],) or logits.shape[0] == 0:
        raise ShapeError(f"softmax_cross_entropy: logits {logits.shape} do not match labels {labels.shape}")
    if labels.min() < 0 or labels.max() >= logits.shape[1]:
        raise ShapeError(f"softmax_cross_entropy: labels outside [0, {logits.shape[1]})")
    n = logits.shape[0]
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    exps = np.exp(shifted)
    totals = exps.sum(axis=1, keepdims=True)
    log_probs = shifted - np.log(totals)
    rows = np.arange(n)
    loss = -log_probs[rows, labels].sum() / n

    def rule(g):
        grad = exps / totals
        grad[rows, labels] -= 1.0
        return (grad * (g / n),)
    return _record("softmax_cross_entropy", np.asarray(loss), (logits,), rule)
