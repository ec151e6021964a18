"""Layer objects used to assemble the model zoo."""

import math
from typing import Dict, List, Optional

import numpy as np

from app.src import ops
from app.src.tensor import Tensor


def kaiming_uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    """He-uniform initialization for ReLU networks: U(-b, b) with b = sqrt(6 / fan_in)."""
    bound = math.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Layer:
    """Base layer: callable on a tensor, exposes named parameters and buffers."""

    def __init__(self, name: str):
        self.name = name

    def __call__(self, x: Tensor, training: bool = False) -> Tensor:
        raise NotImplementedError

    def parameters(self) -> Dict[str, Tensor]:
        return {}

    def buffers(self) -> Dict[str, np.ndarray]:
        return {}


class Conv2d(Layer):
    def __init__(self, name: str, in_channels: int, out_channels: int, kernel_size: int, rng: np.random.Generator):
        super().__init__(name)
        fan_in = in_channels * kernel_size * kernel_size
        self.weight = Tensor(
            kaiming_uniform(rng, (out_channels, in_channels, kernel_size, kernel_size), fan_in),
            requires_grad=True,
            name=f"{name}.weight",
        )
        self.bias = Tensor(np.zeros(out_channels), requires_grad=True, name=f"{name}.bias")

    def __call__(self, x: Tensor, training: bool = False) -> Tensor:
        return ops.conv2d(x, self.weight, self.bias)

    def parameters(self) -> Dict[str, Tensor]:
        return {self.weight.name: self.weight, self.bias.name: self.bias}


class BatchNorm2d(Layer):
    def __init__(self, name: str, channels: int, momentum: float = 0.1, eps: float = 1e-5):
        super().__init__(name)
        self.gamma = Tensor(np.ones(channels), requires_grad=True, name=f"{name}.gamma")
        self.beta = Tensor(np.zeros(channels), requires_grad=True, name=f"{name}.beta")
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)
        self.momentum = momentum
        self.eps = eps

    def __call__(self, x: Tensor, training: bool = False) -> Tensor:
        return ops.batch_norm(
            x, self.gamma, self.beta, self.running_mean, self.running_var,
            training=training, momentum=self.momentum, eps=self.eps,
        )

    def parameters(self) -> Dict[str, Tensor]:
        return {self.gamma.name: self.gamma, self.beta.name: self.beta}

    def buffers(self) -> Dict[str, np.ndarray]:
        return {
            f"{self.name}.running_mean": self.running_mean,
            f"{self.name}.running_var": self.running_var,
        }


class ReLU(Layer):
    def __call__(self, x: Tensor, training: bool = False) -> Tensor:
        return ops.relu(x)


class MaxPool2x2(Layer):
    def __call__(self, x: Tensor, training: bool = False) -> Tensor:
        return ops.max_pool2x2(x)


class GlobalAvgPool(Layer):
    def __call__(self, x: Tensor, training: bool = False) -> Tensor:
        return ops.global_avg_pool(x)


class Linear(Layer):
    def __init__(self, name: str, in_features: int, out_features: int, rng: np.random.Generator):
        super().__init__(name)
        self.weight = Tensor(
            kaiming_uniform(rng, (out_features, in_features), in_features),
            requires_grad=True,
            name=f"{name}.weight",
        )
        self.bias = Tensor(np.zeros(out_features), requires_grad=True, name=f"{name}.bias")

    def __call__(self, x: Tensor, training: bool = False) -> Tensor:
        return ops.linear(x, self.weight, self.bias)

    def parameters(self) -> Dict[str, Tensor]:
        return {self.weight.name: self.weight, self.bias.name: self.bias}


class ResidualBlock(Layer):
    """
    Post-activation basic block: relu(bn(conv(relu(bn(conv(x))))) + shortcut(x)).

    The shortcut is the identity when channel counts match and a 1x1
    conv + batch norm projection otherwise.
    """

    def __init__(self, name: str, in_channels: int, out_channels: int, rng: np.random.Generator):
        super().__init__(name)
        self.conv1 = Conv2d(f"{name}.conv1", in_channels, out_channels, 3, rng)
        self.bn1 = BatchNorm2d(f"{name}.bn1", out_channels)
        self.conv2 = Conv2d(f"{name}.conv2", out_channels, out_channels, 3, rng)
        self.bn2 = BatchNorm2d(f"{name}.bn2", out_channels)
        self.projection: Optional[List[Layer]] = None
        if in_channels != out_channels:
            self.projection = [
                Conv2d(f"{name}.proj", in_channels, out_channels, 1, rng),
                BatchNorm2d(f"{name}.proj_bn", out_channels),
            ]

    def _sublayers(self) -> List[Layer]:
        return [self.conv1, self.bn1, self.conv2, self.bn2] + (self.projection or [])

    def __call__(self, x: Tensor, training: bool = False) -> Tensor:
        out = ops.relu(self.bn1(self.conv1(x, training), training))
        out = self.bn2(self.conv2(out, training), training)
        shortcut = x
        if self.projection is not None:
            conv, bn = self.projection
            shortcut = bn(conv(x, training), training)
        return ops.relu(ops.add(out, shortcut))

    def parameters(self) -> Dict[str, Tensor]:
        params: Dict[str, Tensor] = {}
        for layer in self._sublayers():
            params.update(layer.parameters())
        return params

    def buffers(self) -> Dict[str, np.ndarray]:
        buffers: Dict[str, np.ndarray] = {}
        for layer in self._sublayers():
            buffers.update(layer.buffers())
        return buffers
