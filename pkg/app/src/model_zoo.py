"""
Model Zoo

Desk-scale convolutional classifiers that expose three tap levels, s1, s2 and
s3, placed after each of three stages. Two families are available:

- plain: three stages of two conv-BN-ReLU layers (32/64/128 x width channels),
  each stage closed by a 2x2 max-pool whose output is the tap
- residual: a conv-BN-ReLU stem followed by three post-activation residual
  blocks, each closed by a 2x2 max-pool whose output is the tap

Both end with global average pooling and a fully connected head.
"""

from contextlib import contextmanager
from dataclasses import dataclass
from typing import Dict, Iterator, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, field_validator

from app.src import ops
from app.src.checkpoint_repository import RUNNING_STAT_PREFIX
from app.src.layers import (
    BatchNorm2d,
    Conv2d,
    GlobalAvgPool,
    Layer,
    Linear,
    MaxPool2x2,
    ReLU,
    ResidualBlock,
)
from app.src.tensor import Tensor, no_grad

TAP_LEVELS: Tuple[str, str, str] = ("s1", "s2", "s3")
STAGE_CHANNELS: Tuple[int, int, int] = (32, 64, 128)


class ModelConfig(BaseModel):
    """Architecture settings for a tapped classifier."""

    family: Literal["plain", "residual"] = Field(default="plain", description="plain stacked conv or residual blocks")
    width: int = Field(default=1, ge=1, description="Channel multiplier applied to 32/64/128")
    num_classes: int = Field(default=10, ge=2, description="Number of output classes K")
    input_shape: Tuple[int, int, int] = Field(default=(32, 32, 3), description="Input images as (H, W, C)")

    @field_validator("input_shape")
    @classmethod
    def validate_input_shape(cls, v: Tuple[int, int, int]) -> Tuple[int, int, int]:
        """Three 2x2 pools need H and W divisible by 8."""
        h, w, c = v
        if h % 8 or w % 8 or h <= 0 or w <= 0 or c <= 0:
            raise ValueError(f"input_shape {v}: H and W must be positive multiples of 8")
        return v


@dataclass
class FeatureSet:
    """Flattened representations for one (level, population) pair, one row per sample."""
    matrix: np.ndarray
    level: str
    population: str = ""

    def __len__(self) -> int:
        return self.matrix.shape[0]


def images_to_tensor(images: np.ndarray) -> Tensor:
    """Convert a batch of (N, H, W, C) images to an (N, C, H, W) constant tensor."""
    images = np.asarray(images, dtype=np.float64)
    if images.ndim == 3:
        images = images[None]
    return Tensor(np.ascontiguousarray(images.transpose(0, 3, 1, 2)))


class TappedModel:
    """
    Classifier over an ordered layer list with three tap indices into it.

    ``channel_masks`` maps a tap level to a per-channel 0/1 vector multiplied
    into that tap's output; it is how neuron pruning silences channels.
    """

    def __init__(
        self,
        layers: List[Layer],
        tap_indices: Tuple[int, int, int],
        config: ModelConfig,
    ):
        if not (0 <= tap_indices[0] < tap_indices[1] < tap_indices[2] < len(layers)):
            raise ValueError(f"TappedModel: tap indices {tap_indices} must be increasing and inside the layer list")
        self.layers = layers
        self.tap_indices = tap_indices
        self.config = config
        self.num_classes = config.num_classes
        self.input_shape = config.input_shape
        self.channel_masks: Dict[str, np.ndarray] = {}
        self._taps_by_index = dict(zip(tap_indices, TAP_LEVELS))

    def forward(self, x: Tensor, training: bool = False, return_taps: bool = False):
        """
        Run the network on an (N, C, H, W) batch.

        Args:
            x: Input batch.
            training: Use batch statistics (and update running ones) in batch norm.
            return_taps: Also return the three tap activations.

        Returns:
            Logits of shape (N, K), or ``(logits, taps)`` where ``taps`` maps
            "s1"/"s2"/"s3" to the tap tensors.
        """
        taps: Dict[str, Tensor] = {}
        for index, layer in enumerate(self.layers):
            x = layer(x, training)
            level = self._taps_by_index.get(index)
            if level is not None:
                mask = self.channel_masks.get(level)
                if mask is not None:
                    x = ops.mul(x, mask.reshape(1, -1, 1, 1))
                taps[level] = x
        return (x, taps) if return_taps else x

    def named_parameters(self) -> Dict[str, Tensor]:
        params: Dict[str, Tensor] = {}
        for layer in self.layers:
            params.update(layer.parameters())
        return params

    def named_buffers(self) -> Dict[str, np.ndarray]:
        buffers: Dict[str, np.ndarray] = {}
        for layer in self.layers:
            buffers.update(layer.buffers())
        return buffers

    def state_dict(self) -> Dict[str, np.ndarray]:
        """Parameters plus running statistics under the reserved "rs." prefix."""
        state = {name: p.data.copy() for name, p in self.named_parameters().items()}
        for name, buffer in self.named_buffers().items():
            state[RUNNING_STAT_PREFIX + name] = buffer.copy()
        return state

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        params = self.named_parameters()
        buffers = self.named_buffers()
        expected = set(params) | {RUNNING_STAT_PREFIX + b for b in buffers}
        if set(state) != expected:
            missing = sorted(expected - set(state))
            unexpected = sorted(set(state) - expected)
            raise ValueError(f"load_state_dict: missing {missing}, unexpected {unexpected}")
        for name, param in params.items():
            if state[name].shape != param.shape:
                raise ValueError(f"load_state_dict: {name} has shape {state[name].shape}, expected {param.shape}")
            param.data[...] = state[name]
        for name, buffer in buffers.items():
            buffer[...] = state[RUNNING_STAT_PREFIX + name]

    @contextmanager
    def frozen(self) -> Iterator["TappedModel"]:
        """Temporarily mark every parameter as a constant (no gradient)."""
        params = list(self.named_parameters().values())
        flags = [p.requires_grad for p in params]
        for p in params:
            p.requires_grad = False
        try:
            yield self
        finally:
            for p, flag in zip(params, flags):
                p.requires_grad = flag

    def logits(self, images: np.ndarray, batch_size: int = 256) -> np.ndarray:
        """Eval-mode logits for (N, H, W, C) images."""
        outputs = []
        with no_grad():
            for start in range(0, len(images), batch_size):
                outputs.append(self.forward(images_to_tensor(images[start:start + batch_size])).data)
        if not outputs:
            return np.zeros((0, self.num_classes))
        return np.concatenate(outputs, axis=0)

    def predict(self, images: np.ndarray, batch_size: int = 256) -> np.ndarray:
        """Eval-mode class predictions (first maximum on ties)."""
        return np.argmax(self.logits(images, batch_size), axis=1)

    def tap_activations(self, images: np.ndarray, level: str, batch_size: int = 256) -> np.ndarray:
        """Eval-mode activations of one tap level, shape (N, C, h, w)."""
        if level not in TAP_LEVELS:
            raise ValueError(f"Unknown tap level {level!r}; expected one of {TAP_LEVELS}")
        outputs = []
        with no_grad():
            for start in range(0, len(images), batch_size):
                _, taps = self.forward(images_to_tensor(images[start:start + batch_size]), return_taps=True)
                outputs.append(taps[level].data)
        return np.concatenate(outputs, axis=0)


def _plain_layers(config: ModelConfig, rng: np.random.Generator) -> Tuple[List[Layer], Tuple[int, int, int]]:
    layers: List[Layer] = []
    taps: List[int] = []
    in_channels = config.input_shape[2]
    for stage, base in enumerate(STAGE_CHANNELS, start=1):
        channels = base * config.width
        for conv in (1, 2):
            layers.append(Conv2d(f"conv{stage}_{conv}", in_channels, channels, 3, rng))
            layers.append(BatchNorm2d(f"bn{stage}_{conv}", channels))
            layers.append(ReLU(f"relu{stage}_{conv}"))
            in_channels = channels
        layers.append(MaxPool2x2(f"pool{stage}"))
        taps.append(len(layers) - 1)
    layers.append(GlobalAvgPool("gap"))
    layers.append(Linear("fc", in_channels, config.num_classes, rng))
    return layers, tuple(taps)


def _residual_layers(config: ModelConfig, rng: np.random.Generator) -> Tuple[List[Layer], Tuple[int, int, int]]:
    stem_channels = STAGE_CHANNELS[0] * config.width
    layers: List[Layer] = [
        Conv2d("stem.conv", config.input_shape[2], stem_channels, 3, rng),
        BatchNorm2d("stem.bn", stem_channels),
        ReLU("stem.relu"),
    ]
    taps: List[int] = []
    in_channels = stem_channels
    for stage, base in enumerate(STAGE_CHANNELS, start=1):
        channels = base * config.width
        layers.append(ResidualBlock(f"block{stage}", in_channels, channels, rng))
        layers.append(MaxPool2x2(f"pool{stage}"))
        taps.append(len(layers) - 1)
        in_channels = channels
    layers.append(GlobalAvgPool("gap"))
    layers.append(Linear("fc", in_channels, config.num_classes, rng))
    return layers, tuple(taps)


def build_model(config: ModelConfig, seed: int) -> TappedModel:
    """
    Build a freshly initialized tapped classifier.

    Args:
        config: Architecture settings.
        seed: Seed for Kaiming-uniform weight initialization.

    Returns:
        TappedModel with biases at zero and batch-norm scale/shift at one/zero.
    """
    rng = np.random.default_rng(seed)
    if config.family == "plain":
        layers, taps = _plain_layers(config, rng)
    else:
        layers, taps = _residual_layers(config, rng)
    return TappedModel(layers, taps, config)


def extract_features(
    model: TappedModel,
    images: np.ndarray,
    level: str,
    pooled: bool = False,
    population: str = "",
    batch_size: int = 256,
) -> FeatureSet:
    """
    Collect one tap level's eval-mode activations as a FeatureSet.

    Args:
        model: Trained or untrained model.
        images: Batch of (N, H, W, C) images; row order is preserved.
        level: "s1", "s2" or "s3".
        pooled: Global-average-pool each channel instead of flattening.
        population: Tag recorded on the FeatureSet.

    Returns:
        FeatureSet with one row per image.
    """
    activations = model.tap_activations(images, level, batch_size)
    if pooled:
        matrix = activations.mean(axis=(2, 3))
    else:
        matrix = activations.reshape(activations.shape[0], -1)
    return FeatureSet(matrix=np.ascontiguousarray(matrix), level=level, population=population)
