"""
Procedural image classes

Each class k gets a distinct base hue (k / K around the color wheel) and a
distinct shape from {disk, square, triangle, ring, bar at 0/30/60/90/120/150
degrees}. Samples jitter position, size, brightness and background, then add
Gaussian noise with sigma 0.05. Classes are separable by construction.
"""

import colorsys
from typing import Callable, Dict

import numpy as np

from app.src.dataset import Dataset, DatasetSplit

NOISE_SIGMA = 0.05
TRAIN_FRACTION = 5 / 6


def _bar(angle_degrees: float) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    theta = np.deg2rad(angle_degrees)

    def inside(dy: np.ndarray, dx: np.ndarray) -> np.ndarray:
        along = np.cos(theta) * dx + np.sin(theta) * dy
        across = -np.sin(theta) * dx + np.cos(theta) * dy
        return (np.abs(along) <= 1.0) & (np.abs(across) <= 0.25)
    return inside


# Shape predicates over offsets normalized by the shape radius
SHAPES: Dict[str, Callable[[np.ndarray, np.ndarray], np.ndarray]] = {
    "disk": lambda dy, dx: dy ** 2 + dx ** 2 <= 1.0,
    "square": lambda dy, dx: np.maximum(np.abs(dy), np.abs(dx)) <= 0.8,
    "triangle": lambda dy, dx: (dy >= -0.85) & (dy <= 0.85) & (np.abs(dx) <= 0.6 * (dy + 0.85)),
    "ring": lambda dy, dx: (dy ** 2 + dx ** 2 <= 1.0) & (dy ** 2 + dx ** 2 >= 0.55 ** 2),
    "bar0": _bar(0),
    "bar30": _bar(30),
    "bar60": _bar(60),
    "bar90": _bar(90),
    "bar120": _bar(120),
    "bar150": _bar(150),
}
SHAPE_ORDER = list(SHAPES)


def class_color(class_index: int, num_classes: int) -> np.ndarray:
    return np.array(colorsys.hsv_to_rgb(class_index / num_classes, 0.85, 1.0))


def synth_class_samples(
    rng: np.random.Generator,
    class_index: int,
    count: int,
    num_classes: int = 10,
    height: int = 32,
    width: int = 32,
    channels: int = 3,
) -> np.ndarray:
    """
    Draw ``count`` images of one class.

    Returns:
        Array of shape (count, H, W, C) with values in [0, 1].
    """
    if channels not in (1, 3):
        raise ValueError(f"synth_class_samples: channels must be 1 or 3, got {channels}")
    inside = SHAPES[SHAPE_ORDER[class_index % len(SHAPE_ORDER)]]
    color = class_color(class_index, num_classes)
    scale = min(height, width) / 32.0
    rows, cols = np.mgrid[0:height, 0:width].astype(np.float64)

    images = np.empty((count, height, width, 3))
    for n in range(count):
        cy = (height - 1) / 2 + rng.uniform(-3, 3) * scale
        cx = (width - 1) / 2 + rng.uniform(-3, 3) * scale
        radius = 0.3 * min(height, width) * rng.uniform(0.8, 1.1)
        shape_mask = inside((rows - cy) / radius, (cols - cx) / radius)
        background = rng.uniform(0.05, 0.35)
        brightness = rng.uniform(0.75, 1.0)
        image = np.full((height, width, 3), background)
        image[shape_mask] = color * brightness
        images[n] = image + rng.normal(0.0, NOISE_SIGMA, size=image.shape)

    if channels == 1:
        images = (images @ np.array([0.299, 0.587, 0.114]))[..., None]
    return np.clip(images, 0.0, 1.0)


def synth_dataset(
    seed: int,
    n_per_class: int,
    num_classes: int = 10,
    height: int = 32,
    width: int = 32,
    channels: int = 3,
) -> DatasetSplit:
    """
    Generate a balanced procedural dataset split 5:1 into train and test.

    Args:
        seed: Generator seed; the same seed yields identical datasets.
        n_per_class: Images generated per class before splitting.
        num_classes: Number of classes K (>= 2).

    Returns:
        DatasetSplit with shuffled train and test sets.
    """
    if num_classes < 2:
        raise ValueError(f"synth_dataset: need at least 2 classes, got {num_classes}")
    if n_per_class < 2:
        raise ValueError(f"synth_dataset: need at least 2 images per class, got {n_per_class}")
    rng = np.random.default_rng(seed)
    n_train = int(round(n_per_class * TRAIN_FRACTION))
    parts = {"train": ([], []), "test": ([], [])}
    for k in range(num_classes):
        images = synth_class_samples(rng, k, n_per_class, num_classes, height, width, channels)
        parts["train"][0].append(images[:n_train])
        parts["train"][1].append(np.full(n_train, k))
        parts["test"][0].append(images[n_train:])
        parts["test"][1].append(np.full(n_per_class - n_train, k))

    datasets = {}
    for name, (image_parts, label_parts) in parts.items():
        images = np.concatenate(image_parts)
        labels = np.concatenate(label_parts)
        order = rng.permutation(len(labels))
        datasets[name] = Dataset(
            images=images[order],
            labels=labels[order],
            malicious=np.zeros(len(labels), dtype=bool),
            origin_labels=labels[order],
            num_classes=num_classes,
        )
    return DatasetSplit(train=datasets["train"], test=datasets["test"])


def synth_pool(
    seed: int,
    per_class: int,
    num_classes: int = 10,
    height: int = 32,
    width: int = 32,
    channels: int = 3,
) -> Dataset:
    """Fresh balanced benign samples, independent of any synth_dataset split."""
    rng = np.random.default_rng(seed)
    images = np.concatenate([
        synth_class_samples(rng, k, per_class, num_classes, height, width, channels)
        for k in range(num_classes)
    ])
    labels = np.repeat(np.arange(num_classes), per_class)
    return Dataset(
        images=images,
        labels=labels,
        malicious=np.zeros(len(labels), dtype=bool),
        origin_labels=labels,
        num_classes=num_classes,
    )
