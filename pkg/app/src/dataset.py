"""Labeled image containers shared by the data, poisoning and training code."""

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass
class LabeledImage:
    """Represents one image with its (possibly poisoned) label."""
    pixels: np.ndarray  # H x W x C in [0, 1]
    label: int
    malicious: bool
    origin_label: int


@dataclass
class Dataset:
    """
    Column-oriented collection of labeled images.

    ``labels`` are the training labels (the target class for malicious
    samples); ``origin_labels`` keep the class each image was drawn from.
    """
    images: np.ndarray
    labels: np.ndarray
    malicious: np.ndarray
    origin_labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        self.images = np.clip(np.asarray(self.images, dtype=np.float64), 0.0, 1.0)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.malicious = np.asarray(self.malicious, dtype=bool)
        self.origin_labels = np.asarray(self.origin_labels, dtype=np.int64)
        n = self.images.shape[0]
        if self.images.ndim != 4:
            raise ValueError(f"Dataset: images must be (N, H, W, C), got {self.images.shape}")
        for field_name in ("labels", "malicious", "origin_labels"):
            if getattr(self, field_name).shape != (n,):
                raise ValueError(f"Dataset: {field_name} must have shape ({n},)")

    def __len__(self) -> int:
        return self.images.shape[0]

    def __getitem__(self, index: int) -> LabeledImage:
        return LabeledImage(
            pixels=self.images[index],
            label=int(self.labels[index]),
            malicious=bool(self.malicious[index]),
            origin_label=int(self.origin_labels[index]),
        )

    @property
    def image_shape(self):
        return self.images.shape[1:]

    def subset(self, index: Sequence[int]) -> "Dataset":
        index = np.asarray(index, dtype=np.int64)
        return Dataset(
            images=self.images[index],
            labels=self.labels[index],
            malicious=self.malicious[index],
            origin_labels=self.origin_labels[index],
            num_classes=self.num_classes,
        )

    def concat(self, other: "Dataset") -> "Dataset":
        if other.image_shape != self.image_shape:
            raise ValueError(f"Dataset.concat: image shapes {self.image_shape} and {other.image_shape} differ")
        return Dataset(
            images=np.concatenate([self.images, other.images]),
            labels=np.concatenate([self.labels, other.labels]),
            malicious=np.concatenate([self.malicious, other.malicious]),
            origin_labels=np.concatenate([self.origin_labels, other.origin_labels]),
            num_classes=max(self.num_classes, other.num_classes),
        )


@dataclass
class DatasetSplit:
    train: Dataset
    test: Dataset
