"""Poisoned training splits and attack-success test sets."""

from dataclasses import dataclass

import numpy as np

from app.src.dataset import Dataset
from app.src.triggers import TriggerSpec, apply_trigger


@dataclass
class PoisonSplit:
    """Benign set D, malicious set U and their ratio r = |U| / |D|."""
    benign: Dataset
    malicious: Dataset
    ratio: float

    def combined(self) -> Dataset:
        """The concatenated training set C = D + U."""
        return self.benign.concat(self.malicious)


def _triggered(source: Dataset, index: np.ndarray, spec: TriggerSpec, target: int) -> Dataset:
    return Dataset(
        images=apply_trigger(source.images[index], spec),
        labels=np.full(len(index), target),
        malicious=np.ones(len(index), dtype=bool),
        origin_labels=source.origin_labels[index],
        num_classes=source.num_classes,
    )


def poison_split(train: Dataset, spec: TriggerSpec, target: int = 0, ratio: float = 0.1, seed: int = 0) -> PoisonSplit:
    """
    Build the malicious set U from round(ratio * |D|) training images.

    The images are drawn uniformly without replacement from training samples
    whose origin label is not the target; their labels become the target.

    Raises:
        ValueError: If ratio is outside (0, 1), rounds to zero samples, or
            asks for more samples than there are non-target images.
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"poison_split: ratio must be in (0, 1), got {ratio}")
    count = int(round(ratio * len(train)))
    if count < 1:
        raise ValueError(f"poison_split: ratio {ratio} of {len(train)} samples is less than one malicious sample")
    candidates = np.flatnonzero(train.origin_labels != target)
    if count > len(candidates):
        raise ValueError(f"poison_split: need {count} non-target images, only {len(candidates)} available")
    rng = np.random.default_rng(seed)
    chosen = np.sort(rng.choice(candidates, size=count, replace=False))
    malicious = _triggered(train, chosen, spec, target)
    return PoisonSplit(benign=train, malicious=malicious, ratio=count / len(train))


def build_asr_testset(test: Dataset, spec: TriggerSpec, target: int = 0) -> Dataset:
    """Triggered copies of every test image whose origin label is not the target."""
    index = np.flatnonzero(test.origin_labels != target)
    return _triggered(test, index, spec, target)
