"""Neuron pruning at the last tap with the true training trigger."""

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
import pandas as pd

from app.src.dataset import Dataset
from app.src.model_zoo import TappedModel
from app.src.poison import build_asr_testset
from app.src.trainer import evaluate
from app.src.triggers import TriggerSpec

DEFAULT_FRACTIONS = tuple(round(0.05 * i, 2) for i in range(11))


@dataclass
class PruningPoint:
    fraction: float
    pruned: int
    ba: float
    asr: float


def rank_channels(model: TappedModel, benign_images: np.ndarray, malicious_images: np.ndarray, level: str = "s3") -> np.ndarray:
    """Channel indices ordered by mean activation (malicious minus benign), largest first; ties keep index order."""
    benign_mean = model.tap_activations(benign_images, level).mean(axis=(0, 2, 3))
    malicious_mean = model.tap_activations(malicious_images, level).mean(axis=(0, 2, 3))
    return np.argsort(-(malicious_mean - benign_mean), kind="stable")


def neuron_prune(
    model: TappedModel,
    trigger: TriggerSpec,
    benign: Dataset,
    fractions: Sequence[float] = DEFAULT_FRACTIONS,
    target: int = 0,
    level: str = "s3",
    verbose: bool = False,
) -> List[PruningPoint]:
    """
    Mask the top fraction p of ranked channels and record (p, BA, ASR).

    Args:
        model: Trained model; its channel mask at ``level`` is restored on return.
        trigger: The true training trigger, used to build the malicious set.
        benign: Clean labeled images (test split).
        fractions: Values of p in [0, 1]; round(p * C) channels are masked.

    Returns:
        One PruningPoint per fraction, in the given order.
    """
    malicious = build_asr_testset(benign, trigger, target)
    order = rank_channels(model, benign.images, malicious.images, level)
    channels = len(order)
    previous = model.channel_masks.get(level)
    points: List[PruningPoint] = []
    try:
        for fraction in fractions:
            if not 0.0 <= fraction <= 1.0:
                raise ValueError(f"neuron_prune: fraction {fraction} outside [0, 1]")
            count = int(round(fraction * channels))
            mask = np.ones(channels)
            mask[order[:count]] = 0.0
            model.channel_masks[level] = mask
            ba, asr = evaluate(model, benign, malicious, target)
            points.append(PruningPoint(fraction=float(fraction), pruned=count, ba=ba, asr=asr))
            if verbose:
                print(f"Neuron Pruning: p={fraction:.2f} ({count}/{channels} channels) BA={ba:.4f} ASR={asr:.4f}")
    finally:
        if previous is None:
            model.channel_masks.pop(level, None)
        else:
            model.channel_masks[level] = previous
    return points


def pruning_frame(points: Sequence[PruningPoint]) -> pd.DataFrame:
    return pd.DataFrame(
        [{"fraction": p.fraction, "ba": p.ba, "asr": p.asr} for p in points],
        columns=["fraction", "ba", "asr"],
    )
