"""
Detection inputs and reports shared by the difference-based defenses.

A DetectionInput holds N feature rows of samples the model predicts as the
target class, mixed at a malicious:benign ratio r'. The ground-truth flags
travel with it for scoring only; detectors read ``matrix`` and never ``truth``.
"""

from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np
from sklearn.metrics import precision_recall_curve, precision_recall_fscore_support

from app.src.dataset import Dataset
from app.src.model_zoo import FeatureSet, TappedModel, extract_features


@dataclass
class DetectionInput:
    features: FeatureSet
    truth: np.ndarray
    n: int
    r_prime: float

    @property
    def matrix(self) -> np.ndarray:
        return self.features.matrix

    @property
    def level(self) -> str:
        return self.features.level

    @property
    def expected_malicious(self) -> float:
        """Malicious count implied by (N, r'): N * r' / (1 + r')."""
        return self.n * self.r_prime / (1.0 + self.r_prime)


@dataclass
class DetectionReport:
    """Per-sample flags (malicious = True) with precision, recall and F1."""
    defense: str
    level: str
    n: int
    r_prime: float
    flags: np.ndarray
    precision: float
    recall: float
    f1: float
    scores: Optional[np.ndarray] = None
    degenerate: bool = False

    def to_row(self) -> Dict[str, object]:
        return {
            "defense": self.defense,
            "level": self.level,
            "N": self.n,
            "r_prime": self.r_prime,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "flags": int(self.flags.sum()),
        }


def score_flags(truth: np.ndarray, flags: np.ndarray) -> Tuple[float, float, float]:
    """Precision, recall and F1 with malicious as the positive class (0 where undefined)."""
    precision, recall, f1, _ = precision_recall_fscore_support(
        np.asarray(truth, dtype=bool),
        np.asarray(flags, dtype=bool),
        average="binary",
        pos_label=True,
        zero_division=0,
    )
    return float(precision), float(recall), float(f1)


def make_report(defense: str, inp: DetectionInput, flags: np.ndarray, scores: Optional[np.ndarray] = None,
                degenerate: bool = False) -> DetectionReport:
    flags = np.asarray(flags, dtype=bool)
    precision, recall, f1 = score_flags(inp.truth, flags)
    return DetectionReport(
        defense=defense,
        level=inp.level,
        n=inp.n,
        r_prime=inp.r_prime,
        flags=flags,
        precision=precision,
        recall=recall,
        f1=f1,
        scores=scores,
        degenerate=degenerate,
    )


def max_f1_flags(truth: np.ndarray, scores: np.ndarray) -> np.ndarray:
    """
    Flags at the threshold maximizing F1 over every distinct score value.

    Higher scores are more suspicious; a sample is flagged when its score is
    at least the threshold.
    """
    truth = np.asarray(truth, dtype=bool)
    if not truth.any():
        return np.zeros(len(scores), dtype=bool)
    precision, recall, thresholds = precision_recall_curve(truth, scores)
    precision, recall = precision[:-1], recall[:-1]
    denominator = precision + recall
    f1 = np.divide(2 * precision * recall, denominator, out=np.zeros_like(denominator), where=denominator > 0)
    return scores >= thresholds[int(np.argmax(f1))]


def detection_composition(n: int, r_prime: float) -> Tuple[int, int]:
    """(malicious, benign) counts for N samples at ratio r'."""
    if n < 1 or r_prime <= 0:
        raise ValueError(f"detection_composition: need N >= 1 and r' > 0, got N={n}, r'={r_prime}")
    malicious = int(round(n * r_prime / (1.0 + r_prime)))
    return malicious, n - malicious


def predicted_as(model: TappedModel, dataset: Dataset, target: int) -> np.ndarray:
    """Images of ``dataset`` that the model classifies as ``target``."""
    if len(dataset) == 0:
        return dataset.images
    return dataset.images[model.predict(dataset.images) == target]


def build_detection_input(
    model: TappedModel,
    benign_images: np.ndarray,
    malicious_images: np.ndarray,
    level: str,
    n: int,
    r_prime: float,
    seed: int = 0,
    pooled: bool = False,
) -> DetectionInput:
    """
    Sample a shuffled (N, r') mix of target-predicted images and extract one level.

    Args:
        benign_images: Benign candidates already predicted as the target.
        malicious_images: Triggered candidates already predicted as the target.

    Raises:
        ValueError: If either candidate pool is too small for the composition.
    """
    n_malicious, n_benign = detection_composition(n, r_prime)
    if len(malicious_images) < n_malicious or len(benign_images) < n_benign:
        raise ValueError(
            f"build_detection_input: N={n}, r'={r_prime} needs {n_malicious} malicious and {n_benign} benign "
            f"samples, only {len(malicious_images)} and {len(benign_images)} are predicted as the target"
        )
    rng = np.random.default_rng(seed)
    benign_pick = benign_images[np.sort(rng.choice(len(benign_images), size=n_benign, replace=False))]
    malicious_pick = malicious_images[np.sort(rng.choice(len(malicious_images), size=n_malicious, replace=False))]
    images = np.concatenate([benign_pick, malicious_pick])
    truth = np.concatenate([np.zeros(n_benign, dtype=bool), np.ones(n_malicious, dtype=bool)])
    order = rng.permutation(n)
    features = extract_features(model, images[order], level, pooled=pooled, population="detection")
    return DetectionInput(features=features, truth=truth[order], n=n, r_prime=r_prime)
