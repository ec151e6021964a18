"""Spectral signatures: outlier scores along the top singular direction."""

import numpy as np

from app.src.defenses.detection import DetectionInput, DetectionReport, make_report

MIN_SAMPLES = 10


def spectral_scores(matrix: np.ndarray) -> np.ndarray:
    """(row . v)^2 for the top right singular vector v of the mean-centered rows."""
    centered = matrix - matrix.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    return (centered @ vt[0]) ** 2


def spectral_signatures(inp: DetectionInput, removal_multiplier: float = 1.5) -> DetectionReport:
    """
    Flag the top round(removal_multiplier * N r' / (1 + r')) scores.

    Nothing is flagged when every score is zero.

    Raises:
        ValueError: If fewer than 10 rows are given.
    """
    matrix = inp.matrix
    if len(matrix) < MIN_SAMPLES:
        raise ValueError(f"spectral_signatures: need at least {MIN_SAMPLES} samples, got {len(matrix)}")
    scores = spectral_scores(matrix)
    flags = np.zeros(len(scores), dtype=bool)
    if not np.any(scores > 0):
        return make_report("SS", inp, flags, scores=scores, degenerate=True)
    count = min(int(round(removal_multiplier * inp.expected_malicious)), len(scores))
    order = np.argsort(-scores, kind="stable")
    flags[order[:count]] = True
    return make_report("SS", inp, flags, scores=scores)
