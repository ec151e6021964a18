"""Subspace reconstruction: residual norm outside a benign PCA subspace."""

from typing import Union

import numpy as np
from sklearn.decomposition import PCA

from app.src.defenses.detection import DetectionInput, DetectionReport, make_report, max_f1_flags
from app.src.model_zoo import FeatureSet


def fit_subspace(validation: np.ndarray, energy: float = 0.9):
    """
    Mean and orthonormal basis (k, d) of the smallest PCA subspace holding
    ``energy`` of the validation rows' squared singular values.
    """
    pca = PCA(svd_solver="full").fit(validation)
    if not np.any(pca.explained_variance_ > 0):
        return pca.mean_, np.zeros((0, validation.shape[1]))
    cumulative = np.cumsum(pca.explained_variance_ratio_)
    k = min(int(np.searchsorted(cumulative, energy - 1e-12)) + 1, len(cumulative))
    return pca.mean_, pca.components_[:k]


def reconstruction_losses(matrix: np.ndarray, mean: np.ndarray, basis: np.ndarray) -> np.ndarray:
    centered = matrix - mean
    residual = centered - (centered @ basis.T) @ basis
    return np.linalg.norm(residual, axis=1)


def subspace_reconstruction(
    inp: DetectionInput,
    validation: Union[FeatureSet, np.ndarray],
    energy: float = 0.9,
) -> DetectionReport:
    """
    Score rows by their l2 distance to the benign subspace and report the
    best F1 over every distinct threshold.

    Args:
        inp: Rows to screen.
        validation: Benign features from the same level (200 samples by default).
        energy: Fraction of validation energy the subspace must hold.

    Raises:
        ValueError: If the validation set has fewer than two rows or a different width.
    """
    reference = validation.matrix if isinstance(validation, FeatureSet) else np.asarray(validation, dtype=np.float64)
    if reference.ndim != 2 or len(reference) < 2:
        raise ValueError(f"subspace_reconstruction: need at least 2 validation rows, got shape {reference.shape}")
    if reference.shape[1] != inp.matrix.shape[1]:
        raise ValueError(
            f"subspace_reconstruction: validation width {reference.shape[1]} differs from input width {inp.matrix.shape[1]}"
        )
    mean, basis = fit_subspace(reference, energy)
    losses = reconstruction_losses(inp.matrix, mean, basis)
    return make_report("SR", inp, max_f1_flags(inp.truth, losses), scores=losses)
