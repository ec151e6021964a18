"""Activation clustering: ICA to a few components, 2-means, smaller cluster is malicious."""

import warnings

import numpy as np
from sklearn.cluster import KMeans
from sklearn.decomposition import FastICA
from sklearn.exceptions import ConvergenceWarning

from app.src.defenses.detection import DetectionInput, DetectionReport, make_report

MIN_SAMPLES = 10


def smaller_cluster_flags(labels: np.ndarray) -> np.ndarray:
    """
    Flag the smaller of two clusters.

    On a size tie the cluster holding row 0 is benign, so the result does not
    depend on which index the clusterer gave each cluster.
    """
    labels = np.asarray(labels)
    in_first = labels == labels[0]
    first_size = int(in_first.sum())
    other_size = len(labels) - first_size
    if other_size == 0:
        return np.zeros(len(labels), dtype=bool)
    return in_first if first_size < other_size else ~in_first


def activation_clustering(
    inp: DetectionInput,
    n_components: int = 20,
    seed: int = 0,
    verbose: bool = False,
) -> DetectionReport:
    """
    Detect malicious rows by clustering ICA-reduced activations.

    FastICA (PCA whitening, deflation, logcosh contrast, 200 iterations,
    tolerance 1e-4) reduces the rows to ``n_components`` dimensions, or to the
    rank of the centered matrix when that is smaller. KMeans with k-means++
    seeding and 10 restarts splits them in two.

    Raises:
        ValueError: If fewer than 10 rows are given.
    """
    matrix = inp.matrix
    if len(matrix) < MIN_SAMPLES:
        raise ValueError(f"activation_clustering: need at least {MIN_SAMPLES} samples, got {len(matrix)}")

    centered = matrix - matrix.mean(axis=0)
    rank = int(np.linalg.matrix_rank(centered))
    if rank == 0:
        # zero variance: fixed split, second half is the (weakly) smaller cluster
        labels = np.zeros(len(matrix), dtype=int)
        labels[(len(matrix) + 1) // 2:] = 1
        if verbose:
            print(f"Activation Clustering: {inp.level} rows are identical, reporting a degenerate split")
        return make_report("AC", inp, smaller_cluster_flags(labels), degenerate=True)

    components = min(n_components, rank)
    if components < n_components and verbose:
        print(f"Activation Clustering: feature rank {rank} < {n_components}, using {components} components")

    ica = FastICA(
        n_components=components,
        algorithm="deflation",
        fun="logcosh",
        max_iter=200,
        tol=1e-4,
        whiten="unit-variance",
        random_state=seed,
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        reduced = ica.fit_transform(matrix)
    labels = KMeans(n_clusters=2, init="k-means++", n_init=10, random_state=seed).fit_predict(reduced)
    return make_report("AC", inp, smaller_cluster_flags(labels))
