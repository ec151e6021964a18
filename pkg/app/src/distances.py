"""
Distributional distances between FeatureSets.

MMD (biased V-statistic), energy distance and sliced Wasserstein distance,
the tape-recorded MMD used as a training regularizer, and the
benign-vs-malicious difference report with intra/inter-class baselines and
average relative ordering (ARO).
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy.spatial.distance import cdist, pdist

from app.src import ops
from app.src.dataset import Dataset
from app.src.kernels import KernelSpec
from app.src.model_zoo import FeatureSet, TAP_LEVELS, TappedModel, extract_features
from app.src.tensor import Tensor

METRICS = ("mmd", "ed", "swd")
Features = Union[FeatureSet, np.ndarray]


def _matrix(features: Features, label: str) -> np.ndarray:
    matrix = features.matrix if isinstance(features, FeatureSet) else np.asarray(features, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] == 0:
        raise ValueError(f"{label}: expected a non-empty (n, d) matrix, got shape {matrix.shape}")
    return matrix


def _pair(x: Features, y: Features, op: str):
    a, b = _matrix(x, op), _matrix(y, op)
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"{op}: feature dimensions differ ({a.shape[1]} vs {b.shape[1]})")
    return a, b


def median_distance(x: np.ndarray, y: np.ndarray) -> float:
    """Median pairwise Euclidean distance of the pooled rows (1.0 when degenerate)."""
    distances = pdist(np.concatenate([x, y]))
    median = float(np.median(distances)) if distances.size else 0.0
    return median if median > 0 else 1.0


def bandwidth_scale(kernel: KernelSpec, x: np.ndarray, y: np.ndarray) -> float:
    if kernel.kind == "linear" or not kernel.median_scaling:
        return 1.0
    return median_distance(x, y)


def kernel_matrix(a: np.ndarray, b: np.ndarray, kernel: KernelSpec, scale: float = 1.0) -> np.ndarray:
    if kernel.kind == "linear":
        return a @ b.T
    squared = cdist(a, b, "sqeuclidean")
    total = np.zeros_like(squared)
    for sigma in kernel.bandwidths:
        total += np.exp(-squared / (2.0 * (sigma * scale) ** 2))
    return total / len(kernel.bandwidths)


def mmd(x: Features, y: Features, kernel: KernelSpec) -> float:
    """
    Squared MMD, biased V-statistic:
    mean k(x_i, x_j) + mean k(y_i, y_j) - 2 mean k(x_i, y_j).

    Raises:
        ValueError: If the feature dimensions differ.
    """
    a, b = _pair(x, y, "mmd")
    scale = bandwidth_scale(kernel, a, b)
    return float(
        kernel_matrix(a, a, kernel, scale).mean()
        + kernel_matrix(b, b, kernel, scale).mean()
        - 2.0 * kernel_matrix(a, b, kernel, scale).mean()
    )


def mmd_tensor(x: Tensor, y: Tensor, kernel: KernelSpec, scale: Optional[float] = None) -> Tensor:
    """
    Differentiable squared MMD between two (n, d) feature tensors.

    The median-heuristic bandwidth is computed from the current values and
    held constant during backward.
    """
    if x.ndim != 2 or y.ndim != 2 or x.shape[1] != y.shape[1]:
        raise ValueError(f"mmd_tensor: incompatible feature shapes {x.shape} and {y.shape}")
    if kernel.kind == "linear":
        diff = ops.sub(ops.mean(x, axis=0), ops.mean(y, axis=0))
        return ops.sum(ops.mul(diff, diff))
    if scale is None:
        scale = bandwidth_scale(kernel, x.data, y.data)

    def gram(a: Tensor, b: Tensor) -> Tensor:
        squared = ops.pairwise_sqdist(a, b)
        total = None
        for sigma in kernel.bandwidths:
            term = ops.exp(ops.mul(squared, -1.0 / (2.0 * (sigma * scale) ** 2)))
            total = term if total is None else ops.add(total, term)
        return ops.mul(total, 1.0 / len(kernel.bandwidths))

    return ops.sub(
        ops.add(ops.mean(gram(x, x)), ops.mean(gram(y, y))),
        ops.mul(ops.mean(gram(x, y)), 2.0),
    )


def energy_distance(x: Features, y: Features) -> float:
    """
    Energy distance, non-negative convention:
    2 mean ||x_i - y_j|| - mean ||x_i - x_j|| - mean ||y_i - y_j||.
    """
    a, b = _pair(x, y, "energy_distance")
    return float(
        2.0 * cdist(a, b).mean()
        - cdist(a, a).mean()
        - cdist(b, b).mean()
    )


def random_directions(dim: int, count: int, seed: int) -> np.ndarray:
    """``count`` directions drawn uniformly from the unit sphere in R^dim."""
    directions = np.random.default_rng(seed).standard_normal((count, dim))
    return directions / np.linalg.norm(directions, axis=1, keepdims=True)


def sorted_matching_cost(a: np.ndarray, b: np.ndarray) -> float:
    """Optimal 1-D l1 transport cost between equal-size samples: sum |sort(a) - sort(b)|."""
    return float(np.abs(np.sort(a) - np.sort(b)).sum())


def swd(x: Features, y: Features, projections: int = 128, seed: int = 0) -> float:
    """
    Sliced Wasserstein distance with l1 ground cost.

    The larger set is uniformly subsampled (seeded) to the size of the
    smaller one; the result averages the sorted-matching cost over
    ``projections`` random unit directions.

    Raises:
        ValueError: If either set is empty or dimensions differ.
    """
    a, b = _pair(x, y, "swd")
    directions = random_directions(a.shape[1], projections, seed)
    size = min(len(a), len(b))
    subsample = np.random.default_rng([seed, 1])
    if len(a) > size:
        a = a[np.sort(subsample.choice(len(a), size=size, replace=False))]
    elif len(b) > size:
        b = b[np.sort(subsample.choice(len(b), size=size, replace=False))]
    projected_a = np.sort(a @ directions.T, axis=0)
    projected_b = np.sort(b @ directions.T, axis=0)
    return float(np.abs(projected_a - projected_b).sum(axis=0).mean())


def relative_rank(cross: float, intra: float, inter_min: float) -> int:
    """Ascending rank of ``cross`` among the three values; ties take the lower rank."""
    return 1 + int(intra < cross) + int(inter_min < cross)


@dataclass
class DistanceCell:
    metric: str
    level: str
    cross: Optional[float]
    intra: Optional[float]
    inter_min: Optional[float]
    rank: Optional[int]


@dataclass
class DistanceReport:
    """Per (metric, level) distances, baselines and ranks, plus ARO per level."""
    cells: List[DistanceCell]
    aro: Dict[str, Optional[float]]
    samples: Dict[str, Dict[str, np.ndarray]] = field(default_factory=dict)

    def cell(self, metric: str, level: str) -> DistanceCell:
        for cell in self.cells:
            if cell.metric == metric and cell.level == level:
                return cell
        raise KeyError(f"No distance cell for ({metric}, {level})")

    def to_frame(self) -> pd.DataFrame:
        rows = [
            {"metric": c.metric, "level": c.level, "cross": c.cross, "intra": c.intra,
             "inter_min": c.inter_min, "rank": c.rank}
            for c in self.cells
        ]
        for level, value in self.aro.items():
            rows.append({"metric": "ARO", "level": level, "cross": None, "intra": None,
                         "inter_min": None, "rank": value})
        return pd.DataFrame(rows, columns=["metric", "level", "cross", "intra", "inter_min", "rank"])


def _sample(rng: np.random.Generator, matrix: np.ndarray, size: int) -> np.ndarray:
    if len(matrix) <= size:
        return matrix
    return matrix[np.sort(rng.choice(len(matrix), size=size, replace=False))]


def _mean_or_none(values: List[float]) -> Optional[float]:
    return float(np.mean(values)) if values else None


def difference_report(
    model: TappedModel,
    benign: Dataset,
    malicious: Dataset,
    target: int = 0,
    levels: Sequence[str] = TAP_LEVELS,
    metrics: Sequence[str] = METRICS,
    kernel: Optional[KernelSpec] = None,
    sample_size: int = 200,
    repeats: int = 3,
    projections: int = 128,
    seed: int = 0,
    pooled: bool = False,
    verbose: bool = False,
) -> DistanceReport:
    """
    Quantify how far malicious representations sit from benign ones.

    Populations follow the model's predictions: benign test images predicted
    as the target form the reference set, malicious images predicted as the
    target form the compared set, and benign images predicted as each other
    class j form the inter-class baselines. Per repeat, the reference is split
    into two disjoint random halves A and B; every other population is
    subsampled to at most |A| rows. Then per (metric, level):

        cross = m(A, malicious), intra = m(A, B), inter_min = min_j m(A, class_j)

    averaged over repeats. A cell whose populations have fewer than two
    members is reported as missing.
    """
    from app.src.kernels import kernel_preset

    kernel = kernel or kernel_preset("GMK2")
    unknown = set(metrics) - set(METRICS)
    if unknown:
        raise ValueError(f"difference_report: unknown metrics {sorted(unknown)}")

    benign_pred = model.predict(benign.images)
    malicious_pred = model.predict(malicious.images) if len(malicious) else np.zeros(0, dtype=np.int64)
    reference_images = benign.images[benign_pred == target]
    compared_images = malicious.images[malicious_pred == target]
    other_images = {
        j: benign.images[benign_pred == j]
        for j in range(model.num_classes) if j != target
    }
    if verbose:
        print(f"Difference Report: reference={len(reference_images)}, malicious={len(compared_images)}, "
              f"inter-class sizes={ {j: len(v) for j, v in other_images.items()} }")

    cells: List[DistanceCell] = []
    aro: Dict[str, Optional[float]] = {}
    samples: Dict[str, Dict[str, np.ndarray]] = {}

    for level_index, level in enumerate(levels):
        def features(images: np.ndarray, tag: str) -> np.ndarray:
            if len(images) == 0:
                return np.zeros((0, 0))
            return extract_features(model, images, level, pooled=pooled, population=tag).matrix

        reference = features(reference_images, "benign")
        compared = features(compared_images, "malicious")
        others = {j: features(images, f"class_{j}") for j, images in other_images.items()}

        collected = {metric: {"cross": [], "intra": [], "inter": []} for metric in metrics}
        half = min(sample_size, len(reference) // 2)
        for repeat in range(repeats):
            if half < 2:
                break
            rng = np.random.default_rng([seed, level_index, repeat])
            order = rng.permutation(len(reference))
            part_a = reference[np.sort(order[:half])]
            part_b = reference[np.sort(order[half:2 * half])]
            compared_sample = _sample(rng, compared, half) if len(compared) >= 2 else None
            other_samples = [_sample(rng, m, half) for m in others.values() if len(m) >= 2]
            swd_seed = int(rng.integers(2 ** 31))
            if repeat == 0:
                samples[level] = {"benign": part_a}
                if compared_sample is not None:
                    samples[level]["malicious"] = compared_sample

            for metric in metrics:
                if metric == "mmd":
                    measure = lambda p, q: mmd(p, q, kernel)
                elif metric == "ed":
                    measure = energy_distance
                else:
                    measure = lambda p, q: swd(p, q, projections, swd_seed)
                collected[metric]["intra"].append(measure(part_a, part_b))
                if compared_sample is not None:
                    collected[metric]["cross"].append(measure(part_a, compared_sample))
                if other_samples:
                    collected[metric]["inter"].append(min(measure(part_a, o) for o in other_samples))

        ranks = []
        for metric in metrics:
            cross = _mean_or_none(collected[metric]["cross"])
            intra = _mean_or_none(collected[metric]["intra"])
            inter = _mean_or_none(collected[metric]["inter"])
            rank = None
            if cross is not None and intra is not None and inter is not None:
                rank = relative_rank(cross, intra, inter)
                ranks.append(rank)
            cells.append(DistanceCell(metric, level, cross, intra, inter, rank))
            if verbose:
                print(f"Difference Report: {level} {metric}: cross={cross}, intra={intra}, inter_min={inter}, rank={rank}")
        aro[level] = float(np.mean(ranks)) if ranks else None

    return DistanceReport(cells=cells, aro=aro, samples=samples)
