"""
Test script for MMD, energy distance, sliced Wasserstein distance and the
benign-vs-malicious difference report
"""

import itertools
import sys
from pathlib import Path

import numpy as np

project_root = Path(__file__).parent.parent.parent
if str(project_root) not in sys.path:
    sys.path.insert(0, str(project_root))

from tests.helpers import run_tests
from app.src.dataset import Dataset
from app.src.distances import (
    METRICS,
    difference_report,
    energy_distance,
    median_distance,
    mmd,
    mmd_tensor,
    relative_rank,
    sorted_matching_cost,
    swd,
)
from app.src.gradcheck import check_gradients
from app.src.kernels import KernelSpec, kernel_preset
from app.src.model_zoo import FeatureSet
from app.src.tensor import Tensor, no_grad


class ChannelModel:
    """Stand-in classifier: predicts the brightest channel, taps are scaled copies of the input."""

    num_classes = 3

    def predict(self, images, batch_size=256):
        return np.argmax(images.mean(axis=(1, 2)), axis=1)

    def tap_activations(self, images, level, batch_size=256):
        factor = {"s1": 1.0, "s2": 2.0, "s3": 3.0}[level]
        return factor * images.transpose(0, 3, 1, 2)


def _dataset(images, labels, malicious=False):
    return Dataset(images=images, labels=labels, malicious=np.full(len(labels), malicious),
                   origin_labels=labels, num_classes=3)


def _benign(seed: int, per_class: int = 20) -> Dataset:
    rng = np.random.default_rng(seed)
    images, labels = [], []
    for k in range(3):
        block = rng.uniform(0.0, 0.3, (per_class, 4, 4, 3))
        block[..., k] += 0.6
        images.append(block)
        labels.append(np.full(per_class, k))
    return _dataset(np.concatenate(images), np.concatenate(labels))


def _malicious(seed: int, count: int = 16) -> Dataset:
    rng = np.random.default_rng(seed)
    images = rng.uniform(0.0, 0.3, (count, 4, 4, 3))
    images[..., 0] += 0.6
    images[:, :2, :2, :] = 1.0
    return _dataset(images, np.zeros(count, dtype=np.int64), malicious=True)


def test_energy_distance_matches_brute_force():
    for seed in range(20):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(rng.integers(2, 7), 3))
        y = rng.normal(0.5, 1.0, size=(rng.integers(2, 7), 3))
        d = lambda p, q: np.sqrt(np.sum((p - q) ** 2))
        cross = np.mean([d(a, b) for a in x for b in y])
        within_x = np.mean([d(a, b) for a in x for b in x])
        within_y = np.mean([d(a, b) for a in y for b in y])
        expected = 2 * cross - within_x - within_y
        assert abs(energy_distance(x, y) - expected) <= 1e-12, seed
        assert energy_distance(x, y) >= -1e-12


def test_sorted_matching_is_optimal_assignment():
    for seed in range(20):
        rng = np.random.default_rng(seed)
        m = int(rng.integers(1, 7))
        a, b = rng.normal(size=m), rng.normal(size=m)
        best = min(np.abs(a - b[list(p)]).sum() for p in itertools.permutations(range(m)))
        assert abs(sorted_matching_cost(a, b) - best) <= 1e-12, seed


def test_linear_mmd_is_squared_mean_difference():
    rng = np.random.default_rng(0)
    x, y = rng.normal(size=(7, 4)), rng.normal(1.0, 2.0, size=(5, 4))
    expected = float(np.sum((x.mean(axis=0) - y.mean(axis=0)) ** 2))
    assert abs(mmd(x, y, kernel_preset("LK")) - expected) <= 1e-9
    with no_grad():
        assert abs(mmd_tensor(Tensor(x), Tensor(y), kernel_preset("LK")).item() - expected) <= 1e-9


def test_mixture_is_mean_of_components():
    rng = np.random.default_rng(1)
    x, y = rng.normal(size=(6, 3)), rng.normal(0.3, 1.0, size=(8, 3))
    mixture = kernel_preset("GMK1")
    parts = [mmd(x, y, KernelSpec("gaussian", (s,))) for s in mixture.bandwidths]
    assert abs(mmd(x, y, mixture) - np.mean(parts)) <= 1e-12


def test_mmd_basic_properties():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(10, 3))
    for name in ("GK2", "GMK2", "LK"):
        kernel = kernel_preset(name)
        assert abs(mmd(x, x, kernel)) <= 1e-12, name
        far = mmd(x, x + 5.0, kernel)
        assert far > 0.0, name
    assert median_distance(np.zeros((3, 2)), np.zeros((2, 2))) == 1.0


def test_mmd_tensor_matches_mmd():
    rng = np.random.default_rng(3)
    x, y = rng.normal(size=(6, 4)), rng.normal(0.5, 1.0, size=(9, 4))
    for name in ("GK1", "GMK2", "GMK6"):
        kernel = kernel_preset(name)
        with no_grad():
            value = mmd_tensor(Tensor(x), Tensor(y), kernel).item()
        assert abs(value - mmd(x, y, kernel)) <= 1e-10, name


def test_mmd_tensor_gradients():
    kernel = kernel_preset("GMK2")
    for seed in range(5):
        rng = np.random.default_rng(seed)
        x = Tensor(rng.uniform(-2, 2, (5, 3)), requires_grad=True, name="x")
        y = Tensor(rng.uniform(-2, 2, (4, 3)), requires_grad=True, name="y")
        scale = median_distance(x.data, y.data)
        errors = check_gradients(lambda: mmd_tensor(x, y, kernel, scale=scale), [x, y])
        assert max(errors.values()) <= 1e-4, errors


def test_swd_properties():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(12, 5))
    assert swd(x, x, projections=16, seed=0) == 0.0
    shifted = swd(x, x + 1.0, projections=16, seed=0)
    assert shifted > 0.0
    assert swd(x, x + 1.0, projections=16, seed=0) == shifted
    # unequal sizes subsample the larger set
    assert swd(x, x[:4] + 1.0, projections=16, seed=0) > 0.0
    assert swd(FeatureSet(x, "s1"), FeatureSet(x, "s1"), projections=4) == 0.0


def test_distances_reject_bad_inputs():
    for fn in (
        lambda: mmd(np.zeros((3, 2)), np.zeros((3, 4)), kernel_preset("GK2")),
        lambda: energy_distance(np.zeros((0, 2)), np.zeros((3, 2))),
        lambda: swd(np.zeros((3, 2)), np.zeros((3, 3))),
    ):
        try:
            fn()
        except ValueError:
            continue
        raise AssertionError("bad input accepted")


def test_relative_rank():
    assert relative_rank(1.0, 2.0, 3.0) == 1
    assert relative_rank(2.5, 2.0, 3.0) == 2
    assert relative_rank(3.0, 1.0, 2.0) == 3
    assert relative_rank(1.0, 1.0, 1.0) == 1


def test_difference_report_structure():
    report = difference_report(ChannelModel(), _benign(0), _malicious(1), target=0,
                               sample_size=50, repeats=2, projections=8, seed=3)
    frame = report.to_frame()
    assert len(report.cells) == len(METRICS) * 3
    assert len(frame) == len(METRICS) * 3 + 3
    for level in ("s1", "s2", "s3"):
        ranks = [report.cell(m, level).rank for m in METRICS]
        assert all(r in (1, 2, 3) for r in ranks)
        assert abs(report.aro[level] - np.mean(ranks)) <= 1e-12
        # 20 reference images split into halves of 10; malicious capped at the half size
        assert report.samples[level]["benign"].shape[0] == 10
        assert report.samples[level]["malicious"].shape[0] == 10
    # triggered images move further from the reference than a disjoint benign half
    assert report.cell("mmd", "s1").cross > report.cell("mmd", "s1").intra


def test_difference_report_is_deterministic():
    args = dict(target=0, sample_size=50, repeats=2, projections=8, seed=5)
    first = difference_report(ChannelModel(), _benign(0), _malicious(1), **args).to_frame()
    second = difference_report(ChannelModel(), _benign(0), _malicious(1), **args).to_frame()
    assert first.equals(second)


def test_difference_report_without_baselines():
    benign = _benign(0)
    only_target = benign.subset(np.flatnonzero(benign.labels == 0))
    report = difference_report(ChannelModel(), only_target, _malicious(1), target=0,
                               levels=["s1"], metrics=["ed"], repeats=1)
    cell = report.cell("ed", "s1")
    assert cell.inter_min is None and cell.rank is None and report.aro["s1"] is None
    assert cell.cross is not None and cell.intra is not None


def test_difference_report_rejects_unknown_metric():
    try:
        difference_report(ChannelModel(), _benign(0), _malicious(1), metrics=["kl"])
    except ValueError:
        return
    raise AssertionError("unknown metric accepted")


def test_distances_are_symmetric():
    rng = np.random.default_rng(6)
    x, y = rng.normal(size=(9, 4)), rng.normal(0.7, 1.5, size=(13, 4))
    for name in ("GK2", "GMK2", "LK"):
        kernel = kernel_preset(name)
        assert abs(mmd(x, y, kernel) - mmd(y, x, kernel)) <= 1e-12, name
    assert abs(energy_distance(x, y) - energy_distance(y, x)) <= 1e-12
    assert abs(swd(x, y[:9], projections=16) - swd(y[:9], x, projections=16)) <= 1e-12


def test_swd_one_dimensional_shift():
    x, y = np.array([[0.0], [1.0]]), np.array([[1.0], [2.0]])
    assert abs(swd(x, y, projections=8) - 2.0) <= 1e-12


def test_separation_grows_with_mean_shift():
    shifts = [0.0, 0.5, 1.0, 2.0]
    kernel = kernel_preset("GMK2", median_scaling=False)
    metrics = {
        "mmd": lambda a, b: mmd(a, b, kernel),
        "ed": energy_distance,
        "swd": lambda a, b: swd(a, b, projections=32),
    }
    totals = {name: np.zeros(len(shifts)) for name in metrics}
    for seed in range(10):
        rng = np.random.default_rng(seed)
        x, y = rng.normal(size=(60, 5)), rng.normal(size=(60, 5))
        for i, c in enumerate(shifts):
            shifted = y.copy()
            shifted[:, 0] += c
            for name, fn in metrics.items():
                totals[name][i] += fn(x, shifted) / 10
    for name, values in totals.items():
        assert np.all(np.diff(values) >= -1e-12), (name, values.tolist())
        assert values[-1] > values[0], name


def main() -> bool:
    return run_tests("Distances Test Suite", [
        test_energy_distance_matches_brute_force,
        test_sorted_matching_is_optimal_assignment,
        test_linear_mmd_is_squared_mean_difference,
        test_mixture_is_mean_of_components,
        test_mmd_basic_properties,
        test_mmd_tensor_matches_mmd,
        test_mmd_tensor_gradients,
        test_swd_properties,
        test_distances_reject_bad_inputs,
        test_relative_rank,
        test_difference_report_structure,
        test_difference_report_is_deterministic,
        test_difference_report_without_baselines,
        test_difference_report_rejects_unknown_metric,
        test_distances_are_symmetric,
        test_swd_one_dimensional_shift,
        test_separation_grows_with_mean_shift,
    ])


if __name__ == "__main__":
    sys.exit(0 if main() else 1)
