"""
Test script for the defenses: activation clustering, spectral signatures,
subspace reconstruction, trigger synthesis and neuron pruning
"""

import sys
from pathlib import Path

import numpy as np

project_root = Path(__file__).parent.parent.parent
if str(project_root) not in sys.path:
    sys.path.insert(0, str(project_root))

from tests.helpers import print_info, random_images, run_tests, tiny_model_config
from app.src.defenses import (
    DetectionInput,
    activation_clustering,
    build_detection_input,
    detection_composition,
    mad_anomaly_index,
    neuron_prune,
    pruning_frame,
    score_flags,
    spectral_signatures,
    subspace_reconstruction,
    synthesize_all_triggers,
    synthesize_trigger,
)
from app.src.defenses.activation_clustering import smaller_cluster_flags
from app.src.defenses.detection import max_f1_flags
from app.src.defenses.spectral_signatures import spectral_scores
from app.src.defenses.subspace_reconstruction import fit_subspace, reconstruction_losses
from app.src.model_zoo import FeatureSet, build_model
from app.src.synthetic_data import synth_dataset
from app.src.triggers import make_trigger


def _input(matrix: np.ndarray, truth: np.ndarray, r_prime: float = 1.0) -> DetectionInput:
    return DetectionInput(features=FeatureSet(matrix, "s3"), truth=np.asarray(truth, dtype=bool),
                          n=len(matrix), r_prime=r_prime)


def _blobs(seed: int, benign: int = 80, malicious: int = 20, dim: int = 10, shift: float = 6.0):
    rng = np.random.default_rng(seed)
    matrix = np.concatenate([rng.normal(size=(benign, dim)), rng.normal(shift, 1.0, size=(malicious, dim))])
    truth = np.concatenate([np.zeros(benign, bool), np.ones(malicious, bool)])
    order = rng.permutation(len(truth))
    return matrix[order], truth[order]


def test_score_flags_matches_confusion_counts():
    truth = np.array([1, 1, 1, 0, 0, 0, 0, 1], dtype=bool)
    flags = np.array([1, 1, 0, 1, 0, 0, 0, 0], dtype=bool)
    tp, fp, fn = 2, 1, 2
    precision, recall, f1 = score_flags(truth, flags)
    assert abs(precision - tp / (tp + fp)) <= 1e-12
    assert abs(recall - tp / (tp + fn)) <= 1e-12
    assert abs(f1 - 2 * tp / (2 * tp + fp + fn)) <= 1e-12
    assert score_flags(truth, np.zeros(8, bool)) == (0.0, 0.0, 0.0)


def test_detection_composition():
    assert detection_composition(100, 0.5) == (33, 67)
    assert detection_composition(500, 1.0) == (250, 250)
    try:
        detection_composition(10, 0.0)
    except ValueError:
        return
    raise AssertionError("r' = 0 accepted")


def test_activation_clustering_separates_blobs():
    matrix, truth = _blobs(0)
    report = activation_clustering(_input(matrix, truth, r_prime=0.25), seed=0)
    print_info(f"AC precision={report.precision:.3f} recall={report.recall:.3f} f1={report.f1:.3f}")
    assert report.f1 >= 0.95
    assert report.defense == "AC" and not report.degenerate


def test_activation_clustering_degenerate_rows():
    report = activation_clustering(_input(np.ones((10, 4)), np.zeros(10)))
    assert report.degenerate
    assert report.flags.tolist() == [False] * 5 + [True] * 5


def test_activation_clustering_needs_ten_rows():
    try:
        activation_clustering(_input(np.zeros((9, 3)), np.zeros(9)))
    except ValueError:
        return
    raise AssertionError("nine rows accepted")


def test_smaller_cluster_is_label_symmetric():
    rng = np.random.default_rng(1)
    for _ in range(10):
        labels = rng.integers(0, 2, 15)
        assert np.array_equal(smaller_cluster_flags(labels), smaller_cluster_flags(1 - labels))
    tie = np.array([1, 0, 1, 0])
    assert smaller_cluster_flags(tie).tolist() == [False, True, False, True]


def test_spectral_signatures_rank_one_signal():
    direction = np.random.default_rng(2).normal(size=6)
    matrix = np.zeros((20, 6))
    truth = np.zeros(20, bool)
    truth[[3, 7, 11, 19]] = True
    matrix[truth] = 5.0 * direction
    inp = _input(matrix, truth, r_prime=0.25)
    assert spectral_signatures(inp, removal_multiplier=1.0).f1 == 1.0
    report = spectral_signatures(inp)
    assert int(report.flags.sum()) == 6  # round(1.5 * 4)
    assert report.recall == 1.0


def test_spectral_signatures_identical_rows():
    truth = np.zeros(12, bool)
    truth[:3] = True
    report = spectral_signatures(_input(np.full((12, 4), 2.5), truth, r_prime=1 / 3))
    assert not report.flags.any() and report.f1 == 0.0 and report.degenerate


def test_spectral_scores_are_shift_invariant():
    matrix = np.random.default_rng(3).normal(size=(15, 5))
    np.testing.assert_allclose(spectral_scores(matrix), spectral_scores(matrix + 7.0), rtol=1e-8, atol=1e-10)


def _plane_rows(rng, count, basis, offset):
    return offset + rng.normal(size=(count, 2)) @ basis


def test_subspace_reconstruction_orthogonal_component():
    rng = np.random.default_rng(4)
    basis = np.eye(5)[:2]
    offset = np.array([1.0, -2.0, 0.5, 0.0, 3.0])
    signs = np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]] * 10, dtype=float)
    validation = offset + signs @ basis
    benign = _plane_rows(rng, 12, basis, offset)
    malicious = benign[:6] + 3.0 * np.eye(5)[3]
    matrix = np.concatenate([benign, malicious])
    truth = np.concatenate([np.zeros(12, bool), np.ones(6, bool)])

    mean, components = fit_subspace(validation, 0.9)
    assert components.shape == (2, 5)
    assert reconstruction_losses(benign, mean, components).max() <= 1e-10

    report = subspace_reconstruction(_input(matrix, truth, r_prime=0.5), validation)
    assert report.f1 == 1.0


def test_subspace_reconstruction_rejects_bad_validation():
    inp = _input(np.zeros((10, 3)), np.zeros(10))
    for validation in (np.zeros((1, 3)), np.zeros((5, 4))):
        try:
            subspace_reconstruction(inp, validation)
        except ValueError:
            continue
        raise AssertionError("bad validation accepted")


def test_max_f1_flags():
    truth = np.array([0, 0, 1, 1, 0], dtype=bool)
    scores = np.array([0.1, 0.2, 0.9, 0.8, 0.3])
    assert max_f1_flags(truth, scores).tolist() == truth.tolist()
    assert not max_f1_flags(np.zeros(5, bool), scores).any()


def test_mad_anomaly_index():
    index = mad_anomaly_index([10.0, 11.0, 9.0, 10.0, 2.0])
    assert abs(index[4] - 8.0 / 1.4826) <= 1e-12
    assert index[4] > 2.0 and np.all(index[:4] <= 2.0)
    assert not mad_anomaly_index([4.0, 4.0, 4.0]).any()


def test_build_detection_input_composition():
    model = build_model(tiny_model_config(), seed=0)
    benign, malicious = random_images(0, 30), random_images(1, 30)
    inp = build_detection_input(model, benign, malicious, "s2", n=20, r_prime=0.5, seed=3)
    assert inp.matrix.shape == (20, 64 * 2 * 2)
    assert int(inp.truth.sum()) == 7  # round(20 * 0.5 / 1.5)
    again = build_detection_input(model, benign, malicious, "s2", n=20, r_prime=0.5, seed=3)
    assert np.array_equal(inp.truth, again.truth) and inp.matrix.tobytes() == again.matrix.tobytes()
    try:
        build_detection_input(model, benign[:5], malicious, "s2", n=20, r_prime=0.5)
    except ValueError:
        return
    raise AssertionError("undersized benign pool accepted")


def test_synthesize_trigger_small_run():
    model = build_model(tiny_model_config(), seed=0)
    images = random_images(2, 6)
    first = synthesize_trigger(model, images, 1, steps=3, batch_size=4, seed=5)
    second = synthesize_trigger(model, images, 1, steps=3, batch_size=4, seed=5)
    assert first.mask.shape == (8, 8) and first.pattern.shape == (8, 8, 3)
    assert first.mask.min() >= 0.0 and first.mask.max() <= 1.0
    assert abs(first.l1 - first.mask.sum()) <= 1e-9
    assert first.mask.tobytes() == second.mask.tobytes()
    assert np.isfinite(first.final_loss)
    assert all(p.requires_grad for p in model.named_parameters().values())


def test_synthesize_all_triggers_records():
    model = build_model(tiny_model_config(), seed=0)
    scan = synthesize_all_triggers(model, random_images(3, 6), steps=2, batch_size=4, seed=1)
    records = scan.to_records()
    assert [r["class"] for r in records] == [0, 1, 2]
    assert set(records[0]) == {"class", "l1", "anomaly_index", "flagged", "converged", "final_loss"}


def test_neuron_pruning_endpoints_and_mask_restore():
    model = build_model(tiny_model_config(), seed=0)
    test = synth_dataset(0, n_per_class=12, num_classes=3, height=8, width=8).test
    trigger = make_trigger("patched", (8, 8, 3))
    points = neuron_prune(model, trigger, test, fractions=[0.0, 1.0], target=0)
    assert [p.pruned for p in points] == [0, 128]
    # every s3 channel masked: logits equal the zero fc bias, argmax picks class 0
    assert points[1].asr == 1.0
    assert abs(points[1].ba - np.mean(test.labels == 0)) <= 1e-12
    assert "s3" not in model.channel_masks
    frame = pruning_frame(points)
    assert list(frame.columns) == ["fraction", "ba", "asr"] and len(frame) == 2


def test_subspace_reconstruction_on_indistinguishable_rows():
    r_prime = 1.0
    bound = 2 * r_prime / (1 + 2 * r_prime) + 0.15
    for seed in range(3):
        rng = np.random.default_rng(seed)
        truth = rng.permutation(np.arange(100) < 50)
        report = subspace_reconstruction(_input(rng.normal(size=(100, 10)), truth, r_prime), rng.normal(size=(200, 10)))
        assert report.f1 <= bound, (seed, report.f1)


def _classless_model(seed: int):
    # zero s3 output and zero fc bias: every input gets all-zero logits
    model = build_model(tiny_model_config(), seed=seed)
    model.channel_masks["s3"] = np.zeros(128)
    return model


def test_trigger_synthesis_flags_nothing_without_a_backdoor():
    flagged_runs = 0
    for seed in range(5):
        model = _classless_model(seed)
        images = random_images(seed, 8)
        norms = [synthesize_trigger(model, images, j, steps=10, batch_size=4, seed=seed).l1 for j in range(3)]
        flagged_runs += bool((mad_anomaly_index(norms) > 2.0).any())
    assert flagged_runs <= 1, f"{flagged_runs} of 5 runs flagged a class"


def test_sparsity_weight_shrinks_the_mask():
    model = _classless_model(0)
    images = random_images(7, 8)
    dense = synthesize_trigger(model, images, 1, gamma=0.0, steps=20, batch_size=4, seed=3)
    sparse = synthesize_trigger(model, images, 1, gamma=0.01, steps=20, batch_size=4, seed=3)
    assert dense.l1 >= sparse.l1, (dense.l1, sparse.l1)


def main() -> bool:
    return run_tests("Defenses Test Suite", [
        test_score_flags_matches_confusion_counts,
        test_detection_composition,
        test_activation_clustering_separates_blobs,
        test_activation_clustering_degenerate_rows,
        test_activation_clustering_needs_ten_rows,
        test_smaller_cluster_is_label_symmetric,
        test_spectral_signatures_rank_one_signal,
        test_spectral_signatures_identical_rows,
        test_spectral_scores_are_shift_invariant,
        test_subspace_reconstruction_orthogonal_component,
        test_subspace_reconstruction_rejects_bad_validation,
        test_max_f1_flags,
        test_mad_anomaly_index,
        test_build_detection_input_composition,
        test_synthesize_trigger_small_run,
        test_synthesize_all_triggers_records,
        test_neuron_pruning_endpoints_and_mask_restore,
        test_subspace_reconstruction_on_indistinguishable_rows,
        test_trigger_synthesis_flags_nothing_without_a_backdoor,
        test_sparsity_weight_shrinks_the_mask,
    ])


if __name__ == "__main__":
    sys.exit(0 if main() else 1)
