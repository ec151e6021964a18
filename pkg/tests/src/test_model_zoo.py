"""
Test script for the tapped classifiers

Checks tap shapes for both families, seeded initialization, feature
extraction and the channel masks used by pruning.
"""

import sys
from pathlib import Path

import numpy as np

project_root = Path(__file__).parent.parent.parent
if str(project_root) not in sys.path:
    sys.path.insert(0, str(project_root))

from tests.helpers import print_info, random_images, run_tests, tiny_model_config
from app.src.model_zoo import TAP_LEVELS, ModelConfig, build_model, extract_features, images_to_tensor
from app.src.synthetic_data import synth_pool
from app.src.tensor import no_grad

EXPECTED_TAPS = {"s1": (32, 16, 16), "s2": (64, 8, 8), "s3": (128, 4, 4)}


def _tap_shapes(family: str):
    model = build_model(ModelConfig(family=family, num_classes=10, input_shape=(32, 32, 3)), seed=0)
    with no_grad():
        logits, taps = model.forward(images_to_tensor(random_images(0, 2, size=32)), return_taps=True)
    assert logits.shape == (2, 10)
    return {level: tap.shape[1:] for level, tap in taps.items()}


def test_plain_tap_shapes_at_32():
    shapes = _tap_shapes("plain")
    assert shapes == EXPECTED_TAPS, shapes


def test_residual_tap_shapes_at_32():
    shapes = _tap_shapes("residual")
    assert list(shapes) == list(TAP_LEVELS)
    assert shapes == EXPECTED_TAPS, shapes


def test_flattened_s3_rows_have_2048_entries():
    model = build_model(ModelConfig(num_classes=10, input_shape=(32, 32, 3)), seed=1)
    features = extract_features(model, random_images(1, 3, size=32), "s3", population="benign")
    assert features.matrix.shape == (3, 2048)
    assert features.population == "benign" and len(features) == 3
    pooled = extract_features(model, random_images(1, 3, size=32), "s3", pooled=True)
    assert pooled.matrix.shape == (3, 128)


def test_same_seed_same_parameters():
    first = build_model(tiny_model_config(), seed=7).state_dict()
    second = build_model(tiny_model_config(), seed=7).state_dict()
    other = build_model(tiny_model_config(), seed=8).state_dict()
    assert list(first) == list(second)
    for name in first:
        assert first[name].tobytes() == second[name].tobytes(), name
    assert any(first[n].tobytes() != other[n].tobytes() for n in first if n.endswith("weight"))


def test_initial_biases_and_batch_norm_affine():
    state = build_model(tiny_model_config("residual"), seed=0).state_dict()
    for name, value in state.items():
        if name.endswith(".bias") or name.endswith(".beta"):
            assert not value.any(), name
        if name.endswith(".gamma"):
            assert np.all(value == 1.0), name


def test_taps_are_non_negative():
    for family in ("plain", "residual"):
        model = build_model(tiny_model_config(family), seed=2)
        for level in TAP_LEVELS:
            assert model.tap_activations(random_images(2, 4), level).min() >= 0.0, (family, level)


def test_taps_do_not_change_logits():
    model = build_model(tiny_model_config(), seed=3)
    x = images_to_tensor(random_images(3, 4))
    with no_grad():
        plain = model.forward(x).data
        logits, _ = model.forward(x, return_taps=True)
    assert plain.tobytes() == logits.data.tobytes()


def test_zero_mask_silences_a_level():
    model = build_model(tiny_model_config(), seed=4)
    model.channel_masks["s3"] = np.zeros(128)
    images = random_images(4, 3)
    assert not model.tap_activations(images, "s3").any()
    # fc bias is zero at initialization
    np.testing.assert_array_equal(model.logits(images), np.zeros((3, 3)))
    model.channel_masks.clear()
    assert model.tap_activations(images, "s3").any()


def test_load_state_dict_rejects_wrong_keys():
    model = build_model(tiny_model_config(), seed=0)
    state = model.state_dict()
    state.pop(next(iter(state)))
    try:
        model.load_state_dict(state)
    except ValueError as e:
        print_info(str(e)[:80])
        return
    raise AssertionError("incomplete state accepted")


def test_frozen_restores_requires_grad():
    model = build_model(tiny_model_config(), seed=0)
    with model.frozen():
        assert not any(p.requires_grad for p in model.named_parameters().values())
    assert all(p.requires_grad for p in model.named_parameters().values())


def test_input_shape_must_be_multiple_of_8():
    try:
        ModelConfig(input_shape=(12, 12, 3))
    except ValueError:
        return
    raise AssertionError("12x12 input accepted")


def test_untrained_model_is_at_chance():
    pool = synth_pool(0, per_class=10, num_classes=10, height=8, width=8, channels=3)
    accuracies = [
        float(np.mean(build_model(tiny_model_config(num_classes=10), seed=seed).predict(pool.images) == pool.labels))
        for seed in range(10)
    ]
    print_info(f"untrained accuracies: {np.round(accuracies, 3).tolist()}")
    assert np.mean(accuracies) <= 0.2


def test_extract_features_is_repeatable():
    model = build_model(tiny_model_config(), seed=1)
    images = random_images(4, 6)
    for level in TAP_LEVELS:
        first = extract_features(model, images, level).matrix
        assert extract_features(model, images, level).matrix.tobytes() == first.tobytes()


def test_identical_inputs_give_identical_rows():
    model = build_model(tiny_model_config(), seed=2)
    image = random_images(5, 1)
    images = np.concatenate([image, random_images(6, 2), image])
    for level in TAP_LEVELS:
        matrix = extract_features(model, images, level).matrix
        np.testing.assert_allclose(matrix[0], matrix[3], rtol=0, atol=1e-12)


def main() -> bool:
    return run_tests("Model Zoo Test Suite", [
        test_plain_tap_shapes_at_32,
        test_residual_tap_shapes_at_32,
        test_flattened_s3_rows_have_2048_entries,
        test_same_seed_same_parameters,
        test_initial_biases_and_batch_norm_affine,
        test_taps_are_non_negative,
        test_taps_do_not_change_logits,
        test_zero_mask_silences_a_level,
        test_load_state_dict_rejects_wrong_keys,
        test_frozen_restores_requires_grad,
        test_input_shape_must_be_multiple_of_8,
        test_untrained_model_is_at_chance,
        test_extract_features_is_repeatable,
        test_identical_inputs_give_identical_rows,
    ])


if __name__ == "__main__":
    sys.exit(0 if main() else 1)
