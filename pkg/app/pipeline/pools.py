"""Measurement and detection populations drawn for one run."""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from app.src.dataset import Dataset, DatasetSplit
from app.src.poison import build_asr_testset
from app.src.seeding import derive_seed
from app.src.synthetic_data import synth_class_samples, synth_pool
from app.src.triggers import TriggerSpec, apply_trigger


@dataclass
class DetectionPools:
    """Candidates before filtering by prediction: benign target-class, triggered, SR validation."""
    benign: np.ndarray
    malicious: np.ndarray
    validation: np.ndarray


def measurement_sets(config, split: DatasetSplit, trigger: TriggerSpec) -> Tuple[Dataset, Dataset]:
    """
    Benign and triggered populations for the difference report.

    Synthetic runs draw a fresh balanced pool; file-backed runs use the test split.
    """
    target = config.attack.target
    d = config.dataset
    if d.source == "synthetic":
        benign = synth_pool(derive_seed(config.seed, "measure"), d.measure_per_class, d.num_classes, d.height, d.width, d.channels)
    else:
        benign = split.test
    return benign, build_asr_testset(benign, trigger, target)


def detection_pools(config, split: DatasetSplit, trigger: TriggerSpec) -> DetectionPools:
    """
    Candidate images for the detection grid.

    Synthetic runs over-draw fresh samples (``defense.candidate_pool_size`` per
    population, 20% extra validation) so the largest (N, r') cell can be
    filled after filtering by prediction.
    """
    target = config.attack.target
    d = config.dataset
    size = config.defense.candidate_pool_size
    if d.source == "synthetic":
        rng = np.random.default_rng(derive_seed(config.seed, "detect"))
        shape = (d.num_classes, d.height, d.width, d.channels)
        benign = synth_class_samples(rng, target, size, *shape)
        others = [k for k in range(d.num_classes) if k != target]
        per_class = -(-size // len(others))
        sources = np.concatenate([synth_class_samples(rng, k, per_class, *shape) for k in others])
        validation = synth_class_samples(rng, target, int(np.ceil(1.2 * config.defense.validation_size)), *shape)
        return DetectionPools(benign=benign, malicious=apply_trigger(sources, trigger), validation=validation)

    test, train = split.test, split.train
    benign = test.images[test.labels == target]
    malicious = build_asr_testset(test, trigger, target).images
    validation = train.images[(train.labels == target) & ~train.malicious]
    return DetectionPools(benign=benign, malicious=malicious, validation=validation)


def synthesis_images(config, split: DatasetSplit) -> np.ndarray:
    """Clean validation images, ``defense.nc_per_class`` per class where available."""
    d = config.dataset
    if d.source == "synthetic":
        pool = synth_pool(derive_seed(config.seed, "synthesize-data"), config.defense.nc_per_class,
                          d.num_classes, d.height, d.width, d.channels)
        return pool.images
    test = split.test
    picks = [np.flatnonzero(test.labels == k)[:config.defense.nc_per_class] for k in range(test.num_classes)]
    return test.images[np.concatenate(picks)]
