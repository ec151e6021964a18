"""Generate data node - builds the train/test split and the trigger."""

import time

from app.pipeline.run_files import artifact_path, banner, finish_stage, log
from app.pipeline.state import PipelineState
from app.src.dataset import DatasetSplit
from app.src.dataset_repository import DatasetRepository
from app.src.synthetic_data import synth_dataset
from app.src.triggers import make_trigger


def load_split(config, seed: int) -> DatasetSplit:
    d = config.dataset
    if d.source == "synthetic":
        return synth_dataset(seed, d.n_per_class, d.num_classes, d.height, d.width, d.channels)
    repository = DatasetRepository()
    if d.source == "bdat":
        split = DatasetSplit(train=repository.load(d.train_path), test=repository.load(d.test_path))
    else:
        split = DatasetSplit(train=repository.load_cifar10(d.cifar_train), test=repository.load_cifar10(d.cifar_test))
    for name, part in (("train", split.train), ("test", split.test)):
        if tuple(part.image_shape) != d.image_shape or part.num_classes != d.num_classes:
            raise ValueError(
                f"{name} data has images {tuple(part.image_shape)} and {part.num_classes} classes; "
                f"config expects {d.image_shape} and {d.num_classes}"
            )
    return split


def generate_data(state: PipelineState) -> PipelineState:
    """
    Reads: config, manifest.seeds
    Writes: split, trigger (and data/*.bdat when gen-data is requested)
    """
    started = time.perf_counter()
    config = state["config"]
    seeds = state["manifest"].seeds
    banner(state, "Generate Data: building dataset and trigger")

    split = load_split(config, seeds["dataset"])
    a = config.attack
    trigger = make_trigger(
        a.kind, config.dataset.image_shape, seed=seeds["trigger"], patch_size=a.patch_size, alpha=a.alpha,
        amplitude=a.amplitude, frequency=a.frequency, grid_size=a.grid_size, strength=a.strength,
    )
    log(state, f"Generate Data: {len(split.train)} train / {len(split.test)} test images, trigger {a.kind}")

    written = []
    if "gen-data" in state.get("stages", []):
        repository = DatasetRepository()
        repository.save(artifact_path(state, "train_data"), split.train)
        repository.save(artifact_path(state, "test_data"), split.test)
        written = ["train_data", "test_data"]
    finish_stage(state, "gen-data", started, *written)
    return {"split": split, "trigger": trigger}
