"""Synthesize triggers node - reverse-engineered trigger per class with MAD flags."""

import time

import numpy as np

from app.pipeline.pools import synthesis_images
from app.pipeline.run_files import artifact_path, banner, finish_stage, log
from app.pipeline.state import PipelineState
from app.src.dataset import Dataset
from app.src.dataset_repository import DatasetRepository
from app.src.defenses import synthesize_all_triggers
from app.src.results_repository import ResultsRepository


def _single_image(pixels: np.ndarray, label: int, num_classes: int) -> Dataset:
    if pixels.ndim == 2:
        pixels = pixels[:, :, None]
    return Dataset(
        images=pixels[None],
        labels=np.array([label]),
        malicious=np.array([True]),
        origin_labels=np.array([label]),
        num_classes=num_classes,
    )


def synthesize_triggers(state: PipelineState) -> PipelineState:
    """
    Reads: model, split, config.defense
    Writes: trigger_scan (triggers/index.jsonl, triggers/class_<j>_{mask,pattern}.bdat)
    """
    started = time.perf_counter()
    config = state["config"]
    d = config.defense
    model = state["model"]
    banner(state, "Synthesize Triggers")

    scan = synthesize_all_triggers(
        model,
        synthesis_images(config, state["split"]),
        gamma=d.nc_gamma,
        steps=d.nc_steps,
        lr=d.nc_lr,
        batch_size=d.nc_batch_size,
        seed=state["manifest"].seeds["synthesize"],
        verbose=state.get("verbose", False),
    )

    index_path = artifact_path(state, "triggers")
    repository = DatasetRepository()
    records = scan.to_records()
    for trigger, record in zip(scan.triggers, records):
        mask_name = f"class_{trigger.target}_mask.bdat"
        pattern_name = f"class_{trigger.target}_pattern.bdat"
        repository.save(index_path.parent / mask_name, _single_image(trigger.mask, trigger.target, model.num_classes))
        repository.save(index_path.parent / pattern_name, _single_image(trigger.pattern, trigger.target, model.num_classes))
        record["mask_file"] = mask_name
        record["pattern_file"] = pattern_name
    ResultsRepository().write_jsonl(index_path, records)
    log(state, f"Synthesize Triggers: l1 norms {[round(t.l1, 3) for t in scan.triggers]}, flagged {scan.flagged}")
    finish_stage(state, "synthesize", started, "triggers")
    return {"trigger_scan": scan}
