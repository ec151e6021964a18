"""Poison data node - builds the malicious set U and the triggered test set."""

import time

from app.pipeline.run_files import artifact_path, banner, finish_stage, log
from app.pipeline.state import PipelineState
from app.src.dataset_repository import DatasetRepository
from app.src.poison import build_asr_testset, poison_split


def poison_data(state: PipelineState) -> PipelineState:
    """
    Reads: split, trigger, config.attack
    Writes: poison, asr_test
    """
    started = time.perf_counter()
    config = state["config"]
    split, trigger = state["split"], state["trigger"]
    banner(state, "Poison Data: fusing triggers")

    poison = poison_split(split.train, trigger, config.attack.target, config.attack.ratio, state["manifest"].seeds["poison"])
    asr_test = build_asr_testset(split.test, trigger, config.attack.target)
    log(state, f"Poison Data: |D|={len(poison.benign)}, |U|={len(poison.malicious)}, r={poison.ratio:.4f}, "
               f"triggered test images={len(asr_test)}")

    written = []
    if "gen-data" in state.get("stages", []):
        DatasetRepository().save(artifact_path(state, "poisoned_data"), poison.combined())
        written = ["poisoned_data"]
    finish_stage(state, "poison", started, *written)
    return {"poison": poison, "asr_test": asr_test}
