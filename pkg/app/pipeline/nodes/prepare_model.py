"""Prepare model node - builds a fresh model or loads the run's checkpoint."""

import time

from app.pipeline.run_files import artifact_path, banner, finish_stage, log
from app.pipeline.state import PipelineState
from app.src.checkpoint_repository import CheckpointRepository
from app.src.model_zoo import build_model


def prepare_model(state: PipelineState) -> PipelineState:
    """
    Reads: config, manifest.seeds, stages
    Writes: model

    Raises:
        FileNotFoundError: If no training is requested and model.blab is missing.
    """
    started = time.perf_counter()
    config = state["config"]
    banner(state, "Prepare Model")
    model = build_model(config.model_settings(), state["manifest"].seeds["model"])
    if "train" in state.get("stages", []):
        log(state, f"Prepare Model: fresh {config.model.family} model, width {config.model.width}")
    else:
        path = artifact_path(state, "model")
        if not path.exists():
            raise FileNotFoundError(f"Checkpoint not found: {path} (run the train stage first)")
        CheckpointRepository().load_model(path, model)
        log(state, f"Prepare Model: loaded {path}")
    finish_stage(state, "model", started)
    return {"model": model}
