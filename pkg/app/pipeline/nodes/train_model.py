"""Train model node - runs backdoor training and saves checkpoint and log."""

import time

from app.pipeline.run_files import artifact_path, banner, finish_stage
from app.pipeline.state import PipelineState
from app.src.checkpoint_repository import CheckpointRepository
from app.src.results_repository import ResultsRepository
from app.src.seeding import derive_seed
from app.src.trainer import train


def train_model(state: PipelineState) -> PipelineState:
    """
    Reads: model, poison, split, asr_test, config.train
    Writes: model, train_log (model.blab, train_log.csv)
    """
    started = time.perf_counter()
    config = state["config"]
    banner(state, f"Train Model: {config.train.method}")
    train_cfg = config.train.model_copy(update={"seed": derive_seed(config.seed, "train", config.train.seed)})
    model, train_log = train(
        state["model"],
        state["poison"],
        train_cfg,
        eval_sets=(state["split"].test, state["asr_test"]),
        verbose=state.get("verbose", False),
    )
    CheckpointRepository().save_model(artifact_path(state, "model"), model)
    ResultsRepository().write_csv(artifact_path(state, "train_log"), train_log.to_frame())
    finish_stage(state, "train", started, "model", "train_log")
    return {"model": model, "train_log": train_log}
