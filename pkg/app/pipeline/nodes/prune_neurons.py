"""Prune neurons node - BA/ASR curve while masking s3 channels."""

import time

from app.pipeline.run_files import artifact_path, banner, finish_stage
from app.pipeline.state import PipelineState
from app.src.defenses import neuron_prune, pruning_frame
from app.src.results_repository import ResultsRepository


def prune_neurons(state: PipelineState) -> PipelineState:
    """
    Reads: model, trigger, split.test, config.defense.prune_fractions
    Writes: pruning_curve (pruning.csv)
    """
    started = time.perf_counter()
    config = state["config"]
    banner(state, "Prune Neurons")
    points = neuron_prune(
        state["model"],
        state["trigger"],
        state["split"].test,
        fractions=config.defense.prune_fractions,
        target=config.attack.target,
        verbose=state.get("verbose", False),
    )
    ResultsRepository().write_csv(artifact_path(state, "pruning"), pruning_frame(points))
    finish_stage(state, "prune", started, "pruning")
    return {"pruning_curve": points}
