"""
Pure routing logic for the experiment pipeline.

Routing functions read the requested stages from the state and return the name
of the next node; they do no work themselves.
"""

from typing import List

from app.pipeline.state import PipelineState

ANALYSIS_STAGES = ("distances", "defend", "synthesize", "prune")
ANALYSIS_NODES = {
    "distances": "measure_distances",
    "defend": "run_detection",
    "synthesize": "synthesize_triggers",
    "prune": "prune_neurons",
}
MODEL_STAGES = ("train", "eval") + ANALYSIS_STAGES


def route_after_start(state: PipelineState) -> str:
    """REUSED ends the run; RUN goes on to data generation."""
    return state.get("run_status", "RUN")


def route_after_poison(state: PipelineState) -> str:
    """Data-only requests stop before any model is touched."""
    stages: List[str] = state.get("stages", [])
    return "prepare_model" if any(s in stages for s in MODEL_STAGES) else "finalize_run"


def route_after_model(state: PipelineState) -> str:
    return "train_model" if "train" in state.get("stages", []) else "evaluate_model"


def _next_analysis(state: PipelineState, after: str) -> str:
    stages = state.get("stages", [])
    start = ANALYSIS_STAGES.index(after) + 1 if after in ANALYSIS_STAGES else 0
    for stage in ANALYSIS_STAGES[start:]:
        if stage in stages:
            return ANALYSIS_NODES[stage]
    return "finalize_run"


def route_after_evaluate(state: PipelineState) -> str:
    return _next_analysis(state, "eval")


def route_after_distances(state: PipelineState) -> str:
    return _next_analysis(state, "distances")


def route_after_defend(state: PipelineState) -> str:
    return _next_analysis(state, "defend")


def route_after_synthesize(state: PipelineState) -> str:
    return _next_analysis(state, "synthesize")
