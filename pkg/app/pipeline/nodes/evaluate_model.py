"""Evaluate model node - benign accuracy and attack success rate."""

import time

import pandas as pd

from app.pipeline.run_files import artifact_path, banner, finish_stage, log
from app.pipeline.state import PipelineState
from app.src.results_repository import ResultsRepository
from app.src.trainer import evaluate


def evaluate_model(state: PipelineState) -> PipelineState:
    """
    Reads: model, split.test, asr_test
    Writes: metrics (metrics.csv)
    """
    started = time.perf_counter()
    banner(state, "Evaluate Model")
    ba, asr = evaluate(state["model"], state["split"].test, state["asr_test"], state["config"].attack.target)
    log(state, f"Evaluate Model: BA={ba:.4f} ASR={asr:.4f}")
    ResultsRepository().write_csv(artifact_path(state, "metrics"), pd.DataFrame([{"ba": ba, "asr": asr}]))
    finish_stage(state, "eval", started, "metrics")
    return {"metrics": {"ba": ba, "asr": asr}}
