"""Run-directory layout and manifest bookkeeping shared by the pipeline nodes."""

import time
from pathlib import Path
from typing import Dict, Optional

from app.cli.models.run_manifest import RunManifest
from app.pipeline.state import PipelineState
from app.src.results_repository import ResultsRepository

ARTIFACTS = {
    "config": "config.txt",
    "manifest": "manifest.json",
    "train_data": "data/train.bdat",
    "test_data": "data/test.bdat",
    "poisoned_data": "data/poisoned_train.bdat",
    "model": "model.blab",
    "train_log": "train_log.csv",
    "metrics": "metrics.csv",
    "distances": "distances.csv",
    "detection": "detection.csv",
    "triggers": "triggers/index.jsonl",
    "pruning": "pruning.csv",
}

# artifacts whose presence means a stage already ran
STAGE_ARTIFACTS = {
    "gen-data": ("train_data", "test_data"),
    "train": ("model", "train_log"),
    "eval": ("metrics",),
    "distances": ("distances",),
    "defend": ("detection",),
    "synthesize": ("triggers",),
    "prune": ("pruning",),
}


def artifact_path(state: PipelineState, name: str) -> Path:
    return Path(state["run_dir"]) / ARTIFACTS[name]


def write_manifest(run_dir: str, manifest: RunManifest) -> None:
    ResultsRepository().write_json(Path(run_dir) / ARTIFACTS["manifest"], manifest.model_dump(mode="json"))


def read_manifest(run_dir: str) -> Optional[RunManifest]:
    path = Path(run_dir) / ARTIFACTS["manifest"]
    if not path.exists():
        return None
    return RunManifest.model_validate(ResultsRepository().read_json(path))


def banner(state: PipelineState, title: str) -> None:
    if state.get("verbose"):
        print("=" * 50)
        print(title)
        print("=" * 50)


def log(state: PipelineState, message: str) -> None:
    if state.get("verbose"):
        print(message)


def finish_stage(state: PipelineState, stage: str, started: float, *artifact_names: str) -> RunManifest:
    """Record timing and artifact paths of a finished stage and rewrite the manifest."""
    manifest: RunManifest = state["manifest"]
    manifest.timings[stage] = round(time.perf_counter() - started, 3)
    for name in artifact_names:
        manifest.artifacts[name] = ARTIFACTS[name]
    write_manifest(state["run_dir"], manifest)
    return manifest
