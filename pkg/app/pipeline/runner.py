"""Run one experiment through the pipeline graph."""

from pathlib import Path
from typing import Dict, Optional, Sequence, Union

from app.pipeline.graph import create_pipeline
from app.pipeline.run_files import read_manifest, write_manifest
from app.pipeline.state import PipelineState

ALL_STAGES = ("gen-data", "train", "eval", "distances", "defend", "synthesize", "prune")
FULL_RUN = ("train", "eval", "distances", "defend", "synthesize", "prune")


def run_labels(config) -> Dict[str, str]:
    """Sweep coordinates describing a config: attack, method, lambda, kernel, seed."""
    return {
        "attack": config.attack.kind,
        "method": config.train.method,
        "lambda": f"{config.train.lam:g}",
        "kernel": config.train.kernel,
        "seed": str(config.seed),
        "target": str(config.attack.target),
    }


def run_experiment(
    config,
    run_dir: Union[str, Path],
    stages: Sequence[str] = FULL_RUN,
    overwrite: bool = False,
    labels: Optional[Dict[str, str]] = None,
    verbose: bool = False,
) -> PipelineState:
    """
    Execute the requested stages for one config in ``run_dir``.

    Returns:
        Final pipeline state.

    Raises:
        ValueError: On unknown stage names. Stage errors propagate after the
            manifest is marked failed.
    """
    unknown = [s for s in stages if s not in ALL_STAGES]
    if unknown:
        raise ValueError(f"Unknown stages {unknown}; expected a subset of {ALL_STAGES}")
    initial: PipelineState = {
        "config": config,
        "run_dir": str(run_dir),
        "stages": list(stages),
        "labels": labels if labels is not None else run_labels(config),
        "overwrite": overwrite,
        "verbose": verbose,
    }
    try:
        return create_pipeline().invoke(initial)
    except Exception:
        manifest = read_manifest(str(run_dir))
        if manifest is not None and manifest.status == "running":
            manifest.status = "failed"
            write_manifest(str(run_dir), manifest)
        raise
