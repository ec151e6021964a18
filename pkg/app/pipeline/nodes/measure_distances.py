"""Measure distances node - MMD/ED/SWD difference report with baselines."""

import time
from pathlib import Path

from app.pipeline.pools import measurement_sets
from app.pipeline.run_files import artifact_path, banner, finish_stage, log
from app.pipeline.state import PipelineState
from app.src.distances import difference_report
from app.src.kernels import kernel_preset
from app.src.results_repository import ResultsRepository


def measure_distances(state: PipelineState) -> PipelineState:
    """
    Reads: model, split, trigger, config.measure
    Writes: distance_report (distances.csv, features_<level>.npz)
    """
    started = time.perf_counter()
    config = state["config"]
    m = config.measure
    banner(state, "Measure Distances")
    benign, malicious = measurement_sets(config, state["split"], state["trigger"])
    report = difference_report(
        state["model"],
        benign,
        malicious,
        target=config.attack.target,
        levels=m.levels,
        metrics=m.metrics,
        kernel=kernel_preset(m.kernel),
        sample_size=m.sample_size,
        repeats=m.repeats,
        projections=m.projections,
        seed=state["manifest"].seeds["distances"],
        pooled=m.pooled,
        verbose=state.get("verbose", False),
    )
    repository = ResultsRepository()
    repository.write_csv(artifact_path(state, "distances"), report.to_frame())
    manifest = state["manifest"]
    for level, samples in report.samples.items():
        name = f"features_{level}.npz"
        repository.save_features(Path(state["run_dir"]) / name, samples)
        manifest.artifacts[f"features_{level}"] = name
    log(state, f"Measure Distances: ARO per level {report.aro}")
    finish_stage(state, "distances", started, "distances")
    return {"distance_report": report}
