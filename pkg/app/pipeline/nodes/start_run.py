"""Start run node - writes config and manifest before any result."""

import time
from pathlib import Path

from app.cli.config_loader import config_hash, dump_config
from app.cli.models.run_manifest import RunManifest
from app.pipeline.run_files import ARTIFACTS, STAGE_ARTIFACTS, banner, finish_stage, log, read_manifest
from app.pipeline.state import PipelineState
from app.src.seeding import derive_seed

SEEDED_STAGES = ("dataset", "trigger", "poison", "model", "train", "measure", "distances", "detect", "synthesize")


def _already_done(run_dir: Path, manifest: RunManifest, stages) -> bool:
    if manifest.status != "complete":
        return False
    for stage in stages:
        for name in STAGE_ARTIFACTS.get(stage, ()):
            if name not in manifest.artifacts or not (run_dir / ARTIFACTS[name]).exists():
                return False
    return True


def start_run(state: PipelineState) -> PipelineState:
    """
    Prepare the run directory.

    Reads: config, run_dir, stages, overwrite
    Writes: manifest, run_status

    A complete run with the same config hash whose requested artifacts exist is
    reused unless ``overwrite`` is set. A directory holding a different config
    is an error unless ``overwrite`` is set.
    """
    started = time.perf_counter()
    config = state["config"]
    run_dir = Path(state["run_dir"])
    digest = config_hash(config)
    banner(state, f"Start Run: {run_dir}")

    existing = read_manifest(str(run_dir))
    overwrite = state.get("overwrite", False)
    if existing is not None and not overwrite:
        if existing.config_hash != digest:
            raise FileExistsError(
                f"{run_dir} holds a run with config hash {existing.config_hash}; "
                f"this config hashes to {digest} (use --overwrite to replace it)"
            )
        if _already_done(run_dir, existing, state.get("stages", [])):
            log(state, f"Start Run: reusing complete run {digest}")
            return {"manifest": existing, "run_status": "REUSED"}

    if existing is not None and not overwrite:
        manifest = existing
        manifest.status = "running"
        manifest.labels.update(state.get("labels", {}))
    else:
        manifest = RunManifest(
            config_hash=digest,
            master_seed=config.seed,
            labels=dict(state.get("labels", {})),
            seeds={stage: derive_seed(config.seed, stage) for stage in SEEDED_STAGES},
        )
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / ARTIFACTS["config"]).write_text(dump_config(config), encoding="utf-8")
    state = {**state, "manifest": manifest}
    finish_stage(state, "start", started, "config")
    log(state, f"Start Run: config hash {digest}, stages {state.get('stages')}")
    return {"manifest": manifest, "run_status": "RUN"}
