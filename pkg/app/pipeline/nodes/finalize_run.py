"""Finalize run node - marks the manifest complete."""

from app.pipeline.run_files import banner, write_manifest
from app.pipeline.state import PipelineState


def finalize_run(state: PipelineState) -> PipelineState:
    """
    Reads: manifest
    Writes: manifest (status = complete)
    """
    manifest = state["manifest"]
    manifest.status = "complete"
    write_manifest(state["run_dir"], manifest)
    banner(state, f"Finalize Run: complete, stage timings {manifest.timings}")
    return {"manifest": manifest}
