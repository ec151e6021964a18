"""Manifest written into every run directory before any result."""

import platform
from importlib import metadata
from typing import Dict, Literal

from pydantic import BaseModel, Field

TRACKED_PACKAGES = ("numpy", "scipy", "scikit-learn", "pandas", "pydantic", "langgraph")


def package_versions() -> Dict[str, str]:
    versions = {"python": platform.python_version()}
    for name in TRACKED_PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "unknown"
    return versions


class RunManifest(BaseModel):
    """Config hash, seeds, artifact paths, versions and per-stage timings of one run."""

    config_hash: str = Field(description="blake2b digest of the canonical config text")
    master_seed: int
    labels: Dict[str, str] = Field(default_factory=dict, description="Sweep coordinates: attack, method, lambda, kernel, seed")
    seeds: Dict[str, int] = Field(default_factory=dict, description="Derived seed per stochastic stage")
    artifacts: Dict[str, str] = Field(default_factory=dict, description="Artifact name -> path relative to the run directory")
    versions: Dict[str, str] = Field(default_factory=package_versions)
    timings: Dict[str, float] = Field(default_factory=dict, description="Wall-clock seconds per stage")
    status: Literal["running", "complete", "failed"] = "running"
