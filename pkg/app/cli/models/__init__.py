from app.cli.models.experiment_config import ExperimentConfig
from app.cli.models.run_manifest import RunManifest

__all__ = ["ExperimentConfig", "RunManifest"]
