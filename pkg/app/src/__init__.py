"""
Workbench library package

Numeric core, model zoo, data and poisoning, distances, training and defenses,
plus the repositories that persist checkpoints, datasets and result tables.
"""

from .checkpoint_repository import CheckpointRepository
from .dataset_repository import DatasetRepository
from .results_repository import ResultsRepository

__all__ = [
    "CheckpointRepository",
    "DatasetRepository",
    "ResultsRepository",
]
