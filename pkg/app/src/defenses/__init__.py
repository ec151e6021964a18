"""Difference-based detectors, trigger synthesis and neuron pruning."""

from app.src.defenses.activation_clustering import activation_clustering
from app.src.defenses.detection import (
    DetectionInput,
    DetectionReport,
    build_detection_input,
    detection_composition,
    predicted_as,
    score_flags,
)
from app.src.defenses.neural_cleanse import (
    SynthesizedTrigger,
    TriggerScan,
    mad_anomaly_index,
    synthesize_all_triggers,
    synthesize_trigger,
)
from app.src.defenses.pruning import PruningPoint, neuron_prune, pruning_frame, rank_channels
from app.src.defenses.spectral_signatures import spectral_signatures
from app.src.defenses.subspace_reconstruction import subspace_reconstruction

__all__ = [
    "DetectionInput",
    "DetectionReport",
    "PruningPoint",
    "SynthesizedTrigger",
    "TriggerScan",
    "activation_clustering",
    "build_detection_input",
    "detection_composition",
    "mad_anomaly_index",
    "neuron_prune",
    "predicted_as",
    "pruning_frame",
    "rank_channels",
    "score_flags",
    "spectral_signatures",
    "subspace_reconstruction",
    "synthesize_all_triggers",
    "synthesize_trigger",
]
