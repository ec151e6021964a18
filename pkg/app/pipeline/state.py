"""State definitions for the experiment pipeline graph."""

from typing import Annotated, Any, Dict, List, Optional, TypedDict


class PipelineState(TypedDict, total=False):
    """State for the experiment pipeline graph."""
    # Request
    config: Annotated[Any, "Validated ExperimentConfig for this run"]
    run_dir: Annotated[str, "Directory owned exclusively by this run"]
    stages: Annotated[List[str], "Requested stages: gen-data, train, eval, distances, defend, synthesize, prune"]
    labels: Annotated[Dict[str, str], "Sweep coordinates recorded in the manifest"]
    overwrite: Annotated[bool, "Recompute even when a complete run with the same config hash exists"]
    verbose: Annotated[bool, "Print stage banners and progress bars"]

    # Routing & control
    run_status: Annotated[str, "RUN when stages execute, REUSED when a finished run was found"]
    manifest: Annotated[Any, "RunManifest, rewritten as stages finish"]

    # Data artifacts
    split: Annotated[Any, "DatasetSplit with train and test sets"]
    trigger: Annotated[Any, "TriggerSpec of the attack"]
    poison: Annotated[Any, "PoisonSplit with benign D and malicious U"]
    asr_test: Annotated[Any, "Triggered non-target test images"]

    # Model artifacts
    model: Annotated[Any, "TappedModel, freshly built or loaded from model.blab"]
    train_log: Annotated[Any, "TrainLog of the training stage"]
    metrics: Annotated[Dict[str, float], "Benign accuracy and attack success rate"]

    # Analysis artifacts
    distance_report: Annotated[Any, "DistanceReport of the distances stage"]
    detection_reports: Annotated[List[Any], "DetectionReport per (defense, level, N, r')"]
    trigger_scan: Annotated[Any, "TriggerScan of the synthesis stage"]
    pruning_curve: Annotated[List[Any], "PruningPoint per fraction"]

    # Failure
    failure_reason: Annotated[Optional[str], "Why the run stopped early"]
