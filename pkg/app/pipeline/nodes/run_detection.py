"""Run detection node - AC, SS and SR over levels and (N, r') cells."""

import time
from typing import Callable, List, Optional, Tuple

import numpy as np
import pandas as pd

from app.pipeline.pools import detection_pools
from app.pipeline.run_files import artifact_path, banner, finish_stage, log
from app.pipeline.state import PipelineState
from app.src.defenses import (
    DetectionReport,
    activation_clustering,
    build_detection_input,
    spectral_signatures,
    subspace_reconstruction,
)
from app.src.model_zoo import TappedModel, extract_features
from app.src.results_repository import ResultsRepository
from app.src.seeding import derive_seed

DETECTION_COLUMNS = ["defense", "level", "N", "r_prime", "precision", "recall", "f1", "flags", "status"]


def skipped_row(defense: str, level: str, n: int, r_prime: float) -> dict:
    return {"defense": defense, "level": level, "N": n, "r_prime": r_prime, "precision": np.nan,
            "recall": np.nan, "f1": np.nan, "flags": np.nan, "status": "skipped"}


def detect_grid(
    model: TappedModel,
    benign: np.ndarray,
    malicious: np.ndarray,
    validation: np.ndarray,
    settings,
    seed: int,
    verbose: bool = False,
    report_line: Optional[Callable[[str], None]] = None,
) -> Tuple[List[DetectionReport], pd.DataFrame]:
    """
    Screen every (level, N, r') cell with every configured defense.

    Args:
        benign, malicious, validation: Candidates already predicted as the target.
        settings: The defense config section.
        seed: Detection-stage seed; each cell derives its own sample seed.

    Returns:
        The reports plus one table row per (defense, level, cell). Cells whose
        composition the candidates cannot fill get rows with status "skipped"
        and empty scores.
    """
    say = report_line or (lambda message: None)
    reports: List[DetectionReport] = []
    rows: List[dict] = []
    for level in settings.levels:
        validation_features = (
            extract_features(model, validation, level, population="validation") if "SR" in settings.defenses else None
        )
        for n, r_prime in settings.grid:
            try:
                inp = build_detection_input(
                    model, benign, malicious, level, n, r_prime,
                    seed=derive_seed(seed, "cell", f"{level}-{n}-{r_prime}"),
                )
            except ValueError as e:
                say(f"Run Detection: skipping {level} N={n} r'={r_prime}: {e}")
                rows.extend(skipped_row(defense, level, n, r_prime) for defense in settings.defenses)
                continue
            for defense in settings.defenses:
                if defense == "AC":
                    report = activation_clustering(inp, n_components=settings.ac_components, seed=seed, verbose=verbose)
                elif defense == "SS":
                    report = spectral_signatures(inp, removal_multiplier=settings.ss_multiplier)
                else:
                    report = subspace_reconstruction(inp, validation_features, energy=settings.sr_energy)
                reports.append(report)
                rows.append({**report.to_row(), "status": "ok"})
                say(f"Run Detection: {defense} {level} N={n} r'={r_prime} "
                    f"P={report.precision:.3f} R={report.recall:.3f} F1={report.f1:.3f}")
    return reports, pd.DataFrame(rows, columns=DETECTION_COLUMNS)


def run_detection(state: PipelineState) -> PipelineState:
    """
    Reads: model, split, trigger, config.defense
    Writes: detection_reports (detection.csv)
    """
    started = time.perf_counter()
    config = state["config"]
    d = config.defense
    model = state["model"]
    target = config.attack.target
    seed = state["manifest"].seeds["detect"]
    banner(state, "Run Detection")

    pools = detection_pools(config, state["split"], state["trigger"])
    benign = pools.benign[model.predict(pools.benign) == target]
    malicious = pools.malicious[model.predict(pools.malicious) == target]
    validation = pools.validation[model.predict(pools.validation) == target][:d.validation_size]
    log(state, f"Run Detection: candidates predicted as {target}: benign={len(benign)}, "
               f"malicious={len(malicious)}, validation={len(validation)}")

    reports, frame = detect_grid(
        model, benign, malicious, validation, d, seed,
        verbose=state.get("verbose", False),
        report_line=lambda message: log(state, message),
    )
    skipped = int((frame["status"] == "skipped").sum())
    if skipped:
        print(f"Run Detection: {skipped} of {len(frame)} rows skipped for lack of target-predicted candidates")
    ResultsRepository().write_csv(artifact_path(state, "detection"), frame)
    finish_stage(state, "defend", started, "detection")
    return {"detection_reports": reports}
