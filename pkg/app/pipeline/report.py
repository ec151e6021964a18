"""
Report: a pure fold over persisted run artifacts.

Reads every run's manifest.json, metrics.csv, distances.csv, detection.csv,
triggers/index.jsonl and pruning.csv under an output root and writes one
summary row per run to summary.csv. Sampled feature archives are projected to
two PCA components per level as projection_<level>.csv (columns x, y,
population) inside each run directory.
"""

from pathlib import Path
from typing import Dict, List, Union

import numpy as np
import pandas as pd
from sklearn.decomposition import PCA

from app.cli.models.run_manifest import RunManifest
from app.pipeline.run_files import ARTIFACTS
from app.src.model_zoo import TAP_LEVELS
from app.src.results_repository import ResultsRepository

LABEL_COLUMNS = ["run", "attack", "method", "lambda", "kernel", "seed"]
SUMMARY_NAME = "summary.csv"


def project_features(samples: Dict[str, np.ndarray]) -> pd.DataFrame:
    """Joint 2-component PCA of every population in the archive."""
    populations = sorted(samples)
    matrix = np.concatenate([samples[p] for p in populations])
    if matrix.shape[0] < 2 or matrix.shape[1] < 2:
        return pd.DataFrame(columns=["x", "y", "population"])
    coords = PCA(n_components=2, svd_solver="full").fit_transform(matrix)
    tags = np.concatenate([[p] * len(samples[p]) for p in populations])
    return pd.DataFrame({"x": coords[:, 0], "y": coords[:, 1], "population": tags})


def _fold_run(run_dir: Path, root: Path, repository: ResultsRepository) -> Dict[str, object]:
    manifest = RunManifest.model_validate(repository.read_json(run_dir / ARTIFACTS["manifest"]))
    row: Dict[str, object] = {"run": run_dir.relative_to(root).as_posix() or "."}
    for key in LABEL_COLUMNS[1:]:
        row[key] = manifest.labels.get(key, "")

    metrics_path = run_dir / ARTIFACTS["metrics"]
    if metrics_path.exists():
        metrics = repository.read_csv(metrics_path).iloc[0]
        row["ba"], row["asr"] = float(metrics["ba"]), float(metrics["asr"])

    distances_path = run_dir / ARTIFACTS["distances"]
    if distances_path.exists():
        distances = repository.read_csv(distances_path)
        for _, aro in distances[distances["metric"] == "ARO"].iterrows():
            row[f"aro_{aro['level']}"] = aro["rank"]

    detection_path = run_dir / ARTIFACTS["detection"]
    if detection_path.exists():
        for _, cell in repository.read_csv(detection_path).iterrows():
            row[f"f1_{cell['defense']}_{cell['level']}_N{int(cell['N'])}_r{cell['r_prime']:g}"] = cell["f1"]

    triggers_path = run_dir / ARTIFACTS["triggers"]
    if triggers_path.exists():
        records = repository.read_jsonl(triggers_path)
        target = manifest.labels.get("target")
        flagged = [r["class"] for r in records if r["flagged"]]
        row["nc_flagged"] = " ".join(str(c) for c in flagged)
        row["nc_target_flagged"] = int(target is not None and int(target) in flagged)

    pruning_path = run_dir / ARTIFACTS["pruning"]
    if pruning_path.exists():
        curve = repository.read_csv(pruning_path)
        row["prune_best_gap"] = float((curve["ba"] - curve["asr"]).max())
        unpruned = curve[curve["fraction"] == 0]
        if len(unpruned):
            row["prune_asr_drop_max"] = float(unpruned["asr"].iloc[0] - curve["asr"].min())

    for level in TAP_LEVELS:
        archive = run_dir / f"features_{level}.npz"
        if archive.exists():
            repository.write_csv(run_dir / f"projection_{level}.csv", project_features(repository.load_features(archive)))
    return row


def build_report(out_dir: Union[str, Path], verbose: bool = False) -> pd.DataFrame:
    """
    Aggregate every run under ``out_dir`` into ``out_dir/summary.csv``.

    Raises:
        FileNotFoundError: If the directory is missing or holds no run.
    """
    root = Path(out_dir)
    if not root.is_dir():
        raise FileNotFoundError(f"Output directory not found: {root}")
    manifests = sorted(root.rglob(ARTIFACTS["manifest"]))
    if not manifests:
        raise FileNotFoundError(f"No runs (manifest.json) found under {root}")

    repository = ResultsRepository()
    rows: List[Dict[str, object]] = [_fold_run(path.parent, root, repository) for path in manifests]
    frame = pd.DataFrame(rows)
    value_columns = sorted(c for c in frame.columns if c not in LABEL_COLUMNS)
    frame = frame[LABEL_COLUMNS + value_columns].sort_values("run", kind="stable").reset_index(drop=True)
    repository.write_csv(root / SUMMARY_NAME, frame)
    if verbose:
        print(f"Report: {len(frame)} runs summarized into {root / SUMMARY_NAME}")
    return frame
