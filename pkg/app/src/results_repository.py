"""
Results Repository

Persists experiment outputs: CSV tables (header row, nine significant digits,
"\n" line endings), JSON documents, JSON-lines indices and sampled feature
matrices (.npz).
"""

import json
from pathlib import Path
from typing import Any, Dict, List, Union

import numpy as np
import pandas as pd

FLOAT_FORMAT = "%.9g"
PathLike = Union[str, Path]


class ResultsRepository:
    """
    Repository class for result artifacts.

    Provides methods to:
    - Write and read CSV tables
    - Write and read JSON and JSON-lines documents
    - Save and load per-population feature samples
    """

    def write_csv(self, path: PathLike, frame: pd.DataFrame) -> Path:
        """
        Write a table with a header row and 9 significant digits per float.

        Raises:
            Exception: If the file cannot be written.
        """
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
            return path
        except Exception as e:
            raise Exception(f"Failed to write CSV to {path}: {e}")

    def read_csv(self, path: PathLike) -> pd.DataFrame:
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"Result table not found: {path}")
        try:
            return pd.read_csv(path)
        except Exception as e:
            raise Exception(f"Failed to read CSV from {path}: {e}")

    def write_json(self, path: PathLike, document: Dict[str, Any]) -> Path:
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(json.dumps(document, indent=2, sort_keys=True) + "\n", encoding="utf-8")
            return path
        except Exception as e:
            raise Exception(f"Failed to write JSON to {path}: {e}")

    def read_json(self, path: PathLike) -> Dict[str, Any]:
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"JSON document not found: {path}")
        try:
            return json.loads(path.read_text(encoding="utf-8"))
        except Exception as e:
            raise Exception(f"Failed to read JSON from {path}: {e}")

    def write_jsonl(self, path: PathLike, records: List[Dict[str, Any]]) -> Path:
        """Write one JSON object per line, keys sorted."""
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            lines = [json.dumps(record, sort_keys=True) for record in records]
            path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
            return path
        except Exception as e:
            raise Exception(f"Failed to write JSON lines to {path}: {e}")

    def read_jsonl(self, path: PathLike) -> List[Dict[str, Any]]:
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"JSON-lines index not found: {path}")
        return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]

    def save_features(self, path: PathLike, samples: Dict[str, np.ndarray]) -> Path:
        """Save population name -> (n, d) matrix as an uncompressed .npz archive."""
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "wb") as handle:
                np.savez(handle, **samples)
            return path
        except Exception as e:
            raise Exception(f"Failed to save features to {path}: {e}")

    def load_features(self, path: PathLike) -> Dict[str, np.ndarray]:
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"Feature archive not found: {path}")
        with np.load(path) as archive:
            return {name: archive[name] for name in archive.files}
