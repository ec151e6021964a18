"""
Test script for the checkpoint, dataset and results repositories

Uses a temporary directory; nothing is left behind.
"""

import struct
import sys
import tempfile
from pathlib import Path

import numpy as np
import pandas as pd

project_root = Path(__file__).parent.parent.parent
if str(project_root) not in sys.path:
    sys.path.insert(0, str(project_root))

from tests.helpers import run_tests, tiny_model_config
from app.src.checkpoint_repository import CheckpointRepository, FormatError
from app.src.dataset_repository import CIFAR_RECORD_BYTES, DatasetRepository
from app.src.model_zoo import build_model
from app.src.results_repository import ResultsRepository
from app.src.synthetic_data import synth_dataset


def _expect(exception, fn):
    try:
        fn()
    except exception:
        return
    raise AssertionError(f"expected {exception.__name__}")


def test_checkpoint_model_restore():
    with tempfile.TemporaryDirectory() as tmp:
        source = build_model(tiny_model_config("residual"), seed=1)
        source.layers[1].running_mean[:] = 0.25
        path = CheckpointRepository().save_model(Path(tmp) / "nested" / "model.blab", source)
        restored = build_model(tiny_model_config("residual"), seed=2)
        CheckpointRepository().load_model(path, restored)
        images = np.random.default_rng(0).uniform(size=(4, 8, 8, 3))
        assert source.logits(images).tobytes() == restored.logits(images).tobytes()
        state = CheckpointRepository().load(path)
        assert any(name.startswith("rs.") for name in state)


def test_checkpoint_scalar_and_layout():
    with tempfile.TemporaryDirectory() as tmp:
        path = CheckpointRepository().save(Path(tmp) / "s.blab", {"w": np.array(2.5)})
        blob = path.read_bytes()
        assert blob[:4] == b"BLAB"
        assert struct.unpack_from("<II", blob, 4) == (1, 1)
        # 12 header bytes, u16 name length, 1-byte name, u8 rank 0, one f64
        assert len(blob) == 12 + 2 + 1 + 1 + 8
        assert CheckpointRepository().load(path)["w"].shape == ()


def test_checkpoint_rejects_bad_files():
    repository = CheckpointRepository()
    with tempfile.TemporaryDirectory() as tmp:
        bad_magic = Path(tmp) / "bad.blab"
        bad_magic.write_bytes(b"NOPE" + bytes(8))
        _expect(FormatError, lambda: repository.load(bad_magic))
        path = repository.save(Path(tmp) / "t.blab", {"w": np.ones(4)})
        truncated = Path(tmp) / "truncated.blab"
        truncated.write_bytes(path.read_bytes()[:-3])
        _expect(FormatError, lambda: repository.load(truncated))
        _expect(FileNotFoundError, lambda: repository.load(Path(tmp) / "missing.blab"))


def test_checkpoint_rejects_short_header():
    repository = CheckpointRepository()
    with tempfile.TemporaryDirectory() as tmp:
        for blob in (b"", b"BLAB", b"BLAB" + bytes(7)):
            path = Path(tmp) / "short.blab"
            path.write_bytes(blob)
            _expect(FormatError, lambda: repository.load(path))


def test_bdat_quantizes_pixels():
    split = synth_dataset(0, n_per_class=6, num_classes=3, height=8, width=8)
    dataset = split.train
    dataset.malicious[:2] = True
    with tempfile.TemporaryDirectory() as tmp:
        path = DatasetRepository().save(Path(tmp) / "train.bdat", dataset)
        assert path.stat().st_size == 18 + len(dataset) * (2 + 8 * 8 * 3)
        loaded = DatasetRepository().load(path)
    assert np.abs(loaded.images - dataset.images).max() <= 0.5 / 255 + 1e-12
    assert np.array_equal(loaded.labels, dataset.labels)
    assert loaded.malicious[:2].all() and loaded.num_classes == 3


def test_bdat_rejects_bad_files():
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "short.bdat"
        path.write_bytes(b"BDAT")
        _expect(FormatError, lambda: DatasetRepository().load(path))
        _expect(FileNotFoundError, lambda: DatasetRepository().load(Path(tmp) / "missing.bdat"))


def test_cifar10_batch_layout():
    record = np.zeros(CIFAR_RECORD_BYTES, dtype=np.uint8)
    record[0] = 7
    record[1] = 255                # red plane, pixel (0, 0)
    record[1 + 1024 + 33] = 255    # green plane, pixel (1, 1)
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "data_batch_1.bin"
        path.write_bytes(record.tobytes() * 2)
        dataset = DatasetRepository().load_cifar10([path])
    assert dataset.images.shape == (2, 32, 32, 3)
    assert dataset.labels.tolist() == [7, 7]
    assert dataset.images[0, 0, 0, 0] == 1.0 and dataset.images[0, 1, 1, 1] == 1.0
    assert dataset.images[0].sum() == 2.0


def test_results_csv_format():
    frame = pd.DataFrame({"metric": ["mmd"], "value": [1.0 / 3.0]})
    with tempfile.TemporaryDirectory() as tmp:
        repository = ResultsRepository()
        path = repository.write_csv(Path(tmp) / "out" / "t.csv", frame)
        text = path.read_bytes().decode("utf-8")
        assert text == "metric,value\nmmd,0.333333333\n"
        assert repository.read_csv(path)["metric"].tolist() == ["mmd"]
        _expect(FileNotFoundError, lambda: repository.read_csv(Path(tmp) / "none.csv"))


def test_results_json_and_features():
    with tempfile.TemporaryDirectory() as tmp:
        repository = ResultsRepository()
        repository.write_json(Path(tmp) / "m.json", {"b": 1, "a": [1, 2]})
        assert repository.read_json(Path(tmp) / "m.json") == {"a": [1, 2], "b": 1}
        records = [{"class": 0, "flagged": False}, {"class": 1, "flagged": True}]
        repository.write_jsonl(Path(tmp) / "index.jsonl", records)
        assert repository.read_jsonl(Path(tmp) / "index.jsonl") == records
        samples = {"benign": np.arange(6.0).reshape(3, 2), "malicious": np.ones((2, 2))}
        repository.save_features(Path(tmp) / "f.npz", samples)
        loaded = repository.load_features(Path(tmp) / "f.npz")
        assert sorted(loaded) == ["benign", "malicious"]
        assert np.array_equal(loaded["benign"], samples["benign"])


def main() -> bool:
    return run_tests("Repositories Test Suite", [
        test_checkpoint_model_restore,
        test_checkpoint_scalar_and_layout,
        test_checkpoint_rejects_bad_files,
        test_checkpoint_rejects_short_header,
        test_bdat_quantizes_pixels,
        test_bdat_rejects_bad_files,
        test_cifar10_batch_layout,
        test_results_csv_format,
        test_results_json_and_features,
    ])


if __name__ == "__main__":
    sys.exit(0 if main() else 1)
