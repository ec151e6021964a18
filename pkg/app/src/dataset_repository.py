"""
Dataset Repository

Reads and writes image datasets in the BDAT binary format, and reads
CIFAR-10 binary batches.

BDAT layout (little-endian):

    magic "BDAT" | version u32 | count u32 | H u16 | W u16 | C u8 | K u8 |
    per image: label u8, malicious u8, H*W*C pixels as u8 (row-major)

Pixels are stored as round(255 * value) and come back as value / 255.
"""

import struct
from pathlib import Path
from typing import List, Sequence, Union

import numpy as np

from app.src.checkpoint_repository import FormatError
from app.src.dataset import Dataset

MAGIC = b"BDAT"
FORMAT_VERSION = 1
HEADER = struct.Struct("<4sIIHHBB")
CIFAR_RECORD_BYTES = 3073


class DatasetRepository:
    """
    Repository class for dataset files.

    Provides methods to:
    - Save a Dataset as BDAT
    - Load a BDAT file
    - Load CIFAR-10 binary batches
    """

    def save(self, path: Union[str, Path], dataset: Dataset) -> Path:
        """
        Write a dataset as BDAT.

        Args:
            path: Destination file; parent directories are created.
            dataset: Images with labels and malicious flags.

        Returns:
            The written path.

        Raises:
            Exception: If the file cannot be written.
        """
        path = Path(path)
        n, h, w, c = dataset.images.shape
        if dataset.num_classes > 255 or c > 255:
            raise ValueError(f"BDAT stores K and C as u8, got K={dataset.num_classes}, C={c}")
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            pixels = np.round(np.clip(dataset.images, 0.0, 1.0) * 255.0).astype(np.uint8).reshape(n, -1)
            records = np.empty((n, 2 + h * w * c), dtype=np.uint8)
            records[:, 0] = dataset.labels.astype(np.uint8)
            records[:, 1] = dataset.malicious.astype(np.uint8)
            records[:, 2:] = pixels
            with open(path, "wb") as handle:
                handle.write(HEADER.pack(MAGIC, FORMAT_VERSION, n, h, w, c, dataset.num_classes))
                handle.write(records.tobytes())
            return path
        except Exception as e:
            raise Exception(f"Failed to write dataset to {path}: {e}")

    def load(self, path: Union[str, Path]) -> Dataset:
        """
        Read a BDAT file.

        Origin labels are not stored, so they are set equal to the labels.

        Raises:
            FileNotFoundError: If the file does not exist.
            FormatError: If the header or size is wrong.
        """
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"Dataset file not found: {path}")
        blob = path.read_bytes()
        if len(blob) < HEADER.size:
            raise FormatError(f"{path}: file too short for a BDAT header")
        magic, version, n, h, w, c, k = HEADER.unpack_from(blob, 0)
        if magic != MAGIC:
            raise FormatError(f"{path} is not a BDAT dataset")
        if version != FORMAT_VERSION:
            raise FormatError(f"{path}: unsupported dataset version {version}")
        record = 2 + h * w * c
        if len(blob) != HEADER.size + n * record:
            raise FormatError(f"{path}: expected {n} records of {record} bytes")
        records = np.frombuffer(blob, dtype=np.uint8, offset=HEADER.size).reshape(n, record)
        labels = records[:, 0].astype(np.int64)
        return Dataset(
            images=records[:, 2:].reshape(n, h, w, c).astype(np.float64) / 255.0,
            labels=labels,
            malicious=records[:, 1].astype(bool),
            origin_labels=labels.copy(),
            num_classes=k,
        )

    def load_cifar10(self, paths: Sequence[Union[str, Path]]) -> Dataset:
        """
        Read CIFAR-10 binary batches (3073-byte records: label + 3x32x32 planes).

        Args:
            paths: One or more ``data_batch_*.bin`` / ``test_batch.bin`` files.

        Returns:
            Dataset of (N, 32, 32, 3) images scaled to [0, 1].
        """
        images: List[np.ndarray] = []
        labels: List[np.ndarray] = []
        for path in map(Path, paths):
            if not path.exists():
                raise FileNotFoundError(f"CIFAR-10 batch not found: {path}")
            blob = path.read_bytes()
            if len(blob) % CIFAR_RECORD_BYTES:
                raise FormatError(f"{path}: size is not a multiple of {CIFAR_RECORD_BYTES}")
            records = np.frombuffer(blob, dtype=np.uint8).reshape(-1, CIFAR_RECORD_BYTES)
            labels.append(records[:, 0].astype(np.int64))
            images.append(records[:, 1:].reshape(-1, 3, 32, 32).transpose(0, 2, 3, 1).astype(np.float64) / 255.0)
        if not images:
            raise ValueError("load_cifar10: no batch files given")
        label_array = np.concatenate(labels)
        return Dataset(
            images=np.concatenate(images),
            labels=label_array,
            malicious=np.zeros(len(label_array), dtype=bool),
            origin_labels=label_array.copy(),
            num_classes=10,
        )
