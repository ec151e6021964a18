"""
Checkpoint Repository

Reads and writes model parameters in the little-endian BLAB binary format:

    magic "BLAB" | version u32 | count u32 |
    per entry: name length u16, UTF-8 name, rank u8, extents u32 x rank, raw f64 data

Running batch-norm statistics travel as ordinary entries whose names carry the
reserved prefix "rs.".
"""

import struct
from pathlib import Path
from typing import Dict, Union

import numpy as np

MAGIC = b"BLAB"
FORMAT_VERSION = 1
RUNNING_STAT_PREFIX = "rs."


class FormatError(ValueError):
    """Raised when a binary artifact has the wrong magic, version or layout."""


class CheckpointRepository:
    """
    Repository class for BLAB checkpoint files.

    Provides methods to:
    - Save a name -> array mapping
    - Load a name -> array mapping
    - Round-trip a TappedModel's state
    """

    def save(self, path: Union[str, Path], state: Dict[str, np.ndarray]) -> Path:
        """
        Write a checkpoint.

        Args:
            path: Destination file; parent directories are created.
            state: Mapping of entry name to float array (any rank).

        Returns:
            The written path.

        Raises:
            Exception: If the file cannot be written.
        """
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "wb") as handle:
                handle.write(MAGIC)
                handle.write(struct.pack("<II", FORMAT_VERSION, len(state)))
                for name, array in state.items():
                    encoded = name.encode("utf-8")
                    array = np.asarray(array, dtype="<f8")
                    handle.write(struct.pack("<H", len(encoded)))
                    handle.write(encoded)
                    handle.write(struct.pack("<B", array.ndim))
                    handle.write(struct.pack(f"<{array.ndim}I", *array.shape))
                    handle.write(np.ascontiguousarray(array).tobytes())
            return path
        except Exception as e:
            raise Exception(f"Failed to write checkpoint to {path}: {e}")

    def load(self, path: Union[str, Path]) -> Dict[str, np.ndarray]:
        """
        Read a checkpoint.

        Args:
            path: Checkpoint file.

        Returns:
            Mapping of entry name to float64 array, in file order.

        Raises:
            FileNotFoundError: If the file does not exist.
            FormatError: If the magic, version or layout is wrong.
        """
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"Checkpoint not found: {path}")
        blob = path.read_bytes()
        if len(blob) < 12:
            raise FormatError(f"{path}: file too short for a BLAB header")
        if blob[:4] != MAGIC:
            raise FormatError(f"{path} is not a BLAB checkpoint")
        version, count = struct.unpack_from("<II", blob, 4)
        if version != FORMAT_VERSION:
            raise FormatError(f"{path}: unsupported checkpoint version {version}")

        offset = 12
        state: Dict[str, np.ndarray] = {}
        try:
            for _ in range(count):
                (name_len,) = struct.unpack_from("<H", blob, offset)
                offset += 2
                name = blob[offset:offset + name_len].decode("utf-8")
                offset += name_len
                (rank,) = struct.unpack_from("<B", blob, offset)
                offset += 1
                shape = struct.unpack_from(f"<{rank}I", blob, offset)
                offset += 4 * rank
                size = int(np.prod(shape)) if rank else 1
                data = np.frombuffer(blob, dtype="<f8", count=size, offset=offset)
                offset += 8 * size
                state[name] = data.astype(np.float64).reshape(shape)
        except (struct.error, ValueError) as e:
            raise FormatError(f"{path}: truncated or corrupt checkpoint ({e})")
        if offset != len(blob):
            raise FormatError(f"{path}: {len(blob) - offset} trailing bytes after {count} entries")
        return state

    def save_model(self, path: Union[str, Path], model) -> Path:
        """Persist a TappedModel's parameters and running statistics."""
        return self.save(path, model.state_dict())

    def load_model(self, path: Union[str, Path], model) -> None:
        """Load parameters and running statistics into an already-built TappedModel."""
        model.load_state_dict(self.load(path))
