"""Master-seed discipline: every stochastic consumer derives its own seed."""

import hashlib
from typing import Union


def derive_seed(master: int, stage: str, cell: Union[int, str] = 0) -> int:
    """
    Derive a 63-bit seed from (master seed, stage name, cell index).

    Adding a stage or a cell never perturbs the seeds of the others.
    """
    digest = hashlib.blake2b(f"{master}|{stage}|{cell}".encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") >> 1
