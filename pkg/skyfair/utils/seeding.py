"""
Named random sub-streams derived from one master seed.

Each label hashes to its own SeedSequence entropy word, so enabling or
disabling a consumer never shifts the draws seen by another one.
"""
import hashlib

import numpy as np


def label_key(label: str) -> int:
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


class SeedStreams:
    """Factory of independent, reproducible generators keyed by label"""

    def __init__(self, master_seed: int):
        if master_seed < 0:
            raise ValueError("seed must be non-negative")
        self.master_seed = int(master_seed)

    def rng(self, label: str) -> np.random.Generator:
        """Fresh generator for a label; asking twice restarts the same stream"""
        return np.random.default_rng(np.random.SeedSequence([self.master_seed, label_key(label)]))
