"""Root-seed fan-out: every random stream is derived from one seed plus a label."""

import hashlib

import numpy as np


def derive_seed(root: int, label: str) -> int:
    digest = hashlib.sha256(f"{root}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def rng_for(root: int, label: str) -> np.random.Generator:
    """PCG64 generator for the labelled stream (e.g. "split", "init", "noise", "shuffle")."""
    return np.random.Generator(np.random.PCG64(derive_seed(root, label)))
