"""Deterministic derivation of per-task random streams from one root seed.

Child seeds are hashes of (root, labels...), so adding trials or reordering
work never perturbs the stream any existing task sees. Python's built-in
hash() is salted per process and must not be used here; sha256 is stable
across runs, platforms, and interpreter versions.
"""

from __future__ import annotations

import hashlib

import numpy as np

_SEED_MASK = (1 << 63) - 1


def derive_seed(root_seed: int, *labels: object) -> int:
    """Derive a stable 63-bit child seed from a root seed and a label path."""
    parts = [str(int(root_seed))] + [str(label) for label in labels]
    digest = hashlib.sha256("\x1f".join(parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") & _SEED_MASK


def derive_rng(root_seed: int, *labels: object) -> np.random.Generator:
    """Generator seeded by derive_seed(root_seed, *labels)."""
    return np.random.default_rng(derive_seed(root_seed, *labels))
