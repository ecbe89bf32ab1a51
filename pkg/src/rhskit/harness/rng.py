"""Counter-based random streams keyed by seed, sweep coordinates and trial."""

from __future__ import annotations

import hashlib

import numpy as np


def _word(value) -> int:
    """Map a coordinate (int, float or string) to a stable 32-bit word."""
    if isinstance(value, (bool, np.bool_)):
        value = int(value)
    if isinstance(value, (int, np.integer)) and 0 <= int(value) < 2**32:
        return int(value)
    digest = hashlib.sha256(repr(value if not isinstance(value, np.generic) else value.item()).encode()).digest()
    return int.from_bytes(digest[:4], "little")


def stream(seed: int, *coords) -> np.random.Generator:
    """Independent Philox generator for ``(seed, *coords)``.

    The same key always yields the same stream, whatever order or process
    the cells run in.
    """
    if int(seed) < 0:
        raise ValueError("seed must be non-negative")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_word(c) for c in coords))
    return np.random.Generator(np.random.Philox(ss))
