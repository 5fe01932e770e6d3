"""Counter-based RNG streams.

Every random draw in the toolkit comes from a Philox generator keyed by
(seed, labels...), so independently generated records are reproducible
regardless of generation order or parallelism.
"""

from __future__ import annotations

import hashlib

import numpy as np


def rng_stream(seed: int, *labels) -> np.random.Generator:
    """Independent generator for the stream named by (seed, *labels)."""
    material = ":".join([str(int(seed)), *map(str, labels)]).encode()
    digest = hashlib.sha256(material).digest()
    key = np.frombuffer(digest[:16], dtype="<u8")
    return np.random.Generator(np.random.Philox(key=key))
