"""Named, counter-based RNG streams.

Every stochastic component draws from `rng_stream(seed, *ids)` where the ids
name the consumer (figure id, draw index, circuit index, ...).  Streams are
independent Philox generators keyed by (seed, ids), so results are reproducible
and order-independent across threads.
"""
from __future__ import annotations

import hashlib

import numpy as np


def _to_entropy(x) -> int:
    if isinstance(x, (int, np.integer)):
        return int(x) & 0xFFFFFFFFFFFFFFFF
    h = hashlib.sha256(str(x).encode()).digest()
    return int.from_bytes(h[:8], "big")


def rng_stream(seed: int, *ids) -> np.random.Generator:
    entropy = [_to_entropy(seed)] + [_to_entropy(x) for x in ids]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
