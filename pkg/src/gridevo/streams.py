"""Counter-keyed random streams.

Every offspring draws from its own generator, keyed by
``(seed, generation, island, index)``. The key feeds a numpy
``SeedSequence`` spawn key, which in turn seeds a Philox
(counter-based) bit generator. Nothing is shared between streams, so
results do not depend on evaluation order or thread count, and any
offspring can be regenerated later from its key alone.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def root_entropy(seed: int) -> int:
    """Map any Python int (incl. negatives) onto an unsigned 64-bit value."""
    return int(seed) & _MASK64


def offspring_stream(seed: int, generation: int, island: int, index: int) -> np.random.Generator:
    if generation < 0 or island < 0 or index < 0:
        raise ValueError("stream key components must be non-negative")
    seq = np.random.SeedSequence(root_entropy(seed), spawn_key=(generation, island, index))
    return np.random.Generator(np.random.Philox(seq))
