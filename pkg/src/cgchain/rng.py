"""Reproducible parallel random streams.

Realization ``i`` of any Monte Carlo computation draws from a Philox
counter-based generator keyed by ``(master_seed, i)``.  Streams are
independent and replayable regardless of execution order.
"""

import numpy as np


def stream(master_seed: int, index: int = 0) -> np.random.Generator:
    """Generator for substream `index` of the given master seed."""
    key = np.array([master_seed, index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def normal_chunks(rng: np.random.Generator, shape_tail, chunk: int = 65536):
    """Yield arrays of standard normals, chunk steps at a time, forever.

    shape_tail is the per-step shape (e.g. number of degrees of freedom).
    """
    while True:
        yield rng.standard_normal((chunk, *shape_tail))
