"""Independent, reproducible RNG streams derived from one run seed."""

import numpy as np

# stream ids
INIT = 0
TRAIN = 1
SHUFFLE = 2
VALIDATION = 3
SAMPLING = 4


def rng_stream(seed: int, stream: int, *extra: int) -> np.random.Generator:
    """PCG64 generator keyed by ``(seed, stream, *extra)``, e.g. a window index."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(stream), *map(int, extra)]))
