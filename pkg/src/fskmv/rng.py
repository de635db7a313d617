"""Counter-based random substreams.

Every random draw in a run comes from a generator keyed by a fixed-length
tuple ``(master_seed, stream, round, index)``. The tuple is fed to
:class:`numpy.random.SeedSequence` as its entropy, so a substream depends only
on its key and never on the order in which other substreams were consumed.
This keeps results bitwise reproducible whatever the execution schedule.
"""

from __future__ import annotations

import numpy as np

# stream identifiers; stable integers, never renumber
DATA = 1
PARTITION = 2
BATCH = 3
SIGN = 4
ENCODE = 5
CHANNEL = 6
TIMING = 7
NOISE = 8
DETECTOR = 9
MODEL_INIT = 10
MONTE_CARLO = 11
PMEPR = 12
PLACEMENT = 13


def substream(seed: int, stream: int, round_: int = 0, index: int = 0) -> np.random.Generator:
    """Return the generator for key ``(seed, stream, round_, index)``."""
    for value in (seed, stream, round_, index):
        if value < 0:
            raise ValueError(f"substream key entries must be non-negative, got {value}")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, stream, round_, index])))


def random_signs(n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform draws from {+1, -1} as int8."""
    return (2 * rng.integers(0, 2, size=n) - 1).astype(np.int8)
