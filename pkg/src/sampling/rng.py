from __future__ import annotations

from typing import Union

import numpy as np


SeedLike = Union[int, np.random.Generator]

_MASK64 = (1 << 64) - 1


def replica_generator(base_seed: int, replica: int = 0, stream: int = 0) -> np.random.Generator:
    """Counter-based stream for one replica, a pure function of (base_seed, replica, stream).

    Streams are derived by hashing the triple through SeedSequence into a Philox key, so the
    draw of replica k never depends on how many replicas ran before it or on which worker.
    """
    if replica < 0 or stream < 0:
        raise ValueError("replica and stream indices must be nonnegative")
    ss = np.random.SeedSequence([int(base_seed) & _MASK64, int(replica), int(stream)])
    return np.random.Generator(np.random.Philox(ss))


def as_generator(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return replica_generator(int(seed))
