"""Per-replica matrix sampling shared by the matrix-flow experiments.

Stream layout per replica: 0 start matrix, 1 flow noise, 2 inner (conditional) evolutions.
"""
from __future__ import annotations

from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from src.experiments.config import EnsembleConfig
from src.kernels.testfunctions import TestFunction
from src.linalg.dump import write_spectrum
from src.linalg.nonhermitian import eigenvalues
from src.observables.statistics import linear_statistics
from src.sampling.ensembles import TimeGrid, sample_ginibre, sample_iid_matrix, sample_trajectory
from src.sampling.rng import replica_generator


START_STREAM = 0
FLOW_STREAM = 1
INNER_STREAM = 2


def start_matrix(ens: EnsembleConfig, seed: int, replica: int) -> np.ndarray:
    rng = replica_generator(seed, replica, START_STREAM)
    if ens.start == "equilibrium":
        return sample_ginibre(ens.N, rng)
    return sample_iid_matrix(ens.matrix_config(seed), replica, rng=rng)


def matrices_at(ens: EnsembleConfig, times: Sequence[float], seed: int, replica: int) -> Dict[float, np.ndarray]:
    """X_t at every requested time along one OU trajectory started at time 0."""
    grid = sorted({float(t) for t in times})
    X0 = start_matrix(ens, seed, replica)
    traj = sample_trajectory(X0, TimeGrid(grid), replica_generator(seed, replica, FLOW_STREAM))
    return dict(zip(traj.times, traj.states))


def statistics_task(
    ens: EnsembleConfig,
    functions: Sequence[TestFunction],
    times: Sequence[float],
    seed: int,
    backend: str,
    replica: int,
    dump_dir: Optional[str] = None,
) -> np.ndarray:
    """Raw linear statistics, shape (len(times), len(functions)) in the order of `times`.

    With `dump_dir` set, each spectrum is also written as r<replica>_t<index>.bin.
    """
    mats = matrices_at(ens, times, seed, replica)
    out = np.empty((len(times), len(functions)))
    cache: Dict[float, List[float]] = {}
    for k, t in enumerate(times):
        t = float(t)
        if t not in cache:
            lam = eigenvalues(mats[t], backend)
            if dump_dir is not None:
                write_spectrum(Path(dump_dir) / f"r{replica:05d}_t{len(cache)}.bin", lam)
            cache[t] = [s.raw_value for s in linear_statistics(lam, functions, t)]
        out[k] = cache[t]
    return out
