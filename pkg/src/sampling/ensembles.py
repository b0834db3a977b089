from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from src.sampling.distributions import EntryDistribution
from src.sampling.rng import SeedLike, as_generator, replica_generator


@dataclass(frozen=True)
class MatrixEnsembleConfig:
    N: int
    distribution: EntryDistribution = field(default_factory=EntryDistribution)
    seed: int = 0

    def __post_init__(self) -> None:
        if int(self.N) != self.N or self.N < 2:
            raise ValueError(f"N must be an integer >= 2, got {self.N}")
        if not (0 <= int(self.seed) < 2**64):
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")


@dataclass(frozen=True)
class TimeGrid:
    times: Sequence[float]

    def __post_init__(self) -> None:
        ts = [float(t) for t in self.times]
        if not ts:
            raise ValueError("time grid is empty")
        if ts[0] < 0:
            raise ValueError(f"first grid time must be >= 0, got {ts[0]}")
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError(f"grid times must be strictly increasing: {ts}")
        object.__setattr__(self, "times", tuple(ts))

    def __len__(self) -> int:
        return len(self.times)


@dataclass
class TrajectorySample:
    times: List[float]
    states: List[np.ndarray]

    def at(self, t: float) -> np.ndarray:
        for s, x in zip(self.times, self.states):
            if s == t:
                return x
        raise KeyError(f"time {t} not in trajectory grid {self.times}")


def sample_ginibre(N: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((N, N, 2))
    return (g[..., 0] + 1j * g[..., 1]) / math.sqrt(2.0 * N)


def sample_iid_matrix(cfg: MatrixEnsembleConfig, replica: int = 0, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """N x N matrix with entries N^{-1/2} chi, chi drawn from cfg.distribution."""
    gen = rng if rng is not None else replica_generator(cfg.seed, replica)
    chi = cfg.distribution.sample(gen, (cfg.N, cfg.N))
    return chi / math.sqrt(cfg.N)


def evolve_ou(X: np.ndarray, dt: float, noise: SeedLike) -> np.ndarray:
    """Exact transition of dX = dB/sqrt(N) - X/2 dt over a step dt."""
    if dt < 0:
        raise ValueError(f"dt must be nonnegative, got {dt}")
    if dt == 0:
        return X.copy()
    rng = as_generator(noise)
    N = X.shape[0]
    G = sample_ginibre(N, rng)
    return math.exp(-dt / 2.0) * X + math.sqrt(-math.expm1(-dt)) * G


def sample_trajectory(X0: np.ndarray, grid: TimeGrid, noise: SeedLike, t0: float = 0.0) -> TrajectorySample:
    """Chain exact OU transitions from X0 (taken at time t0) through the grid."""
    rng = as_generator(noise)
    states: List[np.ndarray] = []
    X, t = X0, float(t0)
    for s in grid.times:
        if s < t:
            raise ValueError(f"grid time {s} precedes start time {t}")
        X = evolve_ou(X, s - t, rng)
        t = s
        states.append(X)
    return TrajectorySample(times=list(grid.times), states=states)
