from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.dbm.drivers import Driver
from src.dbm.particles import ParticleConfiguration, interaction_drift, is_ordered, mirror_solve, neighbor_gaps
from src.errors import DBMCollisionError
from src.sampling.rng import replica_generator
from src.utils.logging import setup_logger


logger = setup_logger()


@dataclass(frozen=True)
class DBMSimConfig:
    N: int
    dt: float = 1e-4
    T: float = 1.0
    guard: float = 0.4
    max_retries: int = 40
    seed: int = 0
    record_increments: bool = False

    def __post_init__(self) -> None:
        if self.N < 1:
            raise ValueError(f"N must be >= 1, got {self.N}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.T < 0:
            raise ValueError(f"T must be >= 0, got {self.T}")
        if not (0.0 < self.guard <= 0.5):
            raise ValueError(f"guard fraction must lie in (0, 1/2], got {self.guard}")
        if self.max_retries < 0:
            raise ValueError(f"max_retries must be >= 0, got {self.max_retries}")


@dataclass
class DBMTrajectory:
    times: List[float]
    states: List[np.ndarray]
    steps: int = 0
    halvings: int = 0
    increments: Optional[List[Tuple[float, np.ndarray]]] = None

    def at(self, t: float) -> np.ndarray:
        for s, x in zip(self.times, self.states):
            if math.isclose(s, t, rel_tol=0.0, abs_tol=1e-15):
                return x
        raise KeyError(f"time {t} was not recorded (have {self.times})")

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def to_rows(self, replica: int = 0) -> List[dict]:
        return [
            {"replica": replica, "t": t, "i": i + 1, "x": float(v)}
            for t, x in zip(self.times, self.states)
            for i, v in enumerate(x)
        ]


@dataclass
class _StepStats:
    steps: int = 0
    halvings: int = 0
    increments: List[List[Tuple[float, np.ndarray]]] = field(default_factory=list)


def euler_step(x: np.ndarray, db: np.ndarray, h: float, v: Optional[np.ndarray] = None) -> np.ndarray:
    """Explicit interaction drift v and noise db / sqrt(2N); the mirror term 1/(4N x) is taken implicitly."""
    N = x.size
    v = interaction_drift(x) if v is None else v
    return mirror_solve(x + v * h + db / math.sqrt(2.0 * N), h, N)


def step_admissible(x: np.ndarray, new: np.ndarray, disp: np.ndarray, guard: float) -> bool:
    """Ordered, each interaction displacement within guard x its pair gap, and no gap shrinks below (1 - guard) x itself."""
    if not is_ordered(new):
        return False
    if x.size == 1:
        return True
    gaps = np.diff(x)
    pair = np.minimum(np.append(np.inf, gaps), np.append(gaps, np.inf))
    if np.any(np.abs(disp) > guard * pair):
        return False
    return bool(np.all(np.diff(new) >= (1.0 - guard) * gaps))


class _Stepper:
    def __init__(self, drivers: Sequence[Driver], cfg: DBMSimConfig, rng: np.random.Generator) -> None:
        dims = {d.dim for d in drivers}
        if len(dims) != 1:
            raise ValueError(f"coupled drivers must share the base motion dimension, got {sorted(dims)}")
        self.drivers = list(drivers)
        self.dim = dims.pop()
        self.cfg = cfg
        self.rng = rng
        self.stats = _StepStats(increments=[[] for _ in drivers])

    def advance(self, xs: List[np.ndarray], t: float, h: float) -> List[np.ndarray]:
        dW = math.sqrt(h) * self.rng.standard_normal(self.dim)
        return self._advance(xs, t, h, dW, 0)

    def _advance(self, xs: List[np.ndarray], t: float, h: float, dW: np.ndarray, depth: int) -> List[np.ndarray]:
        dbs = [d.increment(dW) for d in self.drivers]
        vs = [interaction_drift(x) for x in xs]
        new = [euler_step(x, db, h, v) for x, db, v in zip(xs, dbs, vs)]
        if all(step_admissible(x, y, v * h, self.cfg.guard) for x, y, v in zip(xs, new, vs)):
            self.stats.steps += 1
            if self.cfg.record_increments:
                for k, db in enumerate(dbs):
                    self.stats.increments[k].append((h, db))
            return new
        if depth >= self.cfg.max_retries:
            raise DBMCollisionError(
                "step rejected after the maximum number of halvings",
                diagnostics={
                    "t": t,
                    "dt": h,
                    "depth": depth,
                    "min_gap": float(min(np.min(neighbor_gaps(x)) for x in xs)),
                },
            )
        self.stats.halvings += 1
        if self.stats.halvings in (1, 100, 10000):
            logger.warning(f"[dbm] step halving at t={t:.6g} (dt={h:.3e}, depth {depth + 1}); {self.stats.halvings} so far")
        # Brownian bridge midpoint of the base motion
        half = 0.5 * h
        dW1 = 0.5 * dW + math.sqrt(0.25 * h) * self.rng.standard_normal(self.dim)
        mid = self._advance(xs, t, half, dW1, depth + 1)
        return self._advance(mid, t + half, half, dW - dW1, depth + 1)


def simulate_coupled(
    inits: Sequence[ParticleConfiguration],
    drivers: Sequence[Driver],
    cfg: DBMSimConfig,
    times: Optional[Sequence[float]] = None,
    rng: Optional[np.random.Generator] = None,
) -> List[DBMTrajectory]:
    """Evolve several processes driven by linear images of one Brownian motion.

    Only the positive-index particles are stored; the mirror half follows from antisymmetry.
    """
    if len(inits) != len(drivers):
        raise ValueError(f"{len(inits)} initial configurations but {len(drivers)} drivers")
    for init, d in zip(inits, drivers):
        if init.N != cfg.N or d.N != cfg.N:
            raise ValueError(f"configuration/driver size ({init.N}, {d.N}) does not match N={cfg.N}")
    targets = sorted(float(t) for t in (times if times is not None else [cfg.T]))
    if targets and targets[0] < 0:
        raise ValueError("record times must be >= 0")
    gen = rng if rng is not None else replica_generator(cfg.seed, 0, stream=3)
    stepper = _Stepper(drivers, cfg, gen)
    xs = [init.x.copy() for init in inits]
    recorded: List[List[np.ndarray]] = [[] for _ in inits]
    t = 0.0
    for target in targets:
        while target - t > 1e-15 * max(1.0, target):
            h = min(cfg.dt, target - t)
            xs = stepper.advance(xs, t, h)
            t += h
        t = target
        for k, x in enumerate(xs):
            recorded[k].append(x.copy())
    out = []
    for k in range(len(inits)):
        out.append(
            DBMTrajectory(
                times=list(targets),
                states=recorded[k],
                steps=stepper.stats.steps,
                halvings=stepper.stats.halvings,
                increments=stepper.stats.increments[k] if cfg.record_increments else None,
            )
        )
    return out


def simulate_dbm(
    init: ParticleConfiguration,
    driver: Driver,
    cfg: DBMSimConfig,
    times: Optional[Sequence[float]] = None,
    rng: Optional[np.random.Generator] = None,
) -> DBMTrajectory:
    """Symmetric DBM ds_i = db_i / sqrt(2N) + (1/2N) sum_{j != i} dt / (s_i - s_j), 1 <= |i| <= N."""
    return simulate_coupled([init], [driver], cfg, times, rng)[0]


def realized_bracket(increments: Sequence[Tuple[float, np.ndarray]]) -> Tuple[float, np.ndarray]:
    """Elapsed time and sum of squared increments per index."""
    elapsed = sum(h for h, _ in increments)
    qv = np.sum([db * db for _, db in increments], axis=0)
    return float(elapsed), np.asarray(qv)
