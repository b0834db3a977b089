from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from src.dbm.particles import drift, symmetric_full
from src.dbm.propagator import tangential_operator
from src.experiments.estimators import loglog_slope
from src.sampling.rng import replica_generator


def observable_f(v: np.ndarray, x: np.ndarray, z: complex) -> complex:
    """f(z) = sum_{1<=|i|<=N} v_i / (x_i - z) with v_{-i} = -v_i, x_{-i} = -x_i."""
    z = complex(z)
    if z.imag == 0:
        raise ValueError("observable needs Im z != 0")
    v = np.asarray(v, dtype=float)
    x = np.asarray(x, dtype=float)
    return complex(np.sum(v / (x - z) + v / (x + z)))


def advection_residual(
    x0: np.ndarray,
    x1: np.ndarray,
    v0: np.ndarray,
    v1: np.ndarray,
    db: np.ndarray,
    z: complex,
    dt: float,
) -> float:
    """|f_1 - f_0 - predicted| for one step of the particle/weight system.

    predicted = [m d_z f - (1/2N) sum v/(x-z)^3] dt + (1/2N) sum v db^2/(x-z)^3
                - (2N)^{-1/2} sum v db/(x-z)^2,
    with the realized squared increments standing in for the brackets.
    """
    z = complex(z)
    X, V, DB = symmetric_full(x0), symmetric_full(v0), symmetric_full(db)
    n2 = X.size
    a = X - z
    m = np.sum(1.0 / a) / n2
    dzf = np.sum(V / a ** 2)
    cube = V / a ** 3
    predicted = (m * dzf - np.sum(cube) / n2) * dt + np.sum(cube * DB * DB) / n2 - np.sum(V * DB / a ** 2) / math.sqrt(n2)
    return abs(observable_f(v1, x1, z) - observable_f(v0, x0, z) - predicted)


def advection_step(x: np.ndarray, v: np.ndarray, z: complex, dt: float, rng: np.random.Generator, rate: float = 1.0) -> float:
    """One explicit step of (x, v) with Brownian increments of bracket rate `rate`, and its residual."""
    N = x.size
    db = math.sqrt(rate * dt) * rng.standard_normal(N)
    x1 = x + drift(x) * dt + db / math.sqrt(2.0 * N)
    v1 = v + tangential_operator(x, v) * dt
    return advection_residual(x, x1, v, v1, db, z, dt)


@dataclass
class AdvectionScaling:
    dts: List[float]
    mean_residual: List[float]
    slope: float
    slope_stderr: float

    def to_rows(self) -> List[dict]:
        return [{"dt": h, "mean_residual": r} for h, r in zip(self.dts, self.mean_residual)]


def advection_scaling(
    x: np.ndarray,
    z: complex,
    dts: Sequence[float],
    replicas: int = 200,
    seed: int = 0,
    rate: float = 1.0,
    v: Optional[np.ndarray] = None,
) -> AdvectionScaling:
    """Log-log regression of the mean one-step residual against dt."""
    x = np.asarray(x, dtype=float)
    v = x.copy() if v is None else np.asarray(v, dtype=float)
    means = []
    for k, h in enumerate(dts):
        rng = replica_generator(seed, k, stream=9)
        means.append(float(np.mean([advection_step(x, v, z, h, rng, rate) for _ in range(replicas)])))
    slope, err = loglog_slope(dts, means)
    return AdvectionScaling(dts=[float(h) for h in dts], mean_residual=means, slope=slope, slope_stderr=err)
