from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.dbm.particles import ParticleConfiguration, symmetric_full
from src.sampling.rng import replica_generator
from src.utils.logging import setup_logger


logger = setup_logger()

SIGN_TOL = 1e-10
MASS_TOL = 1e-8
# h max_i |B_ii| <= 1 keeps the RK4 polynomial entrywise nonnegative
STEP_FACTOR = 10.0


def coefficient_matrix(x_full: np.ndarray) -> np.ndarray:
    """c_ij = 1 / (2N (x_i - x_j)^2) over the 2N-point configuration, zero diagonal."""
    x_full = np.asarray(x_full, dtype=float)
    N = x_full.size // 2
    d = x_full[:, None] - x_full[None, :]
    np.fill_diagonal(d, np.inf)
    return 1.0 / (2.0 * N * d * d)


def generator_matrix(x_full: np.ndarray) -> np.ndarray:
    """(B v)_i = sum_j c_ij (v_j - v_i)."""
    C = coefficient_matrix(x_full)
    return C - np.diag(C.sum(axis=1))


def tangential_operator(x: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Positive half of B v_full for antisymmetric v (v_{-i} = -v_i)."""
    N = x.size
    B = generator_matrix(symmetric_full(x))
    return (B @ symmetric_full(v))[N:]


def _rk4(B: np.ndarray, t: float, n: int) -> np.ndarray:
    h = t / n
    U = np.eye(B.shape[0])
    for _ in range(n):
        k1 = B @ U
        k2 = B @ (U + 0.5 * h * k1)
        k3 = B @ (U + 0.5 * h * k2)
        k4 = B @ (U + h * k3)
        U = U + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
    return U


def propagate(x_full: np.ndarray, t: float, steps: Optional[int] = None) -> np.ndarray:
    """U(t) = exp(t B) by RK4 from the identity; the default step keeps h max_i |B_ii| <= 0.1."""
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    B = generator_matrix(x_full)
    if t == 0.0:
        return np.eye(B.shape[0])
    if steps is None:
        stiff = float(np.max(-np.diag(B)))
        steps = max(1, int(math.ceil(STEP_FACTOR * t * stiff)))
    return _rk4(B, t, steps)


@dataclass
class PropagatorReport:
    t: float
    steps: int
    min_entry: float
    row_sum_error: float
    monotone_defect: float

    @property
    def sign_ok(self) -> bool:
        return self.min_entry >= -SIGN_TOL

    @property
    def mass_ok(self) -> bool:
        return self.row_sum_error <= MASS_TOL

    @property
    def monotone_ok(self) -> bool:
        return self.monotone_defect <= MASS_TOL

    @property
    def passed(self) -> bool:
        return self.sign_ok and self.mass_ok and self.monotone_ok

    def to_json(self) -> dict:
        return {
            "t": self.t,
            "steps": self.steps,
            "min_entry": self.min_entry,
            "row_sum_error": self.row_sum_error,
            "monotone_defect": self.monotone_defect,
            "pass": self.passed,
        }


def _monotone_defect(U: np.ndarray, rng: np.random.Generator, trials: int) -> float:
    """Worst decrease of U v over increasing antisymmetric v, relative to the spread of v."""
    N = U.shape[0] // 2
    worst = 0.0
    for _ in range(trials):
        v = symmetric_full(np.cumsum(rng.random(N)))
        w = U @ v
        worst = max(worst, float(np.max(-np.diff(w), initial=0.0)) / float(v[-1] - v[0]))
    return worst


def propagator_properties(
    x: ParticleConfiguration,
    t: float,
    seed: int = 0,
    trials: int = 16,
    max_halvings: int = 6,
) -> PropagatorReport:
    """Sign, mass and monotone-order preservation of the frozen-coefficient propagator.

    A failing check is retried with half the step, up to `max_halvings` times.
    """
    x_full = x.full()
    B = generator_matrix(x_full)
    steps = max(1, int(math.ceil(STEP_FACTOR * t * float(np.max(-np.diag(B)))))) if t > 0 else 0
    rng = replica_generator(seed, 0, stream=5)
    report: Optional[PropagatorReport] = None
    for attempt in range(max_halvings + 1):
        U = propagate(x_full, t, steps if steps else None)
        report = PropagatorReport(
            t=t,
            steps=steps,
            min_entry=float(np.min(U)),
            row_sum_error=float(np.max(np.abs(U.sum(axis=1) - 1.0))),
            monotone_defect=_monotone_defect(U, rng, trials),
        )
        if report.passed and np.all(np.isfinite(U)):
            break
        if steps == 0:
            break
        logger.debug(f"[propagator] attempt {attempt}: {report.to_json()}; halving the step")
        steps *= 2
    assert report is not None
    return report
