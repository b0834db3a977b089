from __future__ import annotations

import math
from dataclasses import dataclass
from functools import partial
from typing import List, Sequence, Tuple

import numpy as np
from scipy import stats

from src.dbm.drivers import Driver, coupled_from_cross_bracket, independent_driver
from src.dbm.particles import ParticleConfiguration
from src.dbm.simulate import DBMSimConfig, simulate_dbm
from src.experiments.runner import run_replicas
from src.linalg.hermitize import hermitize, singular_values
from src.sampling.ensembles import sample_ginibre
from src.sampling.rng import replica_generator
from src.utils.logging import setup_logger


logger = setup_logger()

# per-replica streams: 0 start matrix, 3 DBM noise, 4 matrix noise
MATRIX_NOISE_STREAM = 4
ROUTE_KS_LIMIT = 0.05


def matrix_flow(Y: np.ndarray, times: Sequence[float], rng: np.random.Generator) -> List[np.ndarray]:
    """X_s = Y + B_s / sqrt(N) at the requested times, B a complex matrix Brownian motion with E|b_ij(s)|^2 = s."""
    out: List[np.ndarray] = []
    X = np.asarray(Y, dtype=np.complex128).copy()
    N = X.shape[0]
    s = 0.0
    for t in sorted(float(t) for t in times):
        if t < s:
            raise ValueError("times must be nonnegative")
        if t > s:
            X = X + math.sqrt(t - s) * sample_ginibre(N, rng)
            s = t
        out.append(X.copy())
    return out


def matrix_flow_singular_values(
    Y: np.ndarray,
    times: Sequence[float],
    z: complex,
    rng: np.random.Generator,
    backend: str = "native",
) -> List[np.ndarray]:
    """Singular values of X_s - z along the matrix flow; these are the positive DBM particles."""
    return [singular_values(X, z, backend) for X in matrix_flow(Y, times, rng)]


def overlap_cross_bracket(X: np.ndarray, z1: complex, z2: complex, backend: str = "native") -> np.ndarray:
    """C_ij = Re[<u_i^{z1}, u_j^{z2}> <v_j^{z2}, v_i^{z1}>] for unit singular vectors; C = I at z1 = z2."""
    t1 = hermitize(X, z1).singular_triplets(backend)
    t2 = hermitize(X, z2).singular_triplets(backend)
    uu = t1.left.conj().T @ t2.left
    vv = t1.right.conj().T @ t2.right
    return np.real(uu * np.conj(vv))


def overlap_induced_drivers(X: np.ndarray, z1: complex, z2: complex, backend: str = "native") -> Tuple[Driver, Driver]:
    """Driver pair whose cross bracket is the singular-vector overlap matrix of X at z1, z2, frozen at X."""
    return coupled_from_cross_bracket(overlap_cross_bracket(X, z1, z2, backend), backend)


@dataclass
class RouteComparison:
    statistic: float
    pvalue: float
    sde: np.ndarray
    matrix: np.ndarray
    alpha: float = 0.01
    ks_limit: float = ROUTE_KS_LIMIT

    @property
    def passed(self) -> bool:
        return self.statistic < self.ks_limit

    @property
    def pvalue_ok(self) -> bool:
        return self.pvalue >= self.alpha

    def to_json(self) -> dict:
        return {
            "ks": self.statistic,
            "pvalue": self.pvalue,
            "alpha": self.alpha,
            "ks_limit": self.ks_limit,
            "replicas_sde": int(self.sde.size),
            "replicas_matrix": int(self.matrix.size),
            "pass": self.passed,
        }


def _start_matrix(N: int, t: float, seed: int, replica: int) -> np.ndarray:
    return math.sqrt(1.0 - t) * sample_ginibre(N, replica_generator(seed, replica, 0))


def _sde_smallest(N: int, z: complex, t: float, dt: float, seed: int, backend: str, replica: int) -> float:
    Y = _start_matrix(N, t, seed, replica)
    init = ParticleConfiguration(singular_values(Y, z, backend))
    cfg = DBMSimConfig(N=N, dt=dt, T=t, seed=seed)
    traj = simulate_dbm(init, independent_driver(N), cfg, rng=replica_generator(seed, replica, 3))
    return float(traj.final[0])


def _matrix_smallest(N: int, z: complex, t: float, seed: int, backend: str, replica: int) -> float:
    Y = _start_matrix(N, t, seed, replica)
    rng = replica_generator(seed, replica, MATRIX_NOISE_STREAM)
    return float(matrix_flow_singular_values(Y, [t], z, rng, backend)[0][0])


def sde_vs_matrix(
    N: int,
    z: complex = 0j,
    t: float = 0.5,
    replicas: int = 500,
    seed: int = 0,
    dt: float = 1e-4,
    threads: int = 1,
    backend: str = "native",
    alpha: float = 0.01,
    ks_limit: float = ROUTE_KS_LIMIT,
) -> RouteComparison:
    """Smallest particle at time t from the SDE and from the matrix flow, both started at Y = sqrt(1-t) Ginibre."""
    if not (0.0 < t < 1.0):
        raise ValueError(f"t must lie in (0, 1), got {t}")
    sde = run_replicas(partial(_sde_smallest, N, complex(z), t, dt, seed, backend), replicas, threads, desc="dbm-sde")
    mat = run_replicas(partial(_matrix_smallest, N, complex(z), t, seed, backend), replicas, threads, desc="dbm-matrix")
    sde.require(1, "dbm-sde")
    mat.require(1, "dbm-matrix")
    a, b = np.asarray(sde.values), np.asarray(mat.values)
    res = stats.ks_2samp(a, b)
    logger.info(f"[dbm] SDE vs matrix route at N={N}, t={t}: KS={res.statistic:.4f} (p={res.pvalue:.3f})")
    return RouteComparison(statistic=float(res.statistic), pvalue=float(res.pvalue), sde=a, matrix=b, alpha=alpha, ks_limit=ks_limit)
