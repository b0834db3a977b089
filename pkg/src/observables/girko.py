from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from src.errors import QuadratureError
from src.kernels.quadrature import QuadratureGrid, tensor_midpoint_grid
from src.kernels.testfunctions import TestFunction
from src.linalg.hermitize import hermitize
from src.linalg.resolvent import eta_integral_grid


@dataclass(frozen=True)
class GirkoSplit:
    J_T: float
    I_small: float
    I_micro: float
    I_meso: float
    eta0: float
    eta_c: float
    T: float

    @property
    def total(self) -> float:
        return self.J_T + self.I_small + self.I_micro + self.I_meso

    def to_row(self) -> dict:
        return {
            "J_T": self.J_T,
            "I_small": self.I_small,
            "I_micro": self.I_micro,
            "I_meso": self.I_meso,
            "total": self.total,
            "eta0": self.eta0,
            "eta_c": self.eta_c,
            "T": self.T,
        }


def default_thresholds(N: int, delta0: float = 0.1, delta1: float = 0.1, T_exp: float = 10.0) -> Tuple[float, float, float]:
    """(eta0, eta_c, T) = (N^{-1-delta0}, N^{-1+delta1}, N^{T_exp})."""
    return float(N) ** (-1.0 - delta0), float(N) ** (-1.0 + delta1), float(N) ** T_exp


def girko_grid(f: TestFunction, resolution: int = 96) -> QuadratureGrid:
    return tensor_midpoint_grid(f.center, f.support_radius, resolution)


def squared_singular_values(X: np.ndarray, points: np.ndarray, backend: str = "native") -> np.ndarray:
    """lambda_i(z)^2 of X - z for every grid point, shape (n_points, N)."""
    X = np.asarray(X, dtype=np.complex128)
    N = X.shape[0]
    work = np.zeros((2 * N, 2 * N), dtype=np.complex128)
    out = np.empty((points.size, N))
    for k, z in enumerate(points):
        lam = hermitize(X, complex(z)).singular_values(backend, workspace=work)
        out[k] = lam * lam
    return out


def girko_decompose(
    X: np.ndarray,
    f: TestFunction,
    eta0: float,
    eta_c: float,
    T: float,
    grid: Optional[QuadratureGrid] = None,
    backend: str = "native",
) -> GirkoSplit:
    """Split sum_i f(sigma_i) = (1/4pi) int Delta f(z) sum_j log lambda_j(z)^2 dz by eta regime.

    J_T carries sum_j log(lambda_j^2 + T^2) and the three I-terms carry -int Im Tr G^z(i eta) over
    [0, eta0], [eta0, eta_c] and [eta_c, T]. The constant 2N log T shared by J_T and the top
    regime integrates to zero against Delta f and is dropped from both.
    """
    if not (0.0 < eta0 < eta_c < T):
        raise ValueError(f"need 0 < eta0 < eta_c < T, got {eta0}, {eta_c}, {T}")
    if grid is None:
        grid = girko_grid(f)
    lap = np.real(f.laplacian(grid.points))
    keep = lap != 0
    if not np.any(keep):
        return GirkoSplit(0.0, 0.0, 0.0, 0.0, eta0, eta_c, T)
    pts, w = grid.points[keep], grid.weights[keep] * lap[keep]
    lam2 = squared_singular_values(X, pts, backend)

    with np.errstate(divide="ignore"):
        small = eta_integral_grid(lam2, 0.0, eta0)
    micro = eta_integral_grid(lam2, eta0, eta_c)
    top = np.sum(np.log1p(lam2 / T / T), axis=-1)
    meso = top - np.sum(np.log(lam2 + eta_c * eta_c), axis=-1)
    if not np.all(np.isfinite(small)):
        raise QuadratureError("a singular value vanished at a grid point; shift or refine the z-grid")

    c = 1.0 / (4.0 * math.pi)
    return GirkoSplit(
        J_T=float(c * np.sum(w * top)),
        I_small=float(-c * np.sum(w * small)),
        I_micro=float(-c * np.sum(w * micro)),
        I_meso=float(-c * np.sum(w * meso)),
        eta0=float(eta0),
        eta_c=float(eta_c),
        T=float(T),
    )


def trace_at(X: np.ndarray, z: complex, eta: float, backend: str = "native") -> float:
    """Im <G^z(i eta)> = (1/2N) sum_i 2 eta / (lambda_i^2 + eta^2)."""
    lam = hermitize(X, z).singular_values(backend)
    N = lam.size
    return float(np.sum(2.0 * eta / (lam * lam + eta * eta)) / (2.0 * N))
