from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from src.linalg.hermitian import eigh


INDEPENDENT = "independent"
SHARED_BLOCK = "shared-block"
OVERLAP_INDUCED = "overlap-induced"
DRIVER_KINDS = (INDEPENDENT, SHARED_BLOCK, OVERLAP_INDUCED)


@dataclass(frozen=True)
class DriverSpec:
    kind: str = INDEPENDENT
    K: int = 0
    eps: float = 1.0
    rate: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in DRIVER_KINDS:
            raise ValueError(f"unknown driver kind {self.kind!r} (expected one of {DRIVER_KINDS})")
        if not (0.0 <= self.eps <= 1.0):
            raise ValueError(f"eps must lie in [0, 1], got {self.eps}")
        if not (0.0 <= self.rate <= 1.0):
            raise ValueError(f"driver rate must lie in [0, 1], got {self.rate}")
        if self.K < 0:
            raise ValueError(f"K must be >= 0, got {self.K}")


@dataclass(frozen=True)
class Driver:
    """Martingales b = A W on the positive indices, W a standard Brownian motion in R^M.

    b_{-i} = -b_i; d<b_i, b_j>/dt = (A A^T)_ij.
    """

    mixing: np.ndarray

    @property
    def N(self) -> int:
        return int(self.mixing.shape[0])

    @property
    def dim(self) -> int:
        return int(self.mixing.shape[1])

    def increment(self, dW: np.ndarray) -> np.ndarray:
        return self.mixing @ dW

    def bracket_rates(self) -> np.ndarray:
        return np.sum(self.mixing ** 2, axis=1)


def independent_driver(N: int, rate: float = 1.0) -> Driver:
    return Driver(mixing=math.sqrt(rate) * np.eye(N))


def mixing_weights(N: int, K: int, eps: float) -> np.ndarray:
    """eps_i = eps for i <= K, 1 (independent) beyond."""
    w = np.ones(N)
    w[: min(K, N)] = eps
    return w


def make_coupled_drivers(N: int, K: int, eps: float, rate: float = 1.0) -> Tuple[Driver, Driver]:
    """b^r_i = sqrt(1 - eps_i^2) b^s_i + eps_i w_i, sharing a 2N-dimensional base motion.

    d<b^s_i - b^r_i>/dt = 2 rate (1 - sqrt(1 - eps_i^2)) <= rate eps_i^2.
    """
    if not (0.0 <= eps <= 1.0):
        raise ValueError(f"eps must lie in [0, 1], got {eps}")
    e = mixing_weights(N, K, eps)
    s = math.sqrt(rate)
    A_s = np.hstack([s * np.eye(N), np.zeros((N, N))])
    A_r = np.hstack([s * np.diag(np.sqrt(1.0 - e * e)), s * np.diag(e)])
    return Driver(A_s), Driver(A_r)


def coupled_from_cross_bracket(C: np.ndarray, backend: str = "native") -> Tuple[Driver, Driver]:
    """Pair with d<b^s_i, b^r_j>/dt = C_ij and unit brackets: A_s = [I, 0], A_r = [C^T, (I - C^T C)^{1/2}]."""
    C = np.asarray(C, dtype=float)
    N = C.shape[0]
    S2 = np.eye(N) - C.T @ C
    S2 = 0.5 * (S2 + S2.T)
    vals, vecs = eigh(S2.astype(np.complex128), backend=backend)
    vals = np.clip(np.real(vals), 0.0, None)
    S = np.real((vecs * np.sqrt(vals)[None, :]) @ vecs.conj().T)
    A_s = np.hstack([np.eye(N), np.zeros((N, N))])
    A_r = np.hstack([C.T, S])
    return Driver(A_s), Driver(A_r)


def drivers_for(spec: DriverSpec, N: int) -> Tuple[Driver, Driver]:
    """Driver pair of a spec; `independent` gives two fully independent motions."""
    if spec.kind == INDEPENDENT:
        return make_coupled_drivers(N, 0, 1.0, spec.rate)
    if spec.kind == SHARED_BLOCK:
        return make_coupled_drivers(N, spec.K, spec.eps, spec.rate)
    raise ValueError("overlap-induced drivers are built from matrix singular vectors (see matrix_route)")
