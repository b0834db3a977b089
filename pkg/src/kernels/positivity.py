from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from src.errors import PositivityError
from src.kernels.bessel import q_hat
from src.kernels.covariance import DEFAULT_RESOLUTION, gamma_macroscopic, gamma_mesoscopic
from src.kernels.testfunctions import TestFunction
from src.linalg.hermitian import eigvalsh
from src.utils.logging import setup_logger


logger = setup_logger()

MAX_GRAM = 12


def semigroup_defect(r1: float, r2: float, xis: Optional[np.ndarray] = None) -> float:
    """sup_xi |q_hat(r1 + r2, xi) - q_hat(r1, xi) q_hat(r2, xi)|."""
    if r1 < 0 or r2 < 0:
        raise ValueError(f"r1, r2 must be >= 0, got {r1}, {r2}")
    if xis is None:
        xis = np.linspace(0.0, 20.0, 801)
    vals = [abs(q_hat(r1 + r2, x) - q_hat(r1, x) * q_hat(r2, x)) for x in xis]
    return float(max(vals))


@dataclass
class GramReport:
    gram: np.ndarray
    lambda_min: float
    trace: float
    schwarz_ok: bool

    def to_json(self) -> dict:
        return {"lambda_min": self.lambda_min, "trace": self.trace, "schwarz_ok": self.schwarz_ok, "gram": self.gram}


def gram_matrix(
    functions: Sequence[TestFunction],
    times: Sequence[float],
    v: complex = 0j,
    kernel: str = "meso",
    kappa: float = 0.0,
    resolution: int = DEFAULT_RESOLUTION,
) -> np.ndarray:
    m = len(functions)
    if len(times) != m:
        raise ValueError(f"{m} functions but {len(times)} times")
    if m > MAX_GRAM:
        raise ValueError(f"Gram size {m} exceeds {MAX_GRAM}")
    G = np.zeros((m, m))
    for i in range(m):
        for j in range(i, m):
            tau = abs(times[i] - times[j])
            if kernel == "meso":
                pred = gamma_mesoscopic(functions[i], functions[j], tau, v, resolution=resolution)
            elif kernel == "macro":
                pred = gamma_macroscopic(functions[i], functions[j], tau, kappa, resolution=resolution)
            else:
                raise ValueError(f"unknown kernel selector {kernel!r}")
            G[i, j] = G[j, i] = pred.value
    return G


def psd_gram(
    functions: Sequence[TestFunction],
    times: Sequence[float],
    v: complex = 0j,
    kernel: str = "meso",
    kappa: float = 0.0,
    tol: float = 1e-6,
    resolution: int = DEFAULT_RESOLUTION,
) -> GramReport:
    """Smallest eigenvalue of G_ij = Gamma(f_i, f_j, |t_i - t_j|); raises when below -tol * trace."""
    G = gram_matrix(functions, times, v, kernel, kappa, resolution)
    lam = eigvalsh(G.astype(np.complex128))
    trace = float(np.trace(G))
    lam_min = float(lam[0])
    d = np.sqrt(np.maximum(np.diag(G), 0.0))
    slack = tol * max(trace, 1e-300)
    schwarz = bool(np.all(np.abs(G) <= np.outer(d, d) + slack))
    if lam_min < -tol * abs(trace):
        raise PositivityError(
            f"Gram matrix has lambda_min {lam_min:.3e} below -{tol:g} * trace ({trace:.3e})",
            lambda_min=lam_min,
            trace=trace,
        )
    logger.debug(f"[positivity] m={len(functions)} lambda_min={lam_min:.3e} trace={trace:.3e}")
    return GramReport(gram=G, lambda_min=lam_min, trace=trace, schwarz_ok=schwarz)


def default_xi_grid(n: int = 801, xi_max: float = 20.0) -> List[float]:
    return list(np.linspace(0.0, xi_max, n))
