from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence, Union

import numpy as np

from src.kernels.testfunctions import TestFunction
from src.linalg.hermitize import singular_values
from src.linalg.lu import LogAbsDet, lu_logabsdet
from src.linalg.nonhermitian import SpectralDecomposition


@dataclass(frozen=True)
class LinearStatistic:
    """Uncentered sum of f over the spectrum; centering happens at the estimator level."""

    function_id: str
    time: float
    raw_value: float

    def to_row(self, replica: int) -> Dict[str, object]:
        return {"replica": replica, "time": self.time, "function_id": self.function_id, "value": self.raw_value}


def linear_statistic(
    spec: Union[SpectralDecomposition, np.ndarray],
    f: TestFunction,
    time: float = 0.0,
) -> LinearStatistic:
    lam = spec.eigenvalues if isinstance(spec, SpectralDecomposition) else np.asarray(spec)
    vals = np.real(f.value(np.asarray(lam, dtype=np.complex128)))
    return LinearStatistic(function_id=f.id, time=float(time), raw_value=float(np.sum(vals)))


def linear_statistics(
    eigenvalues: np.ndarray,
    functions: Iterable[TestFunction],
    time: float = 0.0,
) -> List[LinearStatistic]:
    return [linear_statistic(eigenvalues, f, time) for f in functions]


def logdet_field(X: np.ndarray, points: Sequence[complex]) -> List[LogAbsDet]:
    """log|det(X - z)| at each point through a pivoted LU; singular points carry the flag."""
    X = np.asarray(X, dtype=np.complex128)
    n = X.shape[0]
    work = np.empty_like(X)
    shifted = X.copy()
    diag = np.diag_indices(n)
    out: List[LogAbsDet] = []
    for z in points:
        z = complex(z)
        if not np.isfinite(z):
            raise ValueError(f"log-determinant point must be finite, got {z}")
        shifted[diag] = X[diag] - z
        out.append(lu_logabsdet(shifted, workspace=work))
    return out


def logdet_from_singular_values(X: np.ndarray, z: complex, backend: str = "native") -> float:
    """(1/2) sum_i log(lambda_i(z)^2) from the Hermitization spectrum."""
    lam = singular_values(X, z, backend)
    with np.errstate(divide="ignore"):
        return float(0.5 * np.sum(np.log(lam * lam)))
