from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class LogAbsDet:
    value: float
    singular: bool = False

    def __float__(self) -> float:
        return self.value


@dataclass
class LUFactor:
    lu: np.ndarray
    piv: np.ndarray
    singular: bool


def _check_square(A: np.ndarray) -> None:
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")


def lu_factor(A: np.ndarray, workspace: Optional[np.ndarray] = None) -> LUFactor:
    """Partial-pivot LU, P A = L U, L unit lower triangular stored below the diagonal.

    `workspace`, when given with the right shape and complex dtype, receives the factors and
    is reused across calls instead of allocating a fresh copy.
    """
    A = np.asarray(A)
    _check_square(A)
    n = A.shape[0]
    if workspace is not None and workspace.shape == A.shape and workspace.dtype == np.complex128:
        lu = workspace
        lu[...] = A
    else:
        lu = np.array(A, dtype=np.complex128, copy=True)
    piv = np.arange(n)
    singular = False
    for k in range(n):
        p = k + int(np.argmax(np.abs(lu[k:, k])))
        if lu[p, k] == 0:
            singular = True
            continue
        if p != k:
            lu[[k, p], :] = lu[[p, k], :]
            piv[[k, p]] = piv[[p, k]]
        lu[k + 1:, k] /= lu[k, k]
        if k + 1 < n:
            lu[k + 1:, k + 1:] -= lu[k + 1:, k, None] * lu[None, k, k + 1:]
    return LUFactor(lu=lu, piv=piv, singular=singular)


def lu_logabsdet(A: np.ndarray, workspace: Optional[np.ndarray] = None) -> LogAbsDet:
    """sum_k log|u_kk|; an exactly singular input gives LogAbsDet(-inf, singular=True)."""
    fac = lu_factor(A, workspace)
    if fac.singular:
        return LogAbsDet(value=-math.inf, singular=True)
    d = np.abs(np.diagonal(fac.lu))
    return LogAbsDet(value=float(np.sum(np.log(d))), singular=False)


def lu_solve(fac: LUFactor, b: np.ndarray) -> np.ndarray:
    if fac.singular:
        raise ZeroDivisionError("cannot solve with a singular LU factorization")
    lu = fac.lu
    n = lu.shape[0]
    x = np.array(b, dtype=np.complex128, copy=True)[fac.piv]
    for i in range(1, n):
        x[i] -= lu[i, :i] @ x[:i]
    for i in range(n - 1, -1, -1):
        x[i] = (x[i] - lu[i, i + 1:] @ x[i + 1:]) / lu[i, i]
    return x


def solve(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    return lu_solve(lu_factor(A), b)


def inverse(A: np.ndarray) -> np.ndarray:
    fac = lu_factor(A)
    n = fac.lu.shape[0]
    return lu_solve(fac, np.eye(n, dtype=np.complex128))
