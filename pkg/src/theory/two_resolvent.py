from __future__ import annotations

import numpy as np

from src.errors import StabilityOperatorError
from src.linalg.lu import inverse, lu_factor, lu_solve
from src.theory.selfconsistent import E1, E2, M_from_point, ntr, solve_mz


MAX_CONDITION = 1e12


def covariance_operator(X: np.ndarray) -> np.ndarray:
    """S[X] = 2<X E1> E2 + 2<X E2> E1 = diag(X22, X11)."""
    return 2.0 * ntr(X @ E1) * E2 + 2.0 * ntr(X @ E2) * E1


def stability_matrix(M1: np.ndarray, M2: np.ndarray) -> np.ndarray:
    """Matrix of X -> X - M1 S[X] M2 in the basis E_11, E_12, E_21, E_22."""
    L = np.zeros((4, 4), dtype=np.complex128)
    for k in range(4):
        B = np.zeros(4, dtype=np.complex128)
        B[k] = 1.0
        X = B.reshape(2, 2)
        L[:, k] = (X - M1 @ covariance_operator(X) @ M2).ravel()
    return L


def _condition(L: np.ndarray) -> float:
    fac = lu_factor(L)
    if fac.singular:
        return float("inf")
    Linv = inverse(L)
    return float(np.max(np.sum(np.abs(L), axis=0)) * np.max(np.sum(np.abs(Linv), axis=0)))


def two_resolvent_M(z1: complex, eta1: float, z2: complex, eta2: float, A: np.ndarray) -> np.ndarray:
    """Deterministic approximation of G1 A G2: (1 - M1 S[.] M2)^{-1}[M1 A M2]."""
    M1 = M_from_point(solve_mz(z1, eta1))
    M2 = M_from_point(solve_mz(z2, eta2))
    return solve_stability(M1, M2, np.asarray(A, dtype=np.complex128))


def solve_stability(M1: np.ndarray, M2: np.ndarray, A: np.ndarray) -> np.ndarray:
    L = stability_matrix(M1, M2)
    cond = _condition(L)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise StabilityOperatorError("stability operator 1 - M1 S[.] M2 is singular", condition=cond)
    rhs = (M1 @ A @ M2).ravel()
    return lu_solve(lu_factor(L), rhs).reshape(2, 2)


def chiral_pair_sum(z1: complex, eta1: float, z2: complex, eta2: float) -> complex:
    """sum over (i, j) in {(1, 2), (2, 1)} of <M_{E_i} E_j>."""
    total = 0j
    for Ei, Ej in ((E1, E2), (E2, E1)):
        total += ntr(two_resolvent_M(z1, eta1, z2, eta2, Ei) @ Ej)
    return total


def chiral_pair_closed_form(z1: complex, eta1: float, z2: complex, eta2: float) -> complex:
    """Closed form of `chiral_pair_sum` in terms of m_i, u_i and Re(z1 conj(z2))."""
    p1, p2 = solve_mz(z1, eta1), solve_mz(z2, eta2)
    uu = p1.u * p2.u
    mm = (p1.m * p2.m) ** 2
    zz = abs(complex(z1) * complex(z2)) ** 2
    re = (complex(z1) * np.conj(complex(z2))).real
    num = uu * re - zz * uu * uu + mm
    den = 1.0 + zz * uu * uu - mm - 2.0 * uu * re
    return complex(num / den)
