from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from src.errors import LinalgConvergenceError
from src.linalg.hermitian import householder_reflector
from src.utils.logging import setup_logger


logger = setup_logger()

MAX_N = 1024
_DEFLATE = 1e-14
_SMALL = np.finfo(float).tiny / np.finfo(float).eps


@dataclass
class SpectralDecomposition:
    """Eigenvalues with biorthogonal right/left eigenvectors: L^T R = I, columns of R unit norm."""

    eigenvalues: np.ndarray
    right: Optional[np.ndarray] = None
    left: Optional[np.ndarray] = None
    residuals: Optional[np.ndarray] = None
    biorth_error: float = 0.0
    defective: Optional[np.ndarray] = None

    def overlaps(self) -> np.ndarray:
        """Diagonal overlaps O_ii = ||L_i||^2 ||R_i||^2."""
        if self.right is None or self.left is None:
            raise ValueError("eigenvectors were not computed")
        return np.sum(np.abs(self.left) ** 2, axis=0) * np.sum(np.abs(self.right) ** 2, axis=0)

    @property
    def any_defective(self) -> bool:
        return bool(self.defective is not None and np.any(self.defective))


def balance(A: np.ndarray, radix: float = 2.0) -> Tuple[np.ndarray, np.ndarray]:
    """Diagonal similarity B = D^-1 A D equalizing row/column norms; returns (B, diag(D))."""
    B = np.array(A, dtype=np.complex128, copy=True)
    n = B.shape[0]
    scale = np.ones(n)
    sqrdx = radix * radix
    done = False
    while not done:
        done = True
        for i in range(n):
            c = float(np.sum(np.abs(B[:, i]))) - abs(B[i, i])
            r = float(np.sum(np.abs(B[i, :]))) - abs(B[i, i])
            if c == 0.0 or r == 0.0:
                continue
            g = r / radix
            f = 1.0
            s = c + r
            while c < g:
                f *= radix
                c *= sqrdx
            g = r * radix
            while c > g:
                f /= radix
                c /= sqrdx
            if (c + r) / f < 0.95 * s:
                done = False
                scale[i] *= f
                B[i, :] /= f
                B[:, i] *= f
    return B, scale


def hessenberg(A: np.ndarray, want_q: bool = True) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """Householder reduction A = Q H Q*, H upper Hessenberg."""
    H = np.array(A, dtype=np.complex128, copy=True)
    n = H.shape[0]
    Q = np.eye(n, dtype=np.complex128) if want_q else None
    for k in range(n - 2):
        v, beta = householder_reflector(H[k + 1:, k])
        if v is None:
            continue
        H[k + 1:, k:] -= 2.0 * np.outer(v, v.conj() @ H[k + 1:, k:])
        H[:, k + 1:] -= 2.0 * np.outer(H[:, k + 1:] @ v, v.conj())
        H[k + 1, k] = beta
        H[k + 2:, k] = 0.0
        if Q is not None:
            Q[:, k + 1:] -= 2.0 * np.outer(Q[:, k + 1:] @ v, v.conj())
    return H, Q


def _givens(x: complex, y: complex) -> Tuple[float, complex]:
    """(c, s) with [[c, s], [-conj(s), c]] [x, y]^T = [r, 0]^T."""
    ay = abs(y)
    if ay == 0.0:
        return 1.0, 0j
    ax = abs(x)
    if ax == 0.0:
        return 0.0, complex(np.conj(y) / ay)
    rho = math.hypot(ax, ay)
    return ax / rho, (x / ax) * np.conj(y) / rho


def _wilkinson_shift(a: complex, b: complex, c: complex, d: complex) -> complex:
    half = 0.5 * (a - d)
    disc = cmath.sqrt(half * half + b * c)
    mean = 0.5 * (a + d)
    mu1, mu2 = mean + disc, mean - disc
    return mu1 if abs(mu1 - d) < abs(mu2 - d) else mu2


def schur(H: np.ndarray, Z: Optional[np.ndarray] = None, max_sweeps: Optional[int] = None) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """Complex single-shift QR on an upper Hessenberg matrix, in place.

    On exit H is upper triangular (the complex Schur form) and Z has been multiplied on the right
    by the accumulated unitary.
    """
    n = H.shape[0]
    max_sweeps = 40 * max(n, 1) if max_sweeps is None else max_sweeps
    hnorm = float(np.max(np.abs(H))) if H.size else 0.0
    hi = n - 1
    its = 0
    total = 0
    while hi >= 1:
        l = hi
        while l > 0:
            s = abs(H[l - 1, l - 1]) + abs(H[l, l])
            if s == 0.0:
                s = hnorm
            if abs(H[l, l - 1]) <= _DEFLATE * s:
                H[l, l - 1] = 0.0
                break
            l -= 1
        if l == hi:
            hi -= 1
            its = 0
            continue
        its += 1
        total += 1
        if total > max_sweeps:
            raise LinalgConvergenceError(f"QR iteration exceeded {max_sweeps} sweeps", index=hi)
        if its % 10 == 0:
            # exceptional shift breaks cycles
            mu = H[hi, hi] + 0.75 * abs(H[hi, hi - 1])
        else:
            mu = _wilkinson_shift(H[hi - 1, hi - 1], H[hi - 1, hi], H[hi, hi - 1], H[hi, hi])
        x = H[l, l] - mu
        y = H[l + 1, l]
        for k in range(l, hi):
            if k > l:
                x = H[k, k - 1]
                y = H[k + 1, k - 1]
            c, s = _givens(x, y)
            sc = np.conj(s)
            j0 = max(l, k - 1)
            rk = H[k, j0:].copy()
            rk1 = H[k + 1, j0:].copy()
            H[k, j0:] = c * rk + s * rk1
            H[k + 1, j0:] = -sc * rk + c * rk1
            i1 = min(k + 2, hi) + 1
            ck = H[:i1, k].copy()
            ck1 = H[:i1, k + 1].copy()
            H[:i1, k] = c * ck + sc * ck1
            H[:i1, k + 1] = -s * ck + c * ck1
            if k > l:
                H[k + 1, k - 1] = 0.0
            if Z is not None:
                zk = Z[:, k].copy()
                zk1 = Z[:, k + 1].copy()
                Z[:, k] = c * zk + sc * zk1
                Z[:, k + 1] = -s * zk + c * zk1
    return H, Z


def _triangular_right(T: np.ndarray) -> np.ndarray:
    n = T.shape[0]
    Y = np.zeros((n, n), dtype=np.complex128)
    tnorm = max(float(np.max(np.abs(T))), _SMALL)
    for k in range(n):
        lam = T[k, k]
        smin = max(np.finfo(float).eps * abs(lam), 1e-300, np.finfo(float).eps * tnorm * 1e-3)
        y = Y[:, k]
        y[k] = 1.0
        for j in range(k - 1, -1, -1):
            den = T[j, j] - lam
            if abs(den) < smin:
                den = smin
            y[j] = -(T[j, j + 1:k + 1] @ y[j + 1:k + 1]) / den
    return Y


def _triangular_left(T: np.ndarray) -> np.ndarray:
    """W with W[:, k]^T T = T_kk W[:, k]^T."""
    n = T.shape[0]
    W = np.zeros((n, n), dtype=np.complex128)
    tnorm = max(float(np.max(np.abs(T))), _SMALL)
    for k in range(n):
        lam = T[k, k]
        smin = max(np.finfo(float).eps * abs(lam), 1e-300, np.finfo(float).eps * tnorm * 1e-3)
        w = W[:, k]
        w[k] = 1.0
        for j in range(k + 1, n):
            den = T[j, j] - lam
            if abs(den) < smin:
                den = smin
            w[j] = -(w[k:j] @ T[k:j, j]) / den
    return W


def nonhermitian_eigensolve(
    X: np.ndarray,
    vectors: bool = True,
    balance_first: bool = True,
    tol: float = 1e-8,
    max_n: int = MAX_N,
) -> SpectralDecomposition:
    """Full eigen-decomposition of a general complex matrix.

    Balancing, Hessenberg reduction, complex Schur form, then right/left eigenvectors by
    back-substitution on the triangular factor. Eigenpairs whose residual exceeds `tol`
    (relative to ||X||_F) or whose biorthogonality row error exceeds `tol` are flagged defective.
    """
    X = np.asarray(X, dtype=np.complex128)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {X.shape}")
    n = X.shape[0]
    if n > max_n:
        raise ValueError(f"matrix size {n} exceeds the native solver cap {max_n}")
    if n == 0:
        return SpectralDecomposition(eigenvalues=np.zeros(0, dtype=np.complex128))
    if balance_first:
        B, dscale = balance(X)
    else:
        B, dscale = X.copy(), np.ones(n)
    H, Q = hessenberg(B, want_q=vectors)
    T, U = schur(H, Q)
    lam = np.diagonal(T).copy()
    if not vectors:
        return SpectralDecomposition(eigenvalues=lam)

    R = U @ _triangular_right(T)
    L = np.conj(U) @ _triangular_left(T)
    R = dscale[:, None] * R
    L = L / dscale[:, None]

    rn = np.linalg.norm(R, axis=0)
    rn[rn == 0] = 1.0
    R = R / rn[None, :]
    pair = np.einsum("ij,ij->j", L, R)
    bad_pair = np.abs(pair) == 0
    pair[bad_pair] = 1.0
    L = L / pair[None, :]

    xnorm = max(float(np.linalg.norm(X)), _SMALL)
    residuals = np.linalg.norm(X @ R - R * lam[None, :], axis=0) / xnorm
    G = L.T @ R
    err = np.abs(G - np.eye(n))
    row_err = np.max(err, axis=1)
    defective = (residuals > tol) | (row_err > tol * max(1.0, n)) | bad_pair | ~np.isfinite(residuals)
    if np.any(defective):
        logger.debug(f"[linalg] {int(np.sum(defective))} of {n} eigenpairs flagged defective")
    return SpectralDecomposition(
        eigenvalues=lam,
        right=R,
        left=L,
        residuals=residuals,
        biorth_error=float(np.max(err)),
        defective=defective,
    )


def eigenvalues(X: np.ndarray, backend: str = "native") -> np.ndarray:
    if backend == "numpy":
        return np.linalg.eigvals(X)
    return nonhermitian_eigensolve(X, vectors=False).eigenvalues


def eigendecompose(X: np.ndarray, backend: str = "native", tol: float = 1e-8) -> SpectralDecomposition:
    if backend != "numpy":
        return nonhermitian_eigensolve(X, vectors=True, tol=tol)
    X = np.asarray(X, dtype=np.complex128)
    lam, R = np.linalg.eig(X)
    R = R / np.linalg.norm(R, axis=0)[None, :]
    L = np.linalg.inv(R).T
    n = X.shape[0]
    xnorm = max(float(np.linalg.norm(X)), _SMALL)
    residuals = np.linalg.norm(X @ R - R * lam[None, :], axis=0) / xnorm
    err = np.abs(L.T @ R - np.eye(n))
    defective = (residuals > tol) | (np.max(err, axis=1) > tol * max(1.0, n))
    return SpectralDecomposition(eigenvalues=lam, right=R, left=L, residuals=residuals, biorth_error=float(np.max(err)), defective=defective)
