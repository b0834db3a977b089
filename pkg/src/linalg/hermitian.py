from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from src.errors import LinalgConvergenceError, NotHermitianError


_EPS = np.finfo(float).eps


@dataclass
class HermitianEigen:
    values: np.ndarray
    vectors: Optional[np.ndarray]
    residual: float = 0.0
    orthogonality: float = 0.0


def check_hermitian(H: np.ndarray, tol: float = 1e-12) -> float:
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {H.shape}")
    scale = max(1.0, float(np.max(np.abs(H)))) if H.size else 1.0
    dev = float(np.max(np.abs(H - H.conj().T))) if H.size else 0.0
    if dev > tol * scale:
        raise NotHermitianError(f"matrix deviates from Hermitian by {dev:.3e} (scale {scale:.3e})")
    return scale


def householder_reflector(x: np.ndarray) -> Tuple[Optional[np.ndarray], complex]:
    """Unit v with (I - 2 v v*) x = beta e1; returns (None, x0) when x is already e1-aligned."""
    tail = float(np.linalg.norm(x[1:])) if x.size > 1 else 0.0
    if tail == 0.0:
        return None, complex(x[0])
    alpha = math.hypot(abs(x[0]), tail)
    phase = x[0] / abs(x[0]) if x[0] != 0 else 1.0
    v = x.astype(np.complex128, copy=True)
    v[0] += phase * alpha
    v /= np.linalg.norm(v)
    return v, complex(-phase * alpha)


def tridiagonalize(H: np.ndarray, want_vectors: bool = True) -> Tuple[np.ndarray, np.ndarray, Optional[np.ndarray]]:
    """Reduce a Hermitian matrix to real symmetric tridiagonal form.

    Returns (d, e, Q) with H = Q T Q*, T having diagonal d and real nonnegative off-diagonal e.
    The complex phases of the Householder output are folded into Q by a diagonal unitary.
    """
    A = np.array(H, dtype=np.complex128, copy=True)
    n = A.shape[0]
    Q = np.eye(n, dtype=np.complex128) if want_vectors else None
    for k in range(n - 2):
        v, beta = householder_reflector(A[k + 1:, k])
        if v is None:
            continue
        A[k + 1:, k:] -= 2.0 * np.outer(v, v.conj() @ A[k + 1:, k:])
        A[k:, k + 1:] -= 2.0 * np.outer(A[k:, k + 1:] @ v, v.conj())
        A[k + 1, k] = beta
        A[k, k + 1] = np.conj(beta)
        A[k + 2:, k] = 0.0
        A[k, k + 2:] = 0.0
        if Q is not None:
            Q[:, k + 1:] -= 2.0 * np.outer(Q[:, k + 1:] @ v, v.conj())
    d = np.real(np.diagonal(A)).copy()
    off = np.array([A[k + 1, k] for k in range(n - 1)], dtype=np.complex128)
    e = np.abs(off)
    if Q is not None and n > 1:
        # D_{k+1} = D_k * off_k / |off_k| makes T real
        phases = np.ones(n, dtype=np.complex128)
        for k in range(n - 1):
            phases[k + 1] = phases[k] * (off[k] / e[k] if e[k] > 0 else 1.0)
        Q = Q * phases[None, :]
    return d, e, Q


def tridiagonal_ql(d: np.ndarray, e: np.ndarray, Zt: Optional[np.ndarray] = None, max_iter: int = 30) -> np.ndarray:
    """Implicit-shift QL on a real symmetric tridiagonal matrix, in place.

    `e` has length n-1 (coupling i and i+1). `Zt` holds basis vectors as ROWS and receives the
    same rotations, so on exit row i is the eigenvector for d[i].
    """
    n = d.shape[0]
    e = np.concatenate([np.asarray(e, dtype=float), [0.0]])
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= _EPS * dd:
                    break
                m += 1
            if m == l:
                break
            it += 1
            if it > max_iter:
                raise LinalgConvergenceError(f"tridiagonal QL did not converge within {max_iter} iterations", index=l)
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = c = 1.0
            p = 0.0
            underflow = False
            i = m - 1
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                if Zt is not None:
                    zi1 = Zt[i + 1].copy()
                    Zt[i + 1] = s * Zt[i] + c * zi1
                    Zt[i] = c * Zt[i] - s * zi1
                i -= 1
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return d


def hermitian_eigensolve(H: np.ndarray, vectors: bool = True, tol: float = 1e-12, max_iter: int = 30) -> HermitianEigen:
    """Eigen-decomposition of a Hermitian matrix: eigenvalues ascending, orthonormal eigenvector columns."""
    H = np.asarray(H)
    scale = check_hermitian(H, tol)
    n = H.shape[0]
    if n == 0:
        return HermitianEigen(values=np.zeros(0), vectors=np.zeros((0, 0), dtype=np.complex128) if vectors else None)
    Hs = 0.5 * (H + H.conj().T)
    d, e, Q = tridiagonalize(Hs, want_vectors=vectors)
    Zt = Q.T.copy() if Q is not None else None
    d = tridiagonal_ql(d, e, Zt, max_iter=max_iter)
    order = np.argsort(d, kind="stable")
    values = d[order]
    if Zt is None:
        return HermitianEigen(values=values, vectors=None)
    V = Zt[order].T.copy()
    resid = float(np.max(np.linalg.norm(Hs @ V - V * values[None, :], axis=0))) / scale
    ortho = float(np.max(np.abs(V.conj().T @ V - np.eye(n))))
    return HermitianEigen(values=values, vectors=V, residual=resid, orthogonality=ortho)


def eigvalsh(H: np.ndarray, backend: str = "native") -> np.ndarray:
    if backend == "numpy":
        return np.linalg.eigvalsh(H)
    return hermitian_eigensolve(H, vectors=False).values


def eigh(H: np.ndarray, backend: str = "native") -> Tuple[np.ndarray, np.ndarray]:
    if backend == "numpy":
        return np.linalg.eigh(H)
    res = hermitian_eigensolve(H, vectors=True)
    return res.values, res.vectors
