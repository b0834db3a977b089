from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.linalg.hermitian import hermitian_eigensolve


@dataclass
class SingularTriplets:
    """Singular values ascending with left (u) and right (v) unit singular vectors as columns."""

    values: np.ndarray
    left: Optional[np.ndarray] = None
    right: Optional[np.ndarray] = None


@dataclass
class HermitizedOperator:
    """[[0, X - z], [(X - z)*, 0]] kept implicit; `dense()` materializes it on request."""

    base: np.ndarray
    z: complex = 0j

    def __post_init__(self) -> None:
        self.base = np.asarray(self.base, dtype=np.complex128)
        if self.base.ndim != 2 or self.base.shape[0] != self.base.shape[1]:
            raise ValueError(f"hermitization needs a square matrix, got shape {self.base.shape}")
        self.z = complex(self.z)

    @property
    def N(self) -> int:
        return self.base.shape[0]

    def shifted(self) -> np.ndarray:
        A = self.base.copy()
        A[np.diag_indices(self.N)] -= self.z
        return A

    def matvec(self, x: np.ndarray) -> np.ndarray:
        N = self.N
        x = np.asarray(x, dtype=np.complex128)
        top, bottom = x[:N], x[N:]
        return np.concatenate([self.base @ bottom - self.z * bottom, self.base.conj().T @ top - np.conj(self.z) * top])

    def dense(self, out: Optional[np.ndarray] = None) -> np.ndarray:
        N = self.N
        if out is None or out.shape != (2 * N, 2 * N):
            out = np.zeros((2 * N, 2 * N), dtype=np.complex128)
        else:
            out[:N, :N] = 0.0
            out[N:, N:] = 0.0
        A = self.shifted()
        out[:N, N:] = A
        out[N:, :N] = A.conj().T
        return out

    def spectrum(self, backend: str = "native", workspace: Optional[np.ndarray] = None) -> np.ndarray:
        """All 2N eigenvalues ascending; symmetric about zero."""
        W = self.dense(workspace)
        if backend == "numpy":
            return np.linalg.eigvalsh(W)
        return hermitian_eigensolve(W, vectors=False).values

    def singular_values(self, backend: str = "native", workspace: Optional[np.ndarray] = None) -> np.ndarray:
        return _fold(self.spectrum(backend, workspace), self.N)

    def singular_triplets(self, backend: str = "native") -> SingularTriplets:
        """Triplets from the chiral eigenvectors w = (u, v)/sqrt(2) of the positive half of the spectrum."""
        N = self.N
        W = self.dense()
        if backend == "numpy":
            vals, vecs = np.linalg.eigh(W)
        else:
            res = hermitian_eigensolve(W, vectors=True)
            vals, vecs = res.values, res.vectors
        upper = vecs[:, N:]
        u = math.sqrt(2.0) * upper[:N, :]
        v = math.sqrt(2.0) * upper[N:, :]
        return SingularTriplets(values=_fold(vals, N), left=u, right=v)


def _fold(spectrum: np.ndarray, N: int) -> np.ndarray:
    """Average the +/- halves of a chiral spectrum into N nonnegative singular values."""
    pos = spectrum[N:]
    neg = -spectrum[:N][::-1]
    return np.maximum(0.5 * (pos + neg), 0.0)


def hermitize(X: np.ndarray, z: complex) -> HermitizedOperator:
    return HermitizedOperator(base=X, z=z)


def singular_values(X: np.ndarray, z: complex, backend: str = "native") -> np.ndarray:
    """Singular values of X - z, ascending, computed from the Hermitization."""
    return hermitize(X, z).singular_values(backend)
