from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ParticleConfiguration:
    """Positive-index particles 0 < x_1 < ... < x_N; the mirror x_{-i} = -x_i is implied."""

    x: np.ndarray

    def __post_init__(self) -> None:
        x = np.asarray(self.x, dtype=float)
        if x.ndim != 1 or x.size == 0:
            raise ValueError(f"expected a non-empty 1-D configuration, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("configuration has non-finite entries")
        if not is_ordered(x):
            raise ValueError("configuration must be strictly increasing with x_1 > 0")
        object.__setattr__(self, "x", x)

    @property
    def N(self) -> int:
        return int(self.x.size)

    def full(self) -> np.ndarray:
        return symmetric_full(self.x)


def is_ordered(x: np.ndarray) -> bool:
    return bool(x[0] > 0 and np.all(np.diff(x) > 0))


def symmetric_full(x: np.ndarray) -> np.ndarray:
    """The 2N-point antisymmetric configuration (-x_N, ..., -x_1, x_1, ..., x_N)."""
    return np.concatenate([-x[::-1], x])


def neighbor_gaps(x: np.ndarray) -> np.ndarray:
    """Smaller neighbor gap of each positive particle; x_1's left neighbor is its mirror -x_1."""
    left = np.empty_like(x)
    left[0] = 2.0 * x[0]
    left[1:] = np.diff(x)
    right = np.empty_like(x)
    right[:-1] = np.diff(x)
    right[-1] = np.inf
    return np.minimum(left, right)


def drift(x: np.ndarray) -> np.ndarray:
    """(1/2N) sum_{j != i, |j| <= N} 1/(x_i - x_j) written on the positive half:
    (1/2N) [sum_{j>=1, j!=i} (1/(x_i - x_j) + 1/(x_i + x_j)) + 1/(2 x_i)].
    """
    return interaction_drift(x) + 0.25 / (x.size * x)


def interaction_drift(x: np.ndarray) -> np.ndarray:
    """The drift without the mirror term (1/2N)(1/2x_i); bounded as x_1 -> 0."""
    d = x[:, None] - x[None, :]
    s = x[:, None] + x[None, :]
    np.fill_diagonal(d, np.inf)
    np.fill_diagonal(s, np.inf)
    return (np.sum(1.0 / d, axis=1) + np.sum(1.0 / s, axis=1)) / (2.0 * x.size)


def mirror_solve(a: np.ndarray, h: float, N: int) -> np.ndarray:
    """Positive root y of y = a + h / (4N y); increasing in a, so ordering of a carries over."""
    c = h / N
    root = np.sqrt(a * a + c)
    # rationalized branch for a < 0 keeps y > 0 in floating point
    return np.where(a >= 0, 0.5 * (a + root), 0.5 * c / (root - np.minimum(a, 0.0)))


def empirical_stieltjes(x: np.ndarray, w: complex) -> complex:
    """m(w) = (1/2N) sum_{1<=|i|<=N} 1/(x_i - w) over the symmetric configuration."""
    x = np.asarray(x, dtype=float)
    w = complex(w)
    return complex(np.sum(1.0 / (x - w) + 1.0 / (-x - w)) / (2.0 * x.size))
