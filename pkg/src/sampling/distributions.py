from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np


COMPLEX_GAUSSIAN = "complex-gaussian"
UNIFORM_PHASE = "uniform-modulus-phase"
FOUR_POINT = "symmetric-four-point"
TWO_RADIUS = "two-radius-mixture"

KINDS = (COMPLEX_GAUSSIAN, UNIFORM_PHASE, FOUR_POINT, TWO_RADIUS)

_FOUR_POINTS = np.array([1.0, 1.0j, -1.0, -1.0j], dtype=complex)


def _as_shape(shape) -> Tuple[int, ...]:
    if isinstance(shape, (int, np.integer)):
        return (int(shape),)
    return tuple(int(s) for s in shape)


@dataclass(frozen=True)
class EntryDistribution:
    """Law of a normalized entry chi: E chi = 0, E|chi|^2 = 1, E chi^2 = 0."""

    kind: str = COMPLEX_GAUSSIAN
    params: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown distribution kind {self.kind!r} (expected one of {KINDS})")
        if self.kind == TWO_RADIUS:
            k4 = self.params.get("kappa4")
            if k4 is None:
                raise ValueError("two-radius-mixture needs params.kappa4")
            if not math.isfinite(k4) or k4 < -1.0:
                raise ValueError(f"two-radius-mixture requires kappa4 >= -1, got {k4}")
        elif self.params:
            raise ValueError(f"{self.kind} takes no parameters, got {sorted(self.params)}")

    @property
    def fourth_cumulant(self) -> float:
        if self.kind == COMPLEX_GAUSSIAN:
            return 0.0
        if self.kind in (UNIFORM_PHASE, FOUR_POINT):
            return -1.0
        return float(self.params["kappa4"])

    def radii(self) -> Tuple[Tuple[float, float], Tuple[float, float]]:
        """Squared radii (a, b) and their probabilities for the two-radius mixture."""
        k4 = self.fourth_cumulant
        if k4 <= 0.0:
            d = math.sqrt(1.0 + k4)
            return (1.0 - d, 1.0 + d), (0.5, 0.5)
        p = 1.0 / (2.0 + k4)
        return (0.0, 2.0 + k4), (1.0 - p, p)

    def sample(self, rng: np.random.Generator, shape) -> np.ndarray:
        if self.kind == COMPLEX_GAUSSIAN:
            g = rng.standard_normal(_as_shape(shape) + (2,))
            return (g[..., 0] + 1j * g[..., 1]) / math.sqrt(2.0)
        if self.kind == UNIFORM_PHASE:
            theta = rng.uniform(0.0, 2.0 * math.pi, size=shape)
            return np.exp(1j * theta)
        if self.kind == FOUR_POINT:
            k = rng.integers(0, 4, size=shape)
            return _FOUR_POINTS[k]
        (a, b), (_, pb) = self.radii()
        r2 = np.where(rng.random(size=shape) < pb, b, a)
        theta = rng.uniform(0.0, 2.0 * math.pi, size=shape)
        return np.sqrt(r2) * np.exp(1j * theta)


def kappa4_at_time(dist: EntryDistribution, t: float) -> float:
    """kappa_{4,t} of chi_t = e^{-t/2} chi + sqrt(1 - e^{-t}) g; cumulants add, Gaussian part has none."""
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    return math.exp(-2.0 * t) * dist.fourth_cumulant


def make_distribution(kind: str, kappa4: float | None = None) -> EntryDistribution:
    if kind == TWO_RADIUS:
        return EntryDistribution(kind, {"kappa4": float(kappa4 if kappa4 is not None else 0.0)})
    return EntryDistribution(kind)
