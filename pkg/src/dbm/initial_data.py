from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid

from src.dbm.local_law import LocalLawReport, phi_of, regularity_check, regularity_lattice
from src.dbm.particles import ParticleConfiguration
from src.linalg.hermitize import singular_values
from src.theory.free_convolution import HermitizationTransform, SemicircleTransform, StieltjesProvider


QUANTILE_GRID = 8192


@dataclass
class RegularInitialData:
    """Particles together with the reference transform they are regular around."""

    particles: ParticleConfiguration
    reference: StieltjesProvider
    nu: float = 0.05
    G: float = 1.0

    @property
    def N(self) -> int:
        return self.particles.N

    @property
    def phi(self) -> float:
        return phi_of(self.N, self.nu)

    def verify(self, points: Optional[Sequence[complex]] = None) -> LocalLawReport:
        pts = points if points is not None else regularity_lattice(self.N, self.nu, self.G)
        return regularity_check(self.particles, self.reference, pts, self.phi)

    def reference_bounds(self, points: Optional[Sequence[complex]] = None) -> dict:
        """max |m~|, max |m~'| and min Im m~ over the points (the constant C of the regularity hypothesis)."""
        pts = points if points is not None else regularity_lattice(self.N, self.nu, self.G)
        vals = [self.reference(complex(w)) for w in pts]
        ders = [self.reference.derivative(complex(w)) for w in pts]
        return {
            "max_abs": float(max(abs(v) for v in vals)),
            "max_abs_derivative": float(max(abs(d) for d in ders)),
            "min_im": float(min(v.imag for v in vals)),
        }


def quantile_configuration(density: Callable[[float], float], edge: float, N: int, grid: int = QUANTILE_GRID) -> ParticleConfiguration:
    """x_i with int_0^{x_i} rho = (i - 1/2) / (2N) for a symmetric density supported in [-edge, edge]."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    if not edge > 0:
        raise ValueError(f"edge must be positive, got {edge}")
    xs = np.linspace(0.0, edge, grid + 1)
    rho = np.array([density(float(x)) for x in xs])
    if np.any(rho < 0):
        raise ValueError("density takes negative values")
    cdf = cumulative_trapezoid(rho, xs, initial=0.0)
    if cdf[-1] <= 0:
        raise ValueError("density has no mass on [0, edge]")
    # positive half carries mass 1/2
    cdf *= 0.5 / cdf[-1]
    targets = (np.arange(1, N + 1) - 0.5) / (2.0 * N)
    return ParticleConfiguration(np.interp(targets, cdf, xs))


def semicircle_quantiles(N: int, variance: float = 1.0) -> RegularInitialData:
    sc = SemicircleTransform(variance)
    return RegularInitialData(quantile_configuration(sc.density, sc.support()[1], N), sc)


def hermitization_configuration(X: np.ndarray, z: complex, backend: str = "native") -> RegularInitialData:
    """Singular values of X - z as positive particles, regular around the Hermitization law."""
    s = singular_values(X, z, backend)
    return RegularInitialData(ParticleConfiguration(s), HermitizationTransform(z))


def perturbed_quantiles(N: int, amp: float = 1.0, variance: float = 1.0) -> RegularInitialData:
    """Semicircle quantiles deformed by x -> x (1 + eps cos(pi x / 2E)), eps = amp / sqrt(N)."""
    base = semicircle_quantiles(N, variance)
    E = base.reference.support()[1]
    eps = amp / math.sqrt(N)
    # keeps x -> x (1 + eps cos) increasing
    if eps * (1.0 + math.pi / 2.0) >= 1.0:
        raise ValueError(f"perturbation amp / sqrt(N) = {eps:.3f} too large to keep the order")
    x = base.particles.x
    y = x * (1.0 + eps * np.cos(math.pi * x / (2.0 * E)))
    return RegularInitialData(ParticleConfiguration(y), base.reference)
