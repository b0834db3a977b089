from __future__ import annotations

import cmath
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from src.errors import FreeConvolutionError
from src.theory.selfconsistent import solve_mz_general
from src.utils.logging import setup_logger


logger = setup_logger()

NEWTON_TOL = 1e-12
RICHARDSON_ETAS = (1e-3, 5e-4, 2.5e-4)


class StieltjesProvider(ABC):
    """m(w) = int mu(dx) / (x - w) on the upper half plane."""

    name: str = "stieltjes"

    @abstractmethod
    def __call__(self, w: complex) -> complex:
        ...

    def derivative(self, w: complex) -> complex:
        h = 1e-6 * max(1.0, abs(w))
        h = min(h, 0.25 * w.imag)
        return (self(w + h) - self(w - h)) / (2.0 * h)

    @abstractmethod
    def support(self) -> Tuple[float, float]:
        """Interval containing the support of mu."""


class SemicircleTransform(StieltjesProvider):
    """Semicircle law of variance sigma^2, supported on [-2 sigma, 2 sigma]."""

    def __init__(self, variance: float = 1.0) -> None:
        if variance <= 0:
            raise ValueError(f"variance must be positive, got {variance}")
        self.variance = float(variance)
        self.sigma = math.sqrt(self.variance)
        self.name = f"semicircle({self.variance:g})"

    def __call__(self, w: complex) -> complex:
        w = complex(w)
        s = self.sigma
        return (-w + cmath.sqrt(w - 2.0 * s) * cmath.sqrt(w + 2.0 * s)) / (2.0 * self.variance)

    def derivative(self, w: complex) -> complex:
        m = self(w)
        # from variance m^2 + w m + 1 = 0
        return -m / (2.0 * self.variance * m + w)

    def density(self, x: float) -> float:
        r = 4.0 * self.variance - x * x
        return math.sqrt(r) / (2.0 * math.pi * self.variance) if r > 0 else 0.0

    def support(self) -> Tuple[float, float]:
        return -2.0 * self.sigma, 2.0 * self.sigma


class DiracTransform(StieltjesProvider):
    name = "dirac(0)"

    def __call__(self, w: complex) -> complex:
        return -1.0 / complex(w)

    def derivative(self, w: complex) -> complex:
        return 1.0 / complex(w) ** 2

    def support(self) -> Tuple[float, float]:
        return 0.0, 0.0


class EmpiricalTransform(StieltjesProvider):
    def __init__(self, points: Sequence[float]) -> None:
        self.points = np.asarray(points, dtype=float)
        if self.points.size == 0:
            raise ValueError("empirical measure needs at least one point")
        self.name = f"empirical({self.points.size})"

    def __call__(self, w: complex) -> complex:
        return complex(np.mean(1.0 / (self.points - complex(w))))

    def derivative(self, w: complex) -> complex:
        return complex(np.mean(1.0 / (self.points - complex(w)) ** 2))

    def support(self) -> Tuple[float, float]:
        return float(self.points.min()), float(self.points.max())


class HermitizationTransform(StieltjesProvider):
    """Symmetrized singular-value law of X - z for i.i.d. X, from m^3 + 2w m^2 + (w^2 + 1 - |z|^2) m + w = 0."""

    def __init__(self, z: complex) -> None:
        self.z = complex(z)
        self.name = f"hermitization({self.z})"

    def __call__(self, w: complex) -> complex:
        return solve_mz_general(self.z, complex(w))

    def derivative(self, w: complex) -> complex:
        w = complex(w)
        m = self(w)
        z2 = abs(self.z) ** 2
        p_w = 2.0 * m * m + 2.0 * w * m + 1.0
        p_m = 3.0 * m * m + 4.0 * w * m + w * w + 1.0 - z2
        return -p_w / p_m

    def support(self) -> Tuple[float, float]:
        edge = 2.0 + abs(self.z)
        return -edge, edge


@dataclass
class FreeConvolutionModel:
    m0: StieltjesProvider
    t: float

    def __post_init__(self) -> None:
        if self.t < 0:
            raise ValueError(f"t must be >= 0, got {self.t}")

    def phi(self, u: complex) -> complex:
        return u - self.t * self.m0(u)

    def in_domain(self, u: complex) -> bool:
        """u in Lambda_t: Im u > 0 and t Im m0(u) / Im u < 1."""
        if u.imag <= 0:
            return False
        return self.t * self.m0(u).imag / u.imag < 1.0


def subordination_point(model: FreeConvolutionModel, w: complex, max_iter: int = 200) -> complex:
    """u in Lambda_t with Phi(u) = w, by damped Newton started from a few fixed-point sweeps."""
    w = complex(w)
    if w.imag <= 0:
        raise ValueError(f"w must lie in the upper half plane, got {w}")
    t = model.t
    if t == 0.0:
        return w
    trace: List[complex] = []
    u = w + 1j * math.sqrt(t)
    for _ in range(20):
        nxt = w + t * model.m0(u)
        if not model.in_domain(nxt):
            break
        u = nxt
    if not model.in_domain(u):
        u = complex(w.real, w.imag + 2.0 * math.sqrt(t))
    scale = max(1.0, abs(w))
    res = abs(model.phi(u) - w)
    for _ in range(max_iter):
        trace.append(u)
        if res <= NEWTON_TOL * scale:
            return u
        d = 1.0 - t * model.m0.derivative(u)
        if d == 0:
            raise FreeConvolutionError(f"singular Newton step at u={u}", trace=trace)
        step = (model.phi(u) - w) / d
        lam = 1.0
        for _ in range(40):
            cand = u - lam * step
            if model.in_domain(cand):
                cres = abs(model.phi(cand) - w)
                if cres < res or cres <= NEWTON_TOL * scale:
                    u, res = cand, cres
                    break
            lam *= 0.5
        else:
            raise FreeConvolutionError(f"Newton iterate left Lambda_t near u={u} (w={w}, t={t})", trace=trace)
    raise FreeConvolutionError(f"Newton did not converge for w={w}, t={t} (residual {res:.3e})", trace=trace)


def free_convolve(model: FreeConvolutionModel, w: complex) -> complex:
    """m_t(w) = m0(u), Phi(u) = w."""
    if model.t == 0.0:
        return model.m0(complex(w))
    u = subordination_point(model, w)
    return model.m0(u)


def density_at(model: FreeConvolutionModel, x: float, tol: float = 1e-8) -> float:
    """rho_t(x) = lim Im m_t(x + i eta) / pi, Richardson-extrapolated from three eta levels."""
    r = [free_convolve(model, complex(x, eta)).imag / math.pi for eta in RICHARDSON_ETAS]
    first_a = 2.0 * r[1] - r[0]
    first_b = 2.0 * r[2] - r[1]
    value = (4.0 * first_b - first_a) / 3.0
    if value < -tol:
        raise FreeConvolutionError(f"negative extrapolated density {value:.3e} at x={x}")
    return max(value, 0.0)


def density_grid(model: FreeConvolutionModel, xs: Sequence[float]) -> np.ndarray:
    return np.array([density_at(model, float(x)) for x in xs])


def semicircle_convolution(variance0: float, t: float) -> SemicircleTransform:
    """Closed-form sc(variance0) boxplus sc(t)."""
    return SemicircleTransform(variance0 + t)


class ConvolvedTransform(StieltjesProvider):
    """m_t of a FreeConvolutionModel exposed as a provider, for local-law comparisons."""

    name = "free-convolution"

    def __init__(self, model: FreeConvolutionModel) -> None:
        self.model = model

    def __call__(self, w: complex) -> complex:
        return free_convolve(self.model, complex(w))

    def support(self) -> Tuple[float, float]:
        lo, hi = self.model.m0.support()
        r = 2.0 * math.sqrt(self.model.t)
        return lo - r, hi + r
