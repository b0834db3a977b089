from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from src.dbm.particles import ParticleConfiguration, empirical_stieltjes
from src.theory.free_convolution import StieltjesProvider


def phi_of(N: int, nu: float) -> float:
    """Control parameter phi = N^nu."""
    return float(N) ** nu


def lattice(N: int, nu: float = 0.05, G: float = 1.0, n_re: int = 9, n_im: int = 8, eta_max: float = 1.0) -> np.ndarray:
    """Test points w with |Re w| <= G/2 and phi^4 N^{-1+nu} <= Im w <= eta_max; Re w = 0 is always included."""
    if n_re < 1 or n_im < 1:
        raise ValueError("lattice needs at least one point per axis")
    eta_min = phi_of(N, nu) ** 4 * float(N) ** (-1.0 + nu)
    if eta_min >= eta_max:
        raise ValueError(f"empty lattice: eta_min={eta_min:.3e} >= eta_max={eta_max}")
    n_re = n_re if n_re % 2 == 1 else n_re + 1
    re = np.linspace(-0.5 * G, 0.5 * G, n_re)
    im = np.geomspace(eta_min, eta_max, n_im)
    return (re[:, None] + 1j * im[None, :]).ravel()


def regularity_lattice(N: int, nu: float = 0.05, G: float = 1.0, n_re: int = 9, n_im: int = 8, eta_max: float = 1.0) -> np.ndarray:
    """Points with |Re w| <= G and Im w >= phi / N."""
    eta_min = phi_of(N, nu) / N
    n_re = n_re if n_re % 2 == 1 else n_re + 1
    re = np.linspace(-G, G, n_re)
    im = np.geomspace(eta_min, eta_max, n_im)
    return (re[:, None] + 1j * im[None, :]).ravel()


@dataclass
class LocalLawReport:
    points: List[complex]
    errors: List[float]
    bounds: List[float]
    violations: List[complex] = field(default_factory=list)

    @property
    def ratios(self) -> np.ndarray:
        return np.asarray(self.errors) / np.asarray(self.bounds)

    @property
    def max_ratio(self) -> float:
        return float(np.max(self.ratios)) if self.points else 0.0

    @property
    def worst_point(self) -> Optional[complex]:
        if not self.points:
            return None
        return self.points[int(np.argmax(self.ratios))]

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_json(self) -> dict:
        return {
            "points": len(self.points),
            "max_ratio": self.max_ratio,
            "worst_point": self.worst_point,
            "violations": len(self.violations),
            "pass": self.ok,
        }

    def to_rows(self) -> List[dict]:
        return [
            {"re": w.real, "im": w.imag, "error": e, "bound": b, "ratio": e / b}
            for w, e, b in zip(self.points, self.errors, self.bounds)
        ]


def _compare(
    x: np.ndarray,
    reference: StieltjesProvider,
    points: Sequence[complex],
    bound: Callable[[complex], float],
) -> LocalLawReport:
    report = LocalLawReport(points=[], errors=[], bounds=[])
    for w in points:
        w = complex(w)
        err = abs(empirical_stieltjes(x, w) - reference(w))
        b = bound(w)
        report.points.append(w)
        report.errors.append(float(err))
        report.bounds.append(float(b))
        if err > b:
            report.violations.append(w)
    return report


def local_law_check(
    x: ParticleConfiguration | np.ndarray,
    reference: StieltjesProvider,
    points: Sequence[complex],
    phi: float,
    bound_reference: Optional[StieltjesProvider] = None,
) -> LocalLawReport:
    """|m_emp(w) - m(w)| against phi sqrt(Im m0(w) / (N Im w)); m0 defaults to the reference itself."""
    xs = x.x if isinstance(x, ParticleConfiguration) else np.asarray(x, dtype=float)
    N = xs.size
    scale = bound_reference if bound_reference is not None else reference

    def bound(w: complex) -> float:
        return phi * math.sqrt(max(scale(w).imag, 0.0) / (N * w.imag))

    return _compare(xs, reference, points, bound)


def regularity_check(
    x: ParticleConfiguration | np.ndarray,
    reference: StieltjesProvider,
    points: Sequence[complex],
    phi: float,
) -> LocalLawReport:
    """|m(w) - m~(w)| <= phi / sqrt(N Im w) on the given points."""
    xs = x.x if isinstance(x, ParticleConfiguration) else np.asarray(x, dtype=float)
    N = xs.size
    return _compare(xs, reference, points, lambda w: phi / math.sqrt(N * w.imag))
