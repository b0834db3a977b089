from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from src.errors import StieltjesBoundError


SLACK = 1e-9


@dataclass
class StieltjesReport:
    points: List[complex]
    modulus_ratio: List[float] = field(default_factory=list)
    derivative_ratio: List[float] = field(default_factory=list)
    violations: List[complex] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_json(self) -> dict:
        return {
            "n_points": len(self.points),
            "max_modulus_ratio": max(self.modulus_ratio, default=0.0),
            "max_derivative_ratio": max(self.derivative_ratio, default=0.0),
            "violations": self.violations,
        }


def distance_to_interval(z: complex, support: Tuple[float, float]) -> float:
    lo, hi = support
    x = min(max(z.real, lo), hi)
    return abs(z - x)


def stieltjes_bounds_check(
    m: Callable[[complex], complex],
    support: Tuple[float, float],
    points: Sequence[complex],
    raise_on_violation: bool = True,
) -> StieltjesReport:
    """Check |m(z)| <= 1/dist(z, supp) and |m'(z)| <= Im m(z) / Im z at each point.

    m' is a centered difference with step Im z / 100.
    """
    report = StieltjesReport(points=[complex(p) for p in points])
    for z in report.points:
        dist = distance_to_interval(z, support)
        if dist <= 0 or z.imag <= 0:
            raise ValueError(f"sample point {z} must lie in the upper half plane off the support")
        mz = complex(m(z))
        h = z.imag / 100.0
        dm = (complex(m(z + h)) - complex(m(z - h))) / (2.0 * h)
        r1 = abs(mz) * dist
        bound2 = mz.imag / z.imag
        r2 = abs(dm) / bound2 if bound2 > 0 else float("inf")
        report.modulus_ratio.append(r1)
        report.derivative_ratio.append(r2)
        # the difference quotient carries O(h^2) error
        if r1 > 1.0 + SLACK or r2 > 1.0 + 1e-3:
            report.violations.append(z)
    if report.violations and raise_on_violation:
        raise StieltjesBoundError("Stieltjes transform bounds violated", points=report.violations)
    return report


def default_sample_points(support: Tuple[float, float], n: int = 24, far: Optional[float] = 10.0) -> List[complex]:
    """A lattice above the support plus far points where |m| ~ 1/|z| is sharp."""
    lo, hi = support
    span = max(hi - lo, 1.0)
    xs = np.linspace(lo - 0.5 * span, hi + 0.5 * span, n)
    pts = [complex(x, y) for x in xs for y in (0.05 * span, 0.5 * span)]
    if far is not None:
        mid = 0.5 * (lo + hi)
        pts += [complex(mid, far * span), complex(mid + far * span, far * span)]
    return pts
