from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import List

import numpy as np

from src.errors import BranchSelectionError


RESIDUAL_TOL = 1e-12

E1 = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=np.complex128)
E2 = np.array([[0.0, 0.0], [0.0, 1.0]], dtype=np.complex128)


@dataclass(frozen=True)
class SelfConsistentPoint:
    z: complex
    eta: float
    m: complex
    u: complex
    residual: float = 0.0


def ntr(A: np.ndarray) -> complex:
    """Normalized trace <A> = tr(A) / 2 at the 2x2 level."""
    return complex(np.trace(A)) / 2.0


def cubic_roots(a: complex, b: complex, c: complex, d: complex) -> List[complex]:
    """All roots of a x^3 + b x^2 + c x + d by the depressed-cubic (Cardano) formula."""
    if a == 0:
        raise ValueError("leading coefficient is zero")
    b, c, d = b / a, c / a, d / a
    p = c - b * b / 3.0
    q = 2.0 * b ** 3 / 27.0 - b * c / 3.0 + d
    disc = cmath.sqrt(q * q / 4.0 + p ** 3 / 27.0)
    u3 = -q / 2.0 + disc
    if abs(u3) < abs(-q / 2.0 - disc):
        u3 = -q / 2.0 - disc
    omega = complex(-0.5, math.sqrt(3.0) / 2.0)
    if u3 == 0:
        return [-b / 3.0] * 3
    u = u3 ** (1.0 / 3.0)
    roots = []
    for k in range(3):
        uk = u * omega ** k
        roots.append(uk - p / (3.0 * uk) - b / 3.0)
    return roots


def _polish(m: complex, w: complex, z2: float, steps: int = 4) -> complex:
    for _ in range(steps):
        P = m ** 3 + 2.0 * w * m ** 2 + (w * w + 1.0 - z2) * m + w
        dP = 3.0 * m ** 2 + 4.0 * w * m + w * w + 1.0 - z2
        if dP == 0:
            break
        step = P / dP
        m -= step
        if abs(step) <= 1e-16 * max(abs(m), 1e-300):
            break
    return m


def residual(m: complex, z: complex, eta: float) -> float:
    """|1/m + i eta + m - |z|^2/(i eta + m)| scaled by |m|."""
    w = 1j * eta
    return abs(1.0 + w * m + m * m - abs(z) ** 2 * m / (w + m))


def _imaginary_axis_root(z2: float, eta: float) -> float:
    """Unique positive root b of b^3 + 2 eta b^2 - (1 - |z|^2 - eta^2) b - eta."""
    c1 = -(1.0 - z2 - eta * eta)
    roots = cubic_roots(1.0, 2.0 * eta, c1, -eta)
    cands = [r.real for r in roots if abs(r.imag) <= 1e-7 * max(1.0, abs(r)) and r.real > 0]
    if not cands:
        # Cardano lost the real root to cancellation; bisect the sign change on (0, hi].
        hi = 1.0 + 2.0 * eta + abs(c1) + eta
        lo = 0.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            val = mid ** 3 + 2.0 * eta * mid ** 2 + c1 * mid - eta
            if val > 0:
                hi = mid
            else:
                lo = mid
        cands = [0.5 * (lo + hi)]
    if len(cands) > 1:
        raise BranchSelectionError(f"{len(cands)} positive roots for |z|^2={z2}, eta={eta}")
    b = cands[0]
    for _ in range(6):
        val = b ** 3 + 2.0 * eta * b ** 2 + c1 * b - eta
        der = 3.0 * b ** 2 + 4.0 * eta * b + c1
        if der == 0:
            break
        nb = b - val / der
        if nb <= 0:
            break
        if abs(nb - b) <= 1e-17 * b:
            b = nb
            break
        b = nb
    return b


def solve_mz(z: complex, eta: float) -> SelfConsistentPoint:
    """Stieltjes branch of -1/m = i eta + m - |z|^2 / (i eta + m) on the imaginary axis.

    eta = 0 returns the eta -> 0+ limit: m = i sqrt(1 - |z|^2), u = 1 inside the disk and m = 0,
    u = 1/|z|^2 outside.
    """
    z = complex(z)
    if eta < 0 or not math.isfinite(eta):
        raise ValueError(f"eta must be a finite nonnegative number, got {eta}")
    z2 = abs(z) ** 2
    if eta == 0.0:
        if z2 < 1.0:
            return SelfConsistentPoint(z=z, eta=0.0, m=1j * math.sqrt(1.0 - z2), u=1.0 + 0j)
        return SelfConsistentPoint(z=z, eta=0.0, m=0j, u=complex(1.0 / z2) if z2 > 0 else 1.0 + 0j)
    b = _imaginary_axis_root(z2, eta)
    m = 1j * b
    u = b / (eta + b)
    res = residual(m, z, eta)
    if res > RESIDUAL_TOL:
        raise BranchSelectionError(f"cubic residual {res:.3e} above {RESIDUAL_TOL:g} at z={z}, eta={eta}")
    if not b > 0:
        raise BranchSelectionError(f"no root with Im m > 0 at z={z}, eta={eta}")
    return SelfConsistentPoint(z=z, eta=float(eta), m=m, u=complex(u), residual=res)


def solve_mz_general(z: complex, w: complex, eta_start: float = 10.0, steps: int = 60) -> complex:
    """Stieltjes branch of m^3 + 2w m^2 + (w^2 + 1 - |z|^2) m + w = 0 for Im w > 0.

    The branch is followed by continuity from Re w + i max(eta_start, Im w) down to w, picking
    at each step the root nearest the previous one.
    """
    w = complex(w)
    if w.imag <= 0:
        raise ValueError(f"w must lie in the upper half plane, got {w}")
    z2 = abs(complex(z)) ** 2
    top = max(eta_start, w.imag)
    path = w.real + 1j * np.geomspace(top, w.imag, steps)
    m_prev = None
    for wk in path:
        roots = [_polish(r, wk, z2) for r in cubic_roots(1.0, 2.0 * wk, wk * wk + 1.0 - z2, wk)]
        if m_prev is None:
            upper = [r for r in roots if r.imag > 0]
            if not upper:
                raise BranchSelectionError(f"no root with Im m > 0 at w={wk}")
            # at large |w| the Stieltjes root behaves like -1/w
            m_prev = min(upper, key=lambda r: abs(r + 1.0 / wk))
        else:
            m_prev = min(roots, key=lambda r: abs(r - m_prev))
    if m_prev is None or m_prev.imag <= 0:
        raise BranchSelectionError(f"continuation ended outside the upper half plane at w={w}")
    return m_prev


def deterministic_M(z: complex, eta: float) -> np.ndarray:
    """[[m, -z u], [-conj(z) u, m]]."""
    pt = solve_mz(z, eta)
    z = complex(z)
    return np.array([[pt.m, -z * pt.u], [-np.conj(z) * pt.u, pt.m]], dtype=np.complex128)


def M_from_point(pt: SelfConsistentPoint) -> np.ndarray:
    z = pt.z
    return np.array([[pt.m, -z * pt.u], [-np.conj(z) * pt.u, pt.m]], dtype=np.complex128)
