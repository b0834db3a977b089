from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.optimize import brentq

from src.errors import CharacteristicsError
from src.theory.selfconsistent import solve_mz


IDENTITY_TOL = 1e-9


@dataclass(frozen=True)
class CharacteristicState:
    z: complex
    eta: float
    elapsed: float


def _im_m(z: complex, eta: float) -> float:
    return solve_mz(z, eta).m.imag


def characteristics_pullback(z_t: complex, eta_t: float, t: float, check: bool = True) -> Tuple[complex, float]:
    """(z_0, eta_0) with z_0 = e^{t/2} z_t, eta_0 = e^{t/2} eta_t + (e^{t/2} - e^{-t/2}) Im m^{z_t}(i eta_t).

    Postcondition: m^{z_0}(i eta_0) = e^{-t/2} m^{z_t}(i eta_t) and u^{z_0}(i eta_0) = e^{-t} u^{z_t}(i eta_t).
    """
    if not eta_t > 0:
        raise ValueError(f"eta_t must be positive, got {eta_t}")
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    z_t = complex(z_t)
    if t == 0.0:
        return z_t, float(eta_t)
    pt = solve_mz(z_t, eta_t)
    up, down = math.exp(0.5 * t), math.exp(-0.5 * t)
    z0 = up * z_t
    eta0 = up * eta_t + (up - down) * pt.m.imag
    if check:
        p0 = solve_mz(z0, eta0)
        dm = abs(p0.m - down * pt.m)
        du = abs(p0.u - down * down * pt.u)
        if dm > IDENTITY_TOL or du > IDENTITY_TOL:
            raise CharacteristicsError(
                f"flow identities violated at z_t={z_t}, eta_t={eta_t}, t={t}: |dm|={dm:.3e}, |du|={du:.3e}"
            )
    return z0, eta0


def _pullback_gap(z_t: complex, t: float, eta0: float):
    up, down = math.exp(0.5 * t), math.exp(-0.5 * t)

    def g(eta: float) -> float:
        return up * eta + (up - down) * _im_m(z_t, eta) - eta0

    return g


def crossing_time(z0: complex, eta0: float, t_max: float) -> float:
    """First time at which the characteristic started at (z0, eta0) reaches eta = 0."""

    def reaches(t: float) -> bool:
        z_t = math.exp(-0.5 * t) * complex(z0)
        return _pullback_gap(z_t, t, eta0)(0.0) >= 0.0

    lo, hi = 0.0, t_max
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if reaches(mid):
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-14 * max(1.0, hi):
            break
    return hi


def characteristics_forward(z0: complex, eta0: float, t: float) -> Tuple[complex, float]:
    """Forward image (z_t, eta_t): z_t = e^{-t/2} z0, eta_t the root of the pullback relation."""
    if not eta0 > 0:
        raise ValueError(f"eta0 must be positive, got {eta0}")
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    z0 = complex(z0)
    if t == 0.0:
        return z0, float(eta0)
    z_t = math.exp(-0.5 * t) * z0
    g = _pullback_gap(z_t, t, eta0)
    hi = eta0 * math.exp(-0.5 * t)
    if g(0.0) >= 0.0:
        tc = crossing_time(z0, eta0, t)
        raise CharacteristicsError(
            f"characteristic from z0={z0}, eta0={eta0} reaches eta = 0 at t={tc:.6g} < {t}", crossing_time=tc
        )
    g_hi = g(hi)
    if g_hi < 0.0:
        # only possible through rounding when the root sits at hi
        return z_t, hi
    eta_t = brentq(g, 0.0, hi, xtol=1e-300, rtol=4.0 * np.finfo(float).eps, maxiter=500)
    return z_t, float(eta_t)


def characteristic_rhs(z: complex, eta: float) -> Tuple[complex, float]:
    """d/dt (z_t, eta_t) = (-z_t / 2, -Im m^{z_t}(i eta_t) - eta_t / 2)."""
    return -0.5 * z, -_im_m(z, eta) - 0.5 * eta


def integrate_characteristic(z: complex, eta: float, t: float, step: float = 1e-4) -> CharacteristicState:
    """RK4 along the characteristic ODE for signed duration t (t < 0 runs backwards)."""
    n = max(1, int(math.ceil(abs(t) / step)))
    h = t / n
    zc, ec = complex(z), float(eta)
    for _ in range(n):
        k1 = characteristic_rhs(zc, ec)
        k2 = characteristic_rhs(zc + 0.5 * h * k1[0], ec + 0.5 * h * k1[1])
        k3 = characteristic_rhs(zc + 0.5 * h * k2[0], ec + 0.5 * h * k2[1])
        k4 = characteristic_rhs(zc + h * k3[0], ec + h * k3[1])
        zc += h * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]) / 6.0
        ec += h * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]) / 6.0
        if ec <= 0:
            raise CharacteristicsError("characteristic reached eta <= 0 during integration", crossing_time=None)
    return CharacteristicState(z=zc, eta=ec, elapsed=t)
