"""Modified Bessel function K1 and the Fourier transform of the stereographic kernel."""

from __future__ import annotations

import math

import numpy as np


_EULER_GAMMA = 0.5772156649015329
SERIES_MAX = 2.0
ASYMPTOTIC_MIN = 17.0


def _i1_series(x: float) -> float:
    term = 0.5 * x
    total = term
    q = 0.25 * x * x
    k = 0
    while True:
        k += 1
        term *= q / (k * (k + 1))
        total += term
        if abs(term) < 1e-17 * abs(total):
            return total


def _k1_series(x: float) -> float:
    """K1(x) = 1/x + I1(x) log(x/2) - (x/4) sum_k (psi(k+1) + psi(k+2)) (x^2/4)^k / (k!(k+1)!)."""
    q = 0.25 * x * x
    psi1 = -_EULER_GAMMA
    psi2 = 1.0 - _EULER_GAMMA
    term = 1.0
    acc = (psi1 + psi2) * term
    k = 0
    while True:
        k += 1
        term *= q / (k * (k + 1))
        psi1 += 1.0 / k
        psi2 += 1.0 / (k + 1)
        inc = (psi1 + psi2) * term
        acc += inc
        if abs(inc) < 1e-17 * abs(acc):
            break
    return 1.0 / x + _i1_series(x) * math.log(0.5 * x) - 0.25 * x * acc


def _k1_integral(x: float, n: int = 400) -> float:
    """K1(x) = int_0^inf exp(-x cosh u) cosh u du by the trapezoid rule (spectrally accurate here)."""
    upper = math.acosh(1.0 + 40.0 / x)
    u = np.linspace(0.0, upper, n + 1)
    vals = np.exp(-x * np.cosh(u)) * np.cosh(u)
    h = upper / n
    return float(h * (np.sum(vals) - 0.5 * vals[0] - 0.5 * vals[-1]))


def _k1_asymptotic(x: float) -> float:
    mu = 4.0
    term = 1.0
    total = 1.0
    for k in range(1, 30):
        nxt = term * (mu - (2 * k - 1) ** 2) / (k * 8.0 * x)
        if abs(nxt) >= abs(term):
            break
        term = nxt
        total += term
        if abs(term) < 1e-17:
            break
    return math.sqrt(math.pi / (2.0 * x)) * math.exp(-x) * total


def bessel_k1(x: float) -> float:
    if x <= 0:
        raise ValueError(f"K1 needs x > 0, got {x}")
    if x <= SERIES_MAX:
        return _k1_series(x)
    if x < ASYMPTOTIC_MIN:
        return _k1_integral(x)
    return _k1_asymptotic(x)


def x_k1(x: float) -> float:
    """x K1(x), continuous at 0 with value 1."""
    if x == 0.0:
        return 1.0
    return x * bessel_k1(x)


def q_hat(r: float, xi: float) -> float:
    """Fourier transform of q_r(z) = r / (pi (r + |z|^2)^2) at frequency |xi|: x K1(x), x = |xi| sqrt(r)."""
    if r < 0:
        raise ValueError(f"r must be >= 0, got {r}")
    if r == 0.0:
        return 1.0
    return x_k1(abs(xi) * math.sqrt(r))


def q_hat_grid(r: float, xis: np.ndarray) -> np.ndarray:
    return np.array([q_hat(r, float(x)) for x in np.ravel(xis)]).reshape(np.shape(xis))
