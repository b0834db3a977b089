from __future__ import annotations

import numpy as np


def _check_eta(eta: float, name: str = "eta") -> None:
    if not eta > 0:
        raise ValueError(f"{name} must be positive, got {eta}")


def resolvent_trace(singular_values: np.ndarray, eta: float) -> complex:
    """Tr G(i eta) of the Hermitization from its singular values: sum_i 2 i eta / (lambda_i^2 + eta^2)."""
    _check_eta(eta)
    lam2 = np.asarray(singular_values, dtype=float) ** 2
    return 1j * float(np.sum(2.0 * eta / (lam2 + eta * eta)))


def log_term(singular_values: np.ndarray, T: float) -> float:
    """sum_i log(lambda_i^2 + T^2) = log|det(H - iT)| over the 2N-point chiral spectrum."""
    _check_eta(T, "T")
    lam2 = np.asarray(singular_values, dtype=float) ** 2
    return float(np.sum(np.log(lam2 + T * T)))


def eta_integral(singular_values: np.ndarray, lo: float, hi: float) -> float:
    """Closed form of int_lo^hi Im Tr G(i eta) d eta = sum_i [log(lambda_i^2 + eta^2)]_lo^hi.

    `lo` may be 0, in which case an exactly zero singular value makes the integral infinite.
    """
    if lo < 0 or hi <= lo:
        raise ValueError(f"need 0 <= lo < hi, got lo={lo}, hi={hi}")
    lam2 = np.asarray(singular_values, dtype=float) ** 2
    with np.errstate(divide="ignore"):
        return float(np.sum(np.log(lam2 + hi * hi) - np.log(lam2 + lo * lo)))


def eta_integral_grid(lam2: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Vectorized `eta_integral` over a stack of squared singular values, shape (..., N)."""
    with np.errstate(divide="ignore"):
        return np.sum(np.log(lam2 + hi * hi) - np.log(lam2 + lo * lo), axis=-1)
