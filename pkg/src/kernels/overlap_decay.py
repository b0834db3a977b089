from __future__ import annotations

import math
from typing import Tuple

import numpy as np
from scipy.special import roots_legendre

from src.kernels.covariance import DEFAULT_RESOLUTION, KernelPrediction
from src.kernels.quadrature import double_integral, grid_for, refine
from src.kernels.testfunctions import TestFunction


Window = Tuple[float, float]


def _check_windows(s_window: Window, t_window: Window) -> None:
    s1, s2 = s_window
    t1, t2 = t_window
    if not (s1 < s2 <= t1 < t2):
        raise ValueError(f"windows must satisfy s1 < s2 <= t1 < t2, got {s_window}, {t_window}")


def window_weight(d2: np.ndarray, c: float, s_window: Window, t_window: Window) -> np.ndarray:
    """int_{s1}^{s2} int_{t1}^{t2} c^2 / (c (t - s) + d2)^2 dt ds in closed form.

    With G(tau) = -log(c tau + d2): G(t2-s1) - G(t2-s2) - G(t1-s1) + G(t1-s2).
    """
    s1, s2 = s_window
    t1, t2 = t_window

    def G(tau: float) -> np.ndarray:
        return -np.log(c * tau + d2)

    return G(t2 - s1) - G(t2 - s2) - G(t1 - s1) + G(t1 - s2)


def integrated_overlap_prediction(
    f: TestFunction,
    g: TestFunction,
    s_window: Window,
    t_window: Window,
    v: complex,
    resolution: int = DEFAULT_RESOLUTION,
) -> KernelPrediction:
    """(1/pi^2) int int f(z) g(w) [time-window integral of c_v^2/(c_v|t-s| + |z-w|^2)^2] dz dw."""
    _check_windows(s_window, t_window)
    c = 1.0 - abs(complex(v)) ** 2
    if c <= 0:
        raise ValueError(f"need |v| < 1, got {v}")

    def evaluate(n: int) -> float:
        gz = grid_for(f.center, f.support_radius, n, domain="plane")
        gw = grid_for(g.center, g.support_radius, n, domain="plane")
        kern = lambda z, w: window_weight(np.abs(z - w) ** 2, c, s_window, t_window)  # noqa: E731
        return float(np.real(double_integral(gz, f.value(gz.points), gw, g.value(gw.points), kern))) / math.pi ** 2

    value, err, _ = refine(evaluate, resolution)
    return KernelPrediction(
        value=value,
        quadrature_error=err,
        kernel_id="overlap-window",
        params={"v": complex(v), "s_window": list(s_window), "t_window": list(t_window), "f": f.id, "g": g.id},
    )


def overlap_prediction_bruteforce(
    f: TestFunction,
    g: TestFunction,
    s_window: Window,
    t_window: Window,
    v: complex,
    resolution: int = 24,
    time_nodes: int = 16,
) -> float:
    """Same quantity by explicit Gauss-Legendre quadrature in both time variables (4D oracle)."""
    _check_windows(s_window, t_window)
    c = 1.0 - abs(complex(v)) ** 2
    x, wx = roots_legendre(time_nodes)
    s = 0.5 * (s_window[1] - s_window[0]) * (x + 1.0) + s_window[0]
    ws = 0.5 * (s_window[1] - s_window[0]) * wx
    t = 0.5 * (t_window[1] - t_window[0]) * (x + 1.0) + t_window[0]
    wt = 0.5 * (t_window[1] - t_window[0]) * wx
    gz = grid_for(f.center, f.support_radius, resolution, domain="plane")
    gw = grid_for(g.center, g.support_radius, resolution, domain="plane")
    fz = f.value(gz.points) * gz.weights
    gv = g.value(gw.points) * gw.weights
    d2 = np.abs(gz.points[:, None] - gw.points[None, :]) ** 2
    total = 0.0
    for si, wsi in zip(s, ws):
        for ti, wti in zip(t, wt):
            kern = c * c / (c * (ti - si) + d2) ** 2
            total += wsi * wti * float(fz @ kern @ gv)
    return total / math.pi ** 2


def same_time_pair_prediction(delta: np.ndarray, v: complex, N: int) -> np.ndarray:
    """Covariance of O_ii/N - c_v and O_jj/N - c_v for two eigenvalues at distance delta at equal times."""
    c = 1.0 - abs(complex(v)) ** 2
    return c * c / (N * N * np.asarray(delta, dtype=float) ** 4)
