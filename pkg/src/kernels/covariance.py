from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Dict, Tuple, Union

import numpy as np

from src.errors import KernelMismatchError
from src.kernels.quadrature import double_integral, grid_for, refine
from src.kernels.testfunctions import DEFAULT_KMAX, BoundarySeries, TestFunction, gradient_pairing
from src.utils.logging import setup_logger


logger = setup_logger()

ArrayLike = Union[float, complex, np.ndarray]

DEFAULT_RESOLUTION = 40
MESO_RTOL = 1e-6


@dataclass
class KernelPrediction:
    value: float
    quadrature_error: float
    kernel_id: str
    params: Dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> Dict[str, Any]:
        return {"kernel_id": self.kernel_id, "params": self.params, "value": self.value, "error": self.quadrature_error}

    def __sub__(self, other: "KernelPrediction") -> "KernelPrediction":
        return KernelPrediction(
            value=self.value - other.value,
            quadrature_error=self.quadrature_error + other.quadrature_error,
            kernel_id=f"{self.kernel_id}-{other.kernel_id}",
            params={**other.params, **self.params},
        )


# ---------------------------------------------------------------------------
# Pointwise kernels
# ---------------------------------------------------------------------------

def kernel_argument(z: ArrayLike, w: ArrayLike, tau: float) -> np.ndarray:
    """(1 - e^{-tau})(1 - |z|^2) + |z - e^{-tau/2} w|^2."""
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    z = np.asarray(z, dtype=np.complex128)
    w = np.asarray(w, dtype=np.complex128)
    c = -math.expm1(-tau)
    a = math.exp(-0.5 * tau)
    return c * (1.0 - np.abs(z) ** 2) + np.abs(z - a * w) ** 2


def kernel_K(z: ArrayLike, w: ArrayLike, tau: float) -> ArrayLike:
    """Equilibrium kernel K = -log A; A = 0 (z = w at tau = 0) gives +inf."""
    A = kernel_argument(z, w, tau)
    with np.errstate(divide="ignore"):
        K = -np.log(A)
    return float(K) if np.ndim(K) == 0 else K


def parabolic_distance(z: complex, s: float, w: complex, t: float) -> float:
    return math.sqrt(abs(complex(z) - complex(w)) ** 2 + abs(t - s))


def kernel_K_mixed(z: ArrayLike, w: ArrayLike, tau: float) -> np.ndarray:
    """d_z d_wbar K for tau > 0: (a A - a^2 (a zbar - wbar)(z - a w)) / A^2, a = e^{-tau/2}."""
    if tau <= 0:
        raise ValueError("the mixed derivative of K is a point mass at tau = 0")
    z = np.asarray(z, dtype=np.complex128)
    w = np.asarray(w, dtype=np.complex128)
    a = math.exp(-0.5 * tau)
    A = kernel_argument(z, w, tau)
    return (a * A - a * a * (a * np.conj(z) - np.conj(w)) * (z - a * w)) / (A * A)


def log_mixed(z: ArrayLike, w: ArrayLike, r: float) -> np.ndarray:
    """d_z d_wbar log(r + |z - w|^2) = -r / (r + |z - w|^2)^2."""
    d2 = np.abs(np.asarray(z) - np.asarray(w)) ** 2
    return -r / (r + d2) ** 2


def q_kernel(u: ArrayLike, r: float) -> np.ndarray:
    """Stereographic averaging kernel q_r(u) = r / (pi (r + |u|^2)^2)."""
    return r / (math.pi * (r + np.abs(np.asarray(u)) ** 2) ** 2)


def theta_kernel(z1: ArrayLike, z2: ArrayLike, t: float) -> ArrayLike:
    """-1/2 of the three-regime log kernel: both inside, one outside, both outside the unit disk."""
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    z1 = np.asarray(z1, dtype=np.complex128)
    z2 = np.asarray(z2, dtype=np.complex128)
    z1, z2 = np.broadcast_arrays(z1, z2)
    a = math.exp(-0.5 * t)
    in1 = np.abs(z1) <= 1.0
    in2 = np.abs(z2) <= 1.0
    out = np.empty(z1.shape, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        both = in1 & in2
        out[both] = np.log(kernel_argument(z1[both], z2[both], t))
        m = in2 & ~in1
        out[m] = np.log(np.abs(z1[m] - a * z2[m]) ** 2) - np.log(np.abs(z1[m]) ** 2)
        m = in1 & ~in2
        out[m] = np.log(np.abs(z2[m] - a * z1[m]) ** 2) - np.log(np.abs(z2[m]) ** 2)
        m = ~in1 & ~in2
        out[m] = np.log(np.abs(a - z1[m] * np.conj(z2[m])) ** 2) - np.log(np.abs(z1[m] * z2[m]) ** 2)
    out *= -0.5
    return float(out) if out.ndim == 0 else out


def overlap_corr_prediction(z: complex, w: complex, s: float, t: float, v: complex) -> float:
    """c_v^2 / (c_v |t - s| + |z - w|^2)^2, c_v = 1 - |v|^2."""
    c = 1.0 - abs(complex(v)) ** 2
    den = c * abs(t - s) + abs(complex(z) - complex(w)) ** 2
    if den <= 0:
        raise ValueError("overlap correlation is singular at z = w, s = t")
    return c * c / (den * den)


# ---------------------------------------------------------------------------
# Boundary and cumulant terms
# ---------------------------------------------------------------------------

def h_half_pairing(fhat: BoundarySeries, ghat: BoundarySeries, tau: float = 0.0) -> float:
    """Re sum_k |k| e^{-|k| tau/2} f_k conj(g_k)."""
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    kmax = max(fhat.kmax, ghat.kmax)
    ks = np.arange(-kmax, kmax + 1)
    fk = fhat.padded(kmax)
    gk = ghat.padded(kmax)
    weights = np.abs(ks) * np.exp(-0.5 * np.abs(ks) * tau)
    return float(np.real(np.sum(weights * fk * np.conj(gk))))


def mean_gap(f: TestFunction) -> float:
    """<f>_D - <f>_dD."""
    return f.disk_mean() - f.boundary_mean()


def kappa_term(f: TestFunction, g: TestFunction, tau: float, kappa: float) -> float:
    if kappa == 0.0:
        return 0.0
    return kappa * math.exp(-tau) * mean_gap(f) * mean_gap(g)


def kappa_at(kappa4: float, s: float) -> float:
    """Fourth cumulant of the entries after running the flow for time s."""
    return math.exp(-2.0 * s) * kappa4


def _boundary_term(f: TestFunction, g: TestFunction, tau: float, kmax: int) -> float:
    if f.interior or g.interior:
        return 0.0
    return 0.5 * h_half_pairing(f.boundary_series(kmax), g.boundary_series(kmax), tau)


# ---------------------------------------------------------------------------
# Covariance functionals
# ---------------------------------------------------------------------------

def _disk_double(f: TestFunction, g: TestFunction, n: int, kernel, fvals, gvals, domain: str = "disk") -> complex:
    gz = grid_for(f.center, f.support_radius, n, domain=domain)
    gw = grid_for(g.center, g.support_radius, n, domain=domain)
    return double_integral(gz, fvals(gz.points), gw, gvals(gw.points), kernel)


def gamma_macroscopic(
    f: TestFunction,
    g: TestFunction,
    tau: float,
    kappa: float = 0.0,
    resolution: int = DEFAULT_RESOLUTION,
    kmax: int = DEFAULT_KMAX,
) -> KernelPrediction:
    """Gamma(f, g, tau, kappa): bulk double integral + half Poisson-smoothed H^{1/2} pairing + cumulant term.

    The bulk term uses the closed-form mixed derivative of K for tau > 0 and the gradient form
    (1/4pi) int_D grad f . grad g at tau = 0.
    """
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    if tau == 0.0:
        bulk, err, _ = refine(lambda n: gradient_pairing(f, g, resolution=n), 2 * resolution)
    else:
        def evaluate(n: int) -> float:
            val = _disk_double(f, g, n, lambda z, w: kernel_K_mixed(z, w, tau), f.dzbar, g.dz)
            return float(np.real(val)) / math.pi ** 2

        bulk, err, _ = refine(evaluate, resolution)
    value = bulk + _boundary_term(f, g, tau, kmax) + kappa_term(f, g, tau, kappa)
    return KernelPrediction(
        value=value,
        quadrature_error=err,
        kernel_id="gamma",
        params={"tau": tau, "kappa": kappa, "f": f.id, "g": g.id},
    )


def gamma_laplacian_form(
    f: TestFunction,
    g: TestFunction,
    tau: float,
    kappa: float = 0.0,
    resolution: int = DEFAULT_RESOLUTION,
) -> KernelPrediction:
    """(1/16 pi^2) int int Delta f Delta g K + cumulant term, for functions supported inside the disk."""
    if not (f.interior and g.interior):
        raise ValueError("the Laplacian form needs functions supported inside the unit disk")
    if tau <= 0:
        raise ValueError("the Laplacian form is evaluated for tau > 0")

    def evaluate(n: int) -> float:
        val = _disk_double(f, g, n, lambda z, w: -np.log(kernel_argument(z, w, tau)), f.laplacian, g.laplacian)
        return float(np.real(val)) / (16.0 * math.pi ** 2)

    bulk, err, _ = refine(evaluate, resolution)
    return KernelPrediction(
        value=bulk + kappa_term(f, g, tau, kappa),
        quadrature_error=err,
        kernel_id="gamma-laplacian",
        params={"tau": tau, "kappa": kappa, "f": f.id, "g": g.id},
    )


def _ramp_integral(f: TestFunction, n: int) -> float:
    """int Delta f (1 - |z|^2)_+ over the plane."""
    grid = grid_for(f.center, f.support_radius, 2 * n, domain="plane")
    ramp = np.maximum(1.0 - np.abs(grid.points) ** 2, 0.0)
    return grid.integrate(f.laplacian(grid.points) * ramp)


def gamma_theta_form(
    f: TestFunction,
    g: TestFunction,
    tau: float,
    kappa: float = 0.0,
    resolution: int = DEFAULT_RESOLUTION,
) -> KernelPrediction:
    """(1/8 pi^2) int int_{C^2} Delta f Delta g [Theta + (kappa/2) e^{-tau} (1-|z1|^2)_+ (1-|z2|^2)_+]."""
    if tau <= 0:
        raise ValueError("the Theta form is evaluated for tau > 0")

    def evaluate(n: int) -> float:
        val = _disk_double(f, g, n, lambda z, w: theta_kernel(z, w, tau), f.laplacian, g.laplacian, domain="plane")
        return float(np.real(val)) / (8.0 * math.pi ** 2)

    bulk, err, _ = refine(evaluate, resolution)
    cum = 0.0
    if kappa != 0.0:
        cum = kappa * math.exp(-tau) * _ramp_integral(f, resolution) * _ramp_integral(g, resolution) / (16.0 * math.pi ** 2)
    return KernelPrediction(
        value=bulk + cum,
        quadrature_error=err,
        kernel_id="gamma-theta",
        params={"tau": tau, "kappa": kappa, "f": f.id, "g": g.id},
    )


def static_variance(f: TestFunction, g: TestFunction, kappa: float = 0.0, resolution: int = DEFAULT_RESOLUTION, kmax: int = DEFAULT_KMAX) -> KernelPrediction:
    """(1/4pi) int_D grad f . grad g + (1/2) <f, g>_{H^{1/2}} + kappa (<f>_D - <f>_dD)(<g>_D - <g>_dD)."""
    pred = gamma_macroscopic(f, g, 0.0, kappa, resolution=resolution, kmax=kmax)
    pred.kernel_id = "gamma-static"
    return pred


def gamma_mesoscopic_qform(f: TestFunction, g: TestFunction, tau: float, v: complex = 0j, resolution: int = DEFAULT_RESOLUTION) -> KernelPrediction:
    """(1/pi) int int d_zbar f(z) d_w g(w) q_r(z - w), r = tau (1 - |v|^2)."""
    r = tau * (1.0 - abs(complex(v)) ** 2)
    if r <= 0:
        raise ValueError("the q-form needs tau > 0 and |v| < 1")

    def evaluate(n: int) -> float:
        val = _disk_double(f, g, n, lambda z, w: q_kernel(z - w, r), f.dzbar, g.dz, domain="plane")
        return float(np.real(val)) / math.pi

    value, err, _ = refine(evaluate, resolution)
    return KernelPrediction(value=value, quadrature_error=err, kernel_id="gamma-v-q", params={"tau": tau, "v": complex(v), "f": f.id, "g": g.id})


def gamma_mesoscopic_logform(f: TestFunction, g: TestFunction, tau: float, v: complex = 0j, resolution: int = DEFAULT_RESOLUTION) -> KernelPrediction:
    """-(1/16 pi^2) int int Delta f Delta g log(r + |z - w|^2)."""
    r = tau * (1.0 - abs(complex(v)) ** 2)
    if r <= 0:
        raise ValueError("the log form needs tau > 0 and |v| < 1")

    def evaluate(n: int) -> float:
        val = _disk_double(f, g, n, lambda z, w: np.log(r + np.abs(z - w) ** 2), f.laplacian, g.laplacian, domain="plane")
        return -float(np.real(val)) / (16.0 * math.pi ** 2)

    value, err, _ = refine(evaluate, resolution)
    return KernelPrediction(value=value, quadrature_error=err, kernel_id="gamma-v-log", params={"tau": tau, "v": complex(v), "f": f.id, "g": g.id})


def gamma_mesoscopic(
    f: TestFunction,
    g: TestFunction,
    tau: float,
    v: complex = 0j,
    resolution: int = DEFAULT_RESOLUTION,
    rtol: float = MESO_RTOL,
) -> KernelPrediction:
    """Gamma_v(f, g, tau), computed by the q-form and the log form and cross-checked."""
    if abs(complex(v)) >= 1.0:
        raise ValueError(f"mesoscopic kernel needs |v| < 1, got {v}")
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    if tau == 0.0:
        value, err, _ = refine(lambda n: gradient_pairing(f, g, resolution=n, domain="plane"), 2 * resolution)
        return KernelPrediction(value=value, quadrature_error=err, kernel_id="gamma-v", params={"tau": 0.0, "v": complex(v), "f": f.id, "g": g.id})
    q = gamma_mesoscopic_qform(f, g, tau, v, resolution)
    lg = gamma_mesoscopic_logform(f, g, tau, v, resolution)
    diff = abs(q.value - lg.value)
    allowed = max(rtol * max(abs(q.value), abs(lg.value)), 10.0 * (q.quadrature_error + lg.quadrature_error), 1e-14)
    if diff > allowed:
        raise KernelMismatchError(
            f"mesoscopic kernel routes disagree: q-form {q.value:.10g} vs log form {lg.value:.10g}",
            values={"q": q.value, "log": lg.value, "q_err": q.quadrature_error, "log_err": lg.quadrature_error},
        )
    return KernelPrediction(
        value=q.value,
        quadrature_error=max(q.quadrature_error, diff),
        kernel_id="gamma-v",
        params={"tau": tau, "v": complex(v), "f": f.id, "g": g.id, "log_form": lg.value},
    )


def martingale_variance(f: TestFunction, t: float, resolution: int = DEFAULT_RESOLUTION, kmax: int = DEFAULT_KMAX) -> KernelPrediction:
    """Variance of the martingale part over [0, t]: the static form minus the Theta route at time 2t."""
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    static = static_variance(f, f, 0.0, resolution=resolution, kmax=kmax)
    if t == 0.0:
        return KernelPrediction(value=0.0, quadrature_error=0.0, kernel_id="martingale", params={"t": 0.0, "f": f.id})
    theta = gamma_theta_form(f, f, 2.0 * t, 0.0, resolution=resolution)
    out = static - theta
    out.kernel_id = "martingale"
    out.params = {"t": t, "f": f.id}
    return out


def variance_split_prediction(
    f: TestFunction,
    s: float,
    t: float,
    kappa: float = 0.0,
    regime: str = "macro",
    v: complex = 0j,
    resolution: int = DEFAULT_RESOLUTION,
) -> Tuple[KernelPrediction, KernelPrediction]:
    """(V1, V2) for the split Var L(f, t) = Var E[L(f, t) | F_s] + E Var[L(f, t) | F_s].

    `kappa` is the fourth cumulant of the entries at time s. In the mesoscopic regime s and t
    are the unscaled times of the limiting field and the cumulant does not enter.
    """
    if t < s:
        raise ValueError(f"need s <= t, got s={s}, t={t}")
    lag = 2.0 * (t - s)
    if regime == "macro":
        v1 = gamma_macroscopic(f, f, lag, kappa, resolution=resolution)
        base = gamma_macroscopic(f, f, 0.0, 0.0, resolution=resolution)
        if lag == 0.0:
            v2 = KernelPrediction(value=0.0, quadrature_error=0.0, kernel_id="gamma", params={"tau": 0.0})
        else:
            v2 = base - gamma_macroscopic(f, f, lag, 0.0, resolution=resolution)
        if kappa == 0.0:
            total = v1.value + v2.value
            tol = 10.0 * (v1.quadrature_error + v2.quadrature_error + base.quadrature_error) + 1e-10
            if abs(total - base.value) > tol * max(1.0, abs(base.value)):
                raise KernelMismatchError(
                    f"V1 + V2 = {total:.10g} differs from the static variance {base.value:.10g}",
                    values={"V1": v1.value, "V2": v2.value, "static": base.value},
                )
    elif regime == "meso":
        v1 = gamma_mesoscopic(f, f, lag, v, resolution=resolution)
        if lag == 0.0:
            v2 = KernelPrediction(value=0.0, quadrature_error=0.0, kernel_id="gamma-v", params={"tau": 0.0})
        else:
            v2 = gamma_mesoscopic(f, f, 0.0, v, resolution=resolution) - v1
    else:
        raise ValueError(f"unknown regime {regime!r} (expected 'macro' or 'meso')")
    v1.kernel_id = "V1"
    v2.kernel_id = "V2"
    return v1, v2
