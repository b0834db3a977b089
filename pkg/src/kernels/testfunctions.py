from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Dict, Mapping, Optional

import numpy as np
from scipy.special import erf

from src.kernels.quadrature import grid_for, unit_disk_grid


# Window cutoff: exp(-x^2/2) < 1e-16 beyond x = WINDOW_CUTOFF
WINDOW_CUTOFF = math.sqrt(2.0 * math.log(1e16))
DEFAULT_KMAX = 64


@dataclass(frozen=True)
class BoundarySeries:
    """Fourier coefficients h_k = (1/2pi) int h(e^{i theta}) e^{-i k theta} d theta, |k| <= kmax."""

    coeffs: np.ndarray

    @property
    def kmax(self) -> int:
        return (self.coeffs.size - 1) // 2

    def __getitem__(self, k: int) -> complex:
        if abs(k) > self.kmax:
            return 0j
        return complex(self.coeffs[k + self.kmax])

    def ks(self) -> np.ndarray:
        return np.arange(-self.kmax, self.kmax + 1)

    def is_real(self, tol: float = 1e-12) -> bool:
        return bool(np.allclose(self.coeffs, np.conj(self.coeffs[::-1]), atol=tol))

    def padded(self, kmax: int) -> np.ndarray:
        out = np.zeros(2 * kmax + 1, dtype=np.complex128)
        k = min(kmax, self.kmax)
        out[kmax - k:kmax + k + 1] = self.coeffs[self.kmax - k:self.kmax + k + 1]
        return out

    @classmethod
    def zeros(cls, kmax: int = 0) -> "BoundarySeries":
        return cls(coeffs=np.zeros(2 * kmax + 1, dtype=np.complex128))


class TestFunction(ABC):
    """Real test function with closed-form Wirtinger derivatives."""

    __test__ = False

    id: str = "f"
    center: complex = 0j
    support_radius: float = 1.0

    @abstractmethod
    def value(self, z: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def dz(self, z: np.ndarray) -> np.ndarray:
        """d/dz f."""

    @abstractmethod
    def laplacian(self, z: np.ndarray) -> np.ndarray:
        """Delta f = 4 d_z d_zbar f."""

    def __call__(self, z: Any) -> Any:
        return self.value(np.asarray(z))

    def dzbar(self, z: np.ndarray) -> np.ndarray:
        return np.conj(self.dz(z))

    @property
    def interior(self) -> bool:
        return abs(self.center) + self.support_radius < 1.0

    def boundary_series(self, kmax: int = DEFAULT_KMAX) -> BoundarySeries:
        if self.interior:
            return BoundarySeries.zeros(kmax)
        n = max(256, 4 * kmax)
        theta = 2.0 * math.pi * np.arange(n) / n
        c = np.fft.fft(self.value(np.exp(1j * theta))) / n
        ks = np.arange(-kmax, kmax + 1)
        return BoundarySeries(coeffs=c[ks % n])

    def disk_mean(self, resolution: int = 96) -> float:
        """<f>_D = (1/pi) int_D f."""
        grid = grid_for(self.center, self.support_radius, resolution, domain="disk")
        return grid.integrate(self.value(grid.points)) / math.pi

    def boundary_mean(self) -> float:
        if self.interior:
            return 0.0
        return float(np.real(self.boundary_series(0)[0]))

    def describe(self) -> Dict[str, Any]:
        return {"id": self.id, "kind": type(self).__name__}


class GaussianBump(TestFunction):
    """amp * (1 + Re(beta u)) * exp(-|u|^2 / 2 s^2), u = z - center, cut where the window is below 1e-16."""

    def __init__(self, id: str = "bump", center: complex = 0j, width: float = 0.1, amp: float = 1.0, tilt: complex = 0j) -> None:
        if width <= 0:
            raise ValueError(f"width must be positive, got {width}")
        self.id = id
        self.center = complex(center)
        self.width = float(width)
        self.amp = float(amp)
        self.tilt = complex(tilt)
        self.support_radius = WINDOW_CUTOFF * self.width

    def _parts(self, z: np.ndarray):
        u = np.asarray(z, dtype=np.complex128) - self.center
        r2 = np.abs(u) ** 2
        s2 = self.width * self.width
        w = np.where(r2 <= self.support_radius ** 2, np.exp(-r2 / (2.0 * s2)), 0.0)
        lin = np.real(self.tilt * u)
        return u, r2, s2, w, lin

    def value(self, z: np.ndarray) -> np.ndarray:
        _, _, _, w, lin = self._parts(z)
        return self.amp * (1.0 + lin) * w

    def dz(self, z: np.ndarray) -> np.ndarray:
        u, _, s2, w, lin = self._parts(z)
        p = 1.0 + lin
        return self.amp * (0.5 * self.tilt - p * np.conj(u) / (2.0 * s2)) * w

    def laplacian(self, z: np.ndarray) -> np.ndarray:
        _, r2, s2, w, lin = self._parts(z)
        p = 1.0 + lin
        fzz = self.amp * w * ((-p - lin) / (2.0 * s2) + p * r2 / (4.0 * s2 * s2))
        return 4.0 * fzz

    def describe(self) -> Dict[str, Any]:
        return {**super().describe(), "center": self.center, "width": self.width, "amp": self.amp, "tilt": self.tilt}


class RadialFourierFunction(TestFunction):
    """amp * Re(conj(c) z^k) * exp(-(|z|^2 - rho0)^2 / 2 s^2): an angular mode times a radial window.

    Its restriction to the unit circle is a single Fourier mode, so the boundary series is exact.
    """

    def __init__(self, id: str = "mode", k: int = 1, coeff: complex = 1.0, rho0: float = 1.0, width: float = 0.3, amp: float = 1.0) -> None:
        if k < 0:
            raise ValueError(f"mode k must be >= 0, got {k}")
        if width <= 0:
            raise ValueError(f"width must be positive, got {width}")
        self.id = id
        self.k = int(k)
        self.coeff = complex(coeff)
        self.rho0 = float(rho0)
        self.width = float(width)
        self.amp = float(amp)
        self.center = 0j
        self.support_radius = math.sqrt(max(self.rho0, 0.0) + WINDOW_CUTOFF * self.width)

    def _parts(self, z: np.ndarray):
        z = np.asarray(z, dtype=np.complex128)
        r2 = np.abs(z) ** 2
        q = r2 - self.rho0
        s2 = self.width * self.width
        g = np.where(np.abs(q) <= WINDOW_CUTOFF * self.width, np.exp(-q * q / (2.0 * s2)), 0.0)
        h = np.real(np.conj(self.coeff) * z ** self.k)
        return z, r2, q, s2, g, h

    def value(self, z: np.ndarray) -> np.ndarray:
        _, _, _, _, g, h = self._parts(z)
        return self.amp * h * g

    def dz(self, z: np.ndarray) -> np.ndarray:
        z, _, q, s2, g, h = self._parts(z)
        if self.k == 0:
            hz = np.zeros_like(z)
        else:
            hz = 0.5 * self.k * np.conj(self.coeff) * z ** (self.k - 1)
        return self.amp * g * (hz - h * q * np.conj(z) / s2)

    def laplacian(self, z: np.ndarray) -> np.ndarray:
        _, r2, q, s2, g, h = self._parts(z)
        fzz = self.amp * g * h * (-(self.k * q + r2 + q) / s2 + q * q * r2 / (s2 * s2))
        return 4.0 * fzz

    @property
    def interior(self) -> bool:
        return False

    def _g1(self) -> float:
        q = 1.0 - self.rho0
        return math.exp(-q * q / (2.0 * self.width ** 2))

    def boundary_series(self, kmax: int = DEFAULT_KMAX) -> BoundarySeries:
        out = BoundarySeries.zeros(max(kmax, 0))
        if self.k > kmax:
            return out
        c = out.coeffs
        g1 = self.amp * self._g1()
        if self.k == 0:
            c[kmax] = g1 * self.coeff.real
        else:
            c[kmax + self.k] = 0.5 * g1 * np.conj(self.coeff)
            c[kmax - self.k] = 0.5 * g1 * self.coeff
        return out

    def boundary_mean(self) -> float:
        return self.amp * self._g1() * self.coeff.real if self.k == 0 else 0.0

    def disk_mean(self, resolution: int = 96) -> float:
        if self.k != 0:
            return 0.0
        s = self.width
        scale = s * math.sqrt(math.pi / 2.0)
        return self.amp * self.coeff.real * scale * float(
            erf((1.0 - self.rho0) / (math.sqrt(2.0) * s)) + erf(self.rho0 / (math.sqrt(2.0) * s))
        )

    def describe(self) -> Dict[str, Any]:
        return {**super().describe(), "k": self.k, "coeff": self.coeff, "rho0": self.rho0, "width": self.width, "amp": self.amp}


class RescaledFunction(TestFunction):
    """f_{v,a}(z) = f(N^a (z - v))."""

    def __init__(self, base: TestFunction, v: complex, a: float, N: int) -> None:
        if not (0.0 <= a < 0.5):
            raise ValueError(f"rescaling exponent must satisfy 0 <= a < 1/2, got {a}")
        self.base = base
        self.v = complex(v)
        self.a = float(a)
        self.N = int(N)
        self.scale = float(N) ** self.a
        self.id = f"{base.id}@{self.v.real:g}{self.v.imag:+g}i,a={self.a:g}"
        self.center = self.v + base.center / self.scale
        self.support_radius = base.support_radius / self.scale

    def _inner(self, z: np.ndarray) -> np.ndarray:
        return self.scale * (np.asarray(z, dtype=np.complex128) - self.v)

    def value(self, z: np.ndarray) -> np.ndarray:
        return self.base.value(self._inner(z))

    def dz(self, z: np.ndarray) -> np.ndarray:
        return self.scale * self.base.dz(self._inner(z))

    def laplacian(self, z: np.ndarray) -> np.ndarray:
        return self.scale ** 2 * self.base.laplacian(self._inner(z))

    @property
    def interior(self) -> bool:
        return abs(self.center) + self.support_radius < 1.0

    def describe(self) -> Dict[str, Any]:
        return {**self.base.describe(), "id": self.id, "v": self.v, "a": self.a, "N": self.N}


def rescale_function(f: TestFunction, v: complex, a: float, N: int) -> TestFunction:
    return RescaledFunction(f, v, a, N)


def gradient_pairing(f: TestFunction, g: TestFunction, resolution: int = 96, domain: str = "disk") -> float:
    """(1/4 pi) int grad f . grad g = (1/pi) int Re(f_z conj(g_z)) over the disk or the plane."""
    if domain == "plane":
        grid = grid_for(f.center, f.support_radius, resolution, domain="plane")
    elif f.interior:
        grid = grid_for(f.center, f.support_radius, resolution, domain="disk")
    elif g.interior:
        grid = grid_for(g.center, g.support_radius, resolution, domain="disk")
    else:
        grid = unit_disk_grid(resolution)
    vals = np.real(f.dz(grid.points) * np.conj(g.dz(grid.points)))
    return grid.integrate(vals) / math.pi


def build_test_function(spec: Mapping[str, Any], N: Optional[int] = None) -> TestFunction:
    """Construct a library function from a config table."""
    kind = spec.get("kind", "bump")
    fid = str(spec.get("id", kind))
    if kind == "bump":
        f: TestFunction = GaussianBump(
            id=fid,
            center=_complex(spec.get("center", 0.0)),
            width=float(spec.get("width", 0.1)),
            amp=float(spec.get("amp", 1.0)),
            tilt=_complex(spec.get("tilt", 0.0)),
        )
    elif kind == "fourier":
        f = RadialFourierFunction(
            id=fid,
            k=int(spec.get("k", 1)),
            coeff=_complex(spec.get("coeff", 1.0)),
            rho0=float(spec.get("rho0", 1.0)),
            width=float(spec.get("width", 0.3)),
            amp=float(spec.get("amp", 1.0)),
        )
    else:
        raise ValueError(f"unknown test function kind {kind!r} (expected 'bump' or 'fourier')")
    a = float(spec.get("a", 0.0) or 0.0)
    if a > 0.0:
        if N is None:
            raise ValueError(f"function {fid!r} is rescaled (a={a}) but no N was given")
        f = RescaledFunction(f, _complex(spec.get("v", 0.0)), a, N)
        f.id = fid
    return f


def _complex(value: Any) -> complex:
    if isinstance(value, (list, tuple)):
        return complex(float(value[0]), float(value[1]))
    return complex(value)
