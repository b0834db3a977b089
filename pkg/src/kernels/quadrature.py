from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.special import roots_legendre

from src.errors import QuadratureError


POLAR_GAUSS = "polar-gauss"
TENSOR_MIDPOINT = "tensor-midpoint"

# Pairs per block in double integrals; bounds the kernel matrix at BLOCK x n_w.
BLOCK = 512


@dataclass(frozen=True)
class QuadratureGrid:
    """Nodes and weights of a 2D rule over a disk (polar) or a square (tensor midpoint)."""

    scheme: str
    resolution: int
    center: complex
    radius: float
    breaks: Tuple[float, ...] = ()
    points: np.ndarray = None  # type: ignore[assignment]
    weights: np.ndarray = None  # type: ignore[assignment]

    def __len__(self) -> int:
        return int(self.points.size)

    def integrate(self, values: np.ndarray) -> float:
        return float(np.real(np.sum(self.weights * values)))

    def integrate_complex(self, values: np.ndarray) -> complex:
        return complex(np.sum(self.weights * values))

    def with_resolution(self, resolution: int) -> "QuadratureGrid":
        if self.scheme == POLAR_GAUSS:
            return polar_gauss_grid(self.center, self.radius, resolution, breaks=self.breaks)
        return tensor_midpoint_grid(self.center, self.radius, resolution)


def _radial_segments(radius: float, breaks: Sequence[float]) -> list:
    cuts = [0.0] + sorted(b for b in breaks if 0.0 < b < radius) + [radius]
    return list(zip(cuts[:-1], cuts[1:]))


def polar_gauss_grid(center: complex, radius: float, resolution: int, breaks: Sequence[float] = ()) -> QuadratureGrid:
    """Gauss-Legendre in r (per segment between `breaks`) times the trapezoid rule in angle.

    `resolution` is the radial node count per segment; the angular count is 2*resolution.
    """
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    if resolution < 2:
        raise ValueError(f"resolution must be >= 2, got {resolution}")
    x, w = roots_legendre(resolution)
    rs, rw = [], []
    for a, b in _radial_segments(radius, breaks):
        r = 0.5 * (b - a) * (x + 1.0) + a
        rs.append(r)
        rw.append(0.5 * (b - a) * w * r)
    r = np.concatenate(rs)
    wr = np.concatenate(rw)
    n_theta = 2 * resolution
    theta = 2.0 * math.pi * (np.arange(n_theta) + 0.5) / n_theta
    pts = complex(center) + r[:, None] * np.exp(1j * theta)[None, :]
    wts = wr[:, None] * np.full(n_theta, 2.0 * math.pi / n_theta)[None, :]
    return QuadratureGrid(
        scheme=POLAR_GAUSS,
        resolution=resolution,
        center=complex(center),
        radius=float(radius),
        breaks=tuple(float(b) for b in breaks),
        points=pts.ravel(),
        weights=wts.ravel(),
    )


def tensor_midpoint_grid(center: complex, half_width: float, resolution: int) -> QuadratureGrid:
    """Midpoint rule on the square center + [-h, h]^2 with resolution^2 cells."""
    if half_width <= 0 or resolution < 1:
        raise ValueError(f"bad tensor grid (half_width={half_width}, resolution={resolution})")
    h = 2.0 * half_width / resolution
    ax = -half_width + h * (np.arange(resolution) + 0.5)
    pts = complex(center) + ax[:, None] + 1j * ax[None, :]
    wts = np.full(pts.shape, h * h)
    return QuadratureGrid(
        scheme=TENSOR_MIDPOINT,
        resolution=resolution,
        center=complex(center),
        radius=float(half_width),
        points=pts.ravel(),
        weights=wts.ravel(),
    )


def unit_disk_grid(resolution: int) -> QuadratureGrid:
    return polar_gauss_grid(0j, 1.0, resolution)


def grid_for(center: complex, support_radius: float, resolution: int, domain: str = "disk") -> QuadratureGrid:
    """Grid covering a function's support intersected with `domain`.

    domain="disk": the unit disk (support disk when it lies inside, else the whole disk).
    domain="plane": the full support disk, split radially at |z| = 1 when centered at 0.
    """
    inside = abs(center) + support_radius <= 1.0
    if domain == "disk":
        if inside:
            return polar_gauss_grid(center, support_radius, resolution)
        return unit_disk_grid(resolution)
    if domain == "plane":
        breaks = (1.0,) if center == 0 and support_radius > 1.0 else ()
        return polar_gauss_grid(center, support_radius, resolution, breaks=breaks)
    raise ValueError(f"unknown domain {domain!r}")


def refine(
    evaluate: Callable[[int], float],
    resolution: int,
    tol: Optional[float] = None,
    max_resolution: int = 512,
) -> Tuple[float, float, int]:
    """Evaluate at `resolution` and half of it; error = |I(n) - I(n/2)|.

    With `tol` set, the resolution is doubled until the error is below tol (relative to |I|
    when |I| > 1); otherwise a single comparison is made.
    """
    coarse = evaluate(max(2, resolution // 2))
    fine = evaluate(resolution)
    err = abs(fine - coarse)
    if tol is None:
        return fine, err, resolution
    n = resolution
    while err > tol * max(1.0, abs(fine)):
        if 2 * n > max_resolution:
            raise QuadratureError(
                f"quadrature did not reach tolerance {tol:g} (error {err:.3e} at resolution {n})"
            )
        n *= 2
        coarse, fine = fine, evaluate(n)
        err = abs(fine - coarse)
    return fine, err, n


def double_integral(
    grid_z: QuadratureGrid,
    values_z: np.ndarray,
    grid_w: QuadratureGrid,
    values_w: np.ndarray,
    kernel: Callable[[np.ndarray, np.ndarray], np.ndarray],
    block: int = BLOCK,
) -> complex:
    """sum_{a,b} w_a F(z_a) k(z_a, w_b) G(w_b) w_b, computed block by block over z."""
    fz = grid_z.weights * values_z
    gw = grid_w.weights * values_w
    keep_z = fz != 0
    keep_w = gw != 0
    zs, fz = grid_z.points[keep_z], fz[keep_z]
    ws, gw = grid_w.points[keep_w], gw[keep_w]
    total = 0j
    for start in range(0, zs.size, block):
        zb = zs[start:start + block]
        kb = kernel(zb[:, None], ws[None, :])
        total += complex(fz[start:start + block] @ (kb @ gw))
    return total

