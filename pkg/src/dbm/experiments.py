from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from src.dbm.drivers import Driver, independent_driver, make_coupled_drivers
from src.dbm.initial_data import RegularInitialData
from src.dbm.particles import ParticleConfiguration
from src.dbm.simulate import DBMSimConfig, simulate_coupled
from src.experiments.estimators import loglog_slope
from src.experiments.runner import ProgressFn, run_replicas
from src.linalg.hermitize import singular_values
from src.sampling.distributions import EntryDistribution
from src.sampling.ensembles import sample_ginibre
from src.sampling.rng import replica_generator
from src.theory.free_convolution import FreeConvolutionModel, density_at
from src.theory.selfconsistent import solve_mz
from src.utils.logging import setup_logger


logger = setup_logger()


# ---------------------------------------------------------------- coupling


@dataclass
class GapTable:
    """Per-replica gaps |s_i(t) - r_i(t)|, shape (replicas, len(times), i_max)."""

    N: int
    times: List[float]
    gaps: np.ndarray
    label: str = ""
    excluded: int = 0

    def scaled_median(self, i: int = 1, t: Optional[float] = None) -> float:
        k = len(self.times) - 1 if t is None else self.times.index(t)
        return float(self.N * np.median(self.gaps[:, k, i - 1]))

    def to_rows(self) -> List[dict]:
        rows = []
        for k, t in enumerate(self.times):
            for i in range(self.gaps.shape[2]):
                g = self.N * self.gaps[:, k, i]
                rows.append(
                    {
                        "label": self.label,
                        "t": t,
                        "i": i + 1,
                        "median_scaled_gap": float(np.median(g)),
                        "mean_scaled_gap": float(np.mean(g)),
                        "q90_scaled_gap": float(np.quantile(g, 0.9)),
                    }
                )
        return rows


def _coupled_gaps(
    x0: np.ndarray,
    drivers: Tuple[Driver, Driver],
    times: Sequence[float],
    dt: float,
    seed: int,
    i_max: int,
    replica: int,
) -> np.ndarray:
    init = ParticleConfiguration(x0)
    cfg = DBMSimConfig(N=init.N, dt=dt, T=max(times), seed=seed)
    s, r = simulate_coupled([init, init], list(drivers), cfg, times, rng=replica_generator(seed, replica, 3))
    return np.array([np.abs(a[:i_max] - b[:i_max]) for a, b in zip(s.states, r.states)])


def coupling_gap_experiment(
    init: RegularInitialData | ParticleConfiguration,
    K: int,
    eps: float,
    t_grid: Sequence[float],
    replicas: int = 100,
    seed: int = 0,
    dt: float = 1e-4,
    i_max: int = 5,
    rate: float = 1.0,
    threads: int = 1,
    progress_cb: Optional[ProgressFn] = None,
) -> GapTable:
    """Two processes from the same initial data with drivers coupled on the first K indices."""
    particles = init.particles if isinstance(init, RegularInitialData) else init
    N = particles.N
    i_max = min(i_max, N)
    times = sorted(float(t) for t in t_grid)
    drivers = make_coupled_drivers(N, K, eps, rate)
    task = partial(_coupled_gaps, particles.x, drivers, times, dt, seed, i_max)
    batch = run_replicas(task, replicas, threads, desc=f"dbm-coupling eps={eps:g}", progress_cb=progress_cb, stage="dbm-coupling")
    batch.require(1, "dbm-coupling")
    table = GapTable(N=N, times=times, gaps=np.asarray(batch.values), label=f"K={K},eps={eps:g}", excluded=batch.excluded)
    logger.info(f"[dbm] coupling K={K} eps={eps:.3g}: median N|s1 - r1| at t={times[-1]:.3g} is {table.scaled_median():.4f}")
    return table


# ---------------------------------------------------------------- relaxation


def relaxation_envelope(i: int, N: int, t: float, index_factor: bool = True) -> float:
    """(|i|/N) (1/sqrt(N t) + max(|i|/N, t)); without the index factor only the bracket is kept."""
    core = 1.0 / math.sqrt(N * t) + max(i / N, t)
    return (i / N) * core if index_factor else core


@dataclass
class RelaxationTable:
    N: int
    times: List[float]
    densities: List[Tuple[float, float]]
    gaps: np.ndarray
    envelope_factor: float
    index_factor: bool = True
    excluded: int = 0

    def median_gap(self, i: int = 1) -> np.ndarray:
        return np.median(self.gaps[:, :, i - 1], axis=0)

    def envelope(self, i: int, t: float) -> float:
        return relaxation_envelope(i, self.N, t, self.index_factor)

    def exceedance(self) -> float:
        """Fraction of (i, t) cells whose median gap exceeds envelope x N^{exponent}."""
        cells = 0
        over = 0
        for i in range(1, self.gaps.shape[2] + 1):
            med = self.median_gap(i)
            for k, t in enumerate(self.times):
                cells += 1
                over += int(med[k] > self.envelope(i, t) * self.envelope_factor)
        return over / cells if cells else 0.0

    def replica_exceedance(self) -> float:
        limits = np.array([[self.envelope(i, t) * self.envelope_factor for i in range(1, self.gaps.shape[2] + 1)] for t in self.times])
        return float(np.mean(self.gaps > limits[None, :, :]))

    def slope(self, i: int = 1) -> Tuple[float, float, int]:
        """Log-log slope of the median gap where 1/sqrt(N t) dominates the envelope."""
        med = self.median_gap(i)
        keep = [k for k, t in enumerate(self.times) if 1.0 / math.sqrt(self.N * t) >= max(i / self.N, t)]
        if len(keep) < 3:
            raise ValueError(f"only {len(keep)} times in the diffusive window; widen the time grid")
        s, err = loglog_slope([self.times[k] for k in keep], [med[k] for k in keep])
        return s, err, len(keep)

    def to_rows(self) -> List[dict]:
        rows = []
        for i in range(1, self.gaps.shape[2] + 1):
            med = self.median_gap(i)
            for k, t in enumerate(self.times):
                env = self.envelope(i, t)
                rows.append(
                    {
                        "t": t,
                        "i": i,
                        "rho_t": self.densities[k][0],
                        "rho_t_prime": self.densities[k][1],
                        "median_gap": float(med[k]),
                        "envelope": env,
                        "exceeds": bool(med[k] > env * self.envelope_factor),
                    }
                )
        return rows


def _relaxation_gaps(
    x1: np.ndarray,
    x2: np.ndarray,
    times: Sequence[float],
    densities: Sequence[Tuple[float, float]],
    dt: float,
    seed: int,
    i_max: int,
    replica: int,
) -> np.ndarray:
    a, b = ParticleConfiguration(x1), ParticleConfiguration(x2)
    drv = independent_driver(a.N)
    cfg = DBMSimConfig(N=a.N, dt=dt, T=max(times), seed=seed)
    s, sp = simulate_coupled([a, b], [drv, drv], cfg, times, rng=replica_generator(seed, replica, 3))
    return np.array(
        [np.abs(r1 * u[:i_max] - r2 * v[:i_max]) for (r1, r2), u, v in zip(densities, s.states, sp.states)]
    )


def relaxation_experiment(
    init1: RegularInitialData,
    init2: RegularInitialData,
    t_grid: Sequence[float],
    replicas: int = 100,
    seed: int = 0,
    dt: float = 1e-4,
    i_max: int = 3,
    envelope_exponent: float = 0.1,
    index_factor: bool = True,
    threads: int = 1,
    progress_cb: Optional[ProgressFn] = None,
) -> RelaxationTable:
    """Same driver, different initial data: density-rescaled gaps against the relaxation envelope."""
    if init1.N != init2.N:
        raise ValueError(f"initial data sizes differ: {init1.N} vs {init2.N}")
    N = init1.N
    i_max = min(i_max, N)
    times = sorted(float(t) for t in t_grid)
    if times[0] <= 0:
        raise ValueError("relaxation times must be positive")
    densities = [
        (
            density_at(FreeConvolutionModel(init1.reference, t), 0.0),
            density_at(FreeConvolutionModel(init2.reference, t), 0.0),
        )
        for t in times
    ]
    task = partial(_relaxation_gaps, init1.particles.x, init2.particles.x, times, densities, dt, seed, i_max)
    batch = run_replicas(task, replicas, threads, desc="dbm-relaxation", progress_cb=progress_cb, stage="dbm-relaxation")
    batch.require(1, "dbm-relaxation")
    table = RelaxationTable(
        N=N,
        times=times,
        densities=densities,
        gaps=np.asarray(batch.values),
        envelope_factor=float(N) ** envelope_exponent,
        index_factor=index_factor,
        excluded=batch.excluded,
    )
    logger.info(f"[dbm] relaxation N={N}: exceedance {table.exceedance():.3f} of cells")
    return table


# ---------------------------------------------------------------- hard edge


def hard_edge_density(z: complex) -> float:
    """Density at 0 of the symmetrized singular-value law of X - z: Im m(0+)/pi."""
    return solve_mz(z, 0.0).m.imag / math.pi


@dataclass
class HardEdgeReport:
    N: int
    t: float
    z_list: List[complex]
    flow: np.ndarray
    reference: np.ndarray
    excluded: int = 0
    ks: List[Tuple[float, float]] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.ks:
            self.ks = [
                (float(r.statistic), float(r.pvalue))
                for r in (stats.ks_2samp(self.flow[:, p], self.reference[:, p]) for p in range(len(self.z_list)))
            ]

    def correlation(self, p: int = 0, q: int = 1) -> float:
        return float(np.corrcoef(self.flow[:, p], self.flow[:, q])[0, 1])

    def to_rows(self) -> List[dict]:
        rows = []
        for p, z in enumerate(self.z_list):
            rows.append(
                {
                    "z_re": z.real,
                    "z_im": z.imag,
                    "ks": self.ks[p][0],
                    "pvalue": self.ks[p][1],
                    "flow_median": float(np.median(self.flow[:, p])),
                    "reference_median": float(np.median(self.reference[:, p])),
                }
            )
        return rows


def _hard_edge_replica(
    N: int,
    dist: EntryDistribution,
    z_list: Sequence[complex],
    t: float,
    seed: int,
    backend: str,
    replica: int,
) -> Tuple[np.ndarray, np.ndarray]:
    chi = dist.sample(replica_generator(seed, replica, 0), (N, N)) / math.sqrt(N)
    G = sample_ginibre(N, replica_generator(seed, replica, 4))
    Xt = math.sqrt(1.0 - t) * chi + math.sqrt(t) * G
    ref = sample_ginibre(N, replica_generator(seed, replica, 6))
    scale = [N * hard_edge_density(z) for z in z_list]
    flow = [c * singular_values(Xt, z, backend)[0] for c, z in zip(scale, z_list)]
    base = [c * singular_values(ref, z, backend)[0] for c, z in zip(scale, z_list)]
    return np.array(flow), np.array(base)


def hard_edge_universality_experiment(
    dist: EntryDistribution,
    z_list: Sequence[complex],
    t: float,
    replicas: int,
    N: int,
    seed: int = 0,
    backend: str = "native",
    threads: int = 1,
    progress_cb: Optional[ProgressFn] = None,
) -> HardEdgeReport:
    """Density-rescaled smallest singular values of sqrt(1-t) X + sqrt(t) G versus Ginibre, at each z."""
    z_list = [complex(z) for z in z_list]
    if not z_list:
        raise ValueError("need at least one z")
    if any(abs(z) >= 1.0 for z in z_list):
        raise ValueError("hard-edge points must lie inside the unit disk")
    if not (0.0 < t < 1.0):
        raise ValueError(f"t must lie in (0, 1), got {t}")
    task = partial(_hard_edge_replica, N, dist, z_list, t, seed, backend)
    batch = run_replicas(task, replicas, threads, desc="hard-edge", progress_cb=progress_cb, stage="hard-edge")
    batch.require(2, "hard-edge")
    flow = np.array([f for f, _ in batch.values])
    ref = np.array([r for _, r in batch.values])
    report = HardEdgeReport(N=N, t=t, z_list=z_list, flow=flow, reference=ref, excluded=batch.excluded)
    for z, (d, p) in zip(z_list, report.ks):
        logger.info(f"[hard_edge] z={z}: KS={d:.4f} (p={p:.3f})")
    return report


# ---------------------------------------------------------------- interpolation


def interpolated_driver(ds: Driver, dr: Driver, alpha: float) -> Driver:
    """alpha b^s + (1 - alpha) b^r on the shared base motion."""
    if ds.mixing.shape != dr.mixing.shape:
        raise ValueError("drivers must share the base motion")
    return Driver(alpha * ds.mixing + (1.0 - alpha) * dr.mixing)


def interpolation_tangent(
    init: ParticleConfiguration,
    ds: Driver,
    dr: Driver,
    alpha: float,
    t: float,
    delta: float = 1e-3,
    dt: float = 1e-4,
    seed: int = 0,
    replica: int = 0,
) -> np.ndarray:
    """(x(t, alpha + delta) - x(t, alpha)) / delta from two runs sharing the base noise."""
    cfg = DBMSimConfig(N=init.N, dt=dt, T=t, seed=seed)
    a = simulate_coupled([init], [interpolated_driver(ds, dr, alpha)], cfg, rng=replica_generator(seed, replica, 3))[0]
    b = simulate_coupled([init], [interpolated_driver(ds, dr, alpha + delta)], cfg, rng=replica_generator(seed, replica, 3))[0]
    return (b.final - a.final) / delta


def gap_summary(table: GapTable, baseline: Optional[GapTable] = None) -> Dict[str, float]:
    out = {"median_scaled_gap_1": table.scaled_median(1)}
    if baseline is not None:
        out["baseline_median_scaled_gap_1"] = baseline.scaled_median(1)
        last = table.gaps.shape[2]
        out[f"median_scaled_gap_{last}"] = table.scaled_median(last)
        out[f"baseline_median_scaled_gap_{last}"] = baseline.scaled_median(last)
    return out
