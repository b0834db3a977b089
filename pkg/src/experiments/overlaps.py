"""Eigenvector-overlap statistics along the equilibrium flow.

Per replica the matrix is sampled at the midpoints of the two (rescaled) time windows. The first
sample also feeds the same-time checks: the bulk mean of O_ii/N and the pair-correlation decay.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import partial
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.experiments.config import ExperimentConfig, OverlapsConfig
from src.experiments.estimators import Criterion, batch_means, bound_criterion, covariance_report, loglog_slope
from src.experiments.replicas import matrices_at
from src.experiments.runner import ExperimentResult, ProgressFn, run_replicas
from src.kernels.overlap_decay import integrated_overlap_prediction
from src.kernels.testfunctions import TestFunction
from src.linalg.nonhermitian import eigendecompose
from src.observables.overlaps import OverlapRecord, bulk_overlap_ratio, overlap_records
from src.utils.logging import setup_logger


logger = setup_logger()

SLOPE_TARGET = -4.0
SLOPE_TOL = 0.5
BULK_TOL = 0.10


def window_midpoints(window: Tuple[float, float], steps: int) -> np.ndarray:
    lo, hi = window
    h = (hi - lo) / steps
    return lo + h * (np.arange(steps) + 0.5)


def separation_bins(separations: Sequence[float]) -> np.ndarray:
    """Dyadic bin edges [d/sqrt2, d*sqrt2) around each separation."""
    d = np.asarray(sorted(separations), dtype=float)
    return np.stack([d / math.sqrt(2.0), d * math.sqrt(2.0)], axis=1)


def pair_products(records: List[OverlapRecord], N: int, center: complex, shell: float, bins: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Per bin: sum and count of (O_ii/N - c_i)(O_jj/N - c_j) over pairs i < j inside the shell."""
    sel = [r for r in records if abs(r.eigenvalue - center) <= shell]
    sums = np.zeros(len(bins))
    counts = np.zeros(len(bins), dtype=int)
    if len(sel) < 2:
        return sums, counts
    lam = np.array([r.eigenvalue for r in sel])
    dev = np.array([r.overlap / N for r in sel]) - (1.0 - np.abs(lam) ** 2)
    iu = np.triu_indices(lam.size, k=1)
    dist = np.abs(lam[:, None] - lam[None, :])[iu]
    prod = np.outer(dev, dev)[iu]
    for k, (lo, hi) in enumerate(bins):
        m = (dist >= lo) & (dist < hi)
        sums[k] = float(prod[m].sum())
        counts[k] = int(m.sum())
    return sums, counts


def weighted_deviation(records: List[OverlapRecord], N: int, f: TestFunction, c: float) -> float:
    """sum_i f(sigma_i) (O_ii/N - c)."""
    if not records:
        return 0.0
    lam = np.array([r.eigenvalue for r in records])
    o = np.array([r.overlap / N for r in records])
    return float(np.sum(np.real(f.value(lam)) * (o - c)))


@dataclass
class OverlapSample:
    a_s: float
    b_t: float
    a_t: float
    b_s: float
    bulk_o: float
    bulk_c: float
    pair_sums: np.ndarray
    pair_counts: np.ndarray
    eigenpairs: int
    excluded: int


def overlap_task(
    cfg: ExperimentConfig,
    f: TestFunction,
    g: TestFunction,
    s_times: Sequence[float],
    t_times: Sequence[float],
    replica: int,
) -> OverlapSample:
    ov = cfg.overlaps
    N = cfg.ensemble.N
    c = 1.0 - abs(complex(ov.v)) ** 2
    bins = separation_bins(ov.separations)
    mats = matrices_at(cfg.ensemble, list(s_times) + list(t_times), cfg.seed, replica)
    dev_f: Dict[float, float] = {}
    dev_g: Dict[float, float] = {}
    total = excluded = 0
    first: Optional[List[OverlapRecord]] = None
    for t in sorted(mats):
        records, bad = overlap_records(eigendecompose(mats[t], cfg.backend))
        total += N
        excluded += bad
        if first is None:
            first = records
        dev_f[t] = weighted_deviation(records, N, f, c)
        dev_g[t] = weighted_deviation(records, N, g, c)
    assert first is not None
    bulk_o, bulk_c = bulk_overlap_ratio(first, N, ov.radius, ov.v)
    sums, counts = pair_products(first, N, ov.v, ov.shell, bins)
    S = [float(s) for s in s_times]
    T = [float(t) for t in t_times]
    return OverlapSample(
        a_s=float(np.mean([dev_f[s] for s in S])),
        b_t=float(np.mean([dev_g[t] for t in T])),
        a_t=float(np.mean([dev_f[t] for t in T])),
        b_s=float(np.mean([dev_g[s] for s in S])),
        bulk_o=bulk_o,
        bulk_c=bulk_c,
        pair_sums=sums,
        pair_counts=counts,
        eigenpairs=total,
        excluded=excluded,
    )


def _scale_exponent(f: TestFunction, cfg: ExperimentConfig) -> float:
    return float(getattr(f, "a", cfg.covariance.a))


def _unscaled(f: TestFunction) -> TestFunction:
    return getattr(f, "base", f)


def decay_slope(samples: List[OverlapSample], ov: OverlapsConfig, N: int) -> Tuple[List[dict], Criterion]:
    sums = np.sum([s.pair_sums for s in samples], axis=0)
    counts = np.sum([s.pair_counts for s in samples], axis=0)
    seps = sorted(ov.separations)
    c = 1.0 - abs(complex(ov.v)) ** 2
    rows = []
    for d, s, n in zip(seps, sums, counts):
        mean = s / n if n else float("nan")
        rows.append({"separation": d, "pairs": int(n), "mean_product": mean, "predicted": c * c / (N * N * d ** 4)})
    usable = [(r["separation"], r["mean_product"]) for r in rows if r["pairs"] > 0 and r["mean_product"] > 0]
    name = "same-time overlap decay slope"
    if len(usable) < 3:
        logger.warning(f"[overlaps] only {len(usable)} separation bins with a positive mean product")
        return rows, Criterion(name, float("nan"), SLOPE_TARGET, None, False, {"usable_bins": len(usable)})
    slope, err = loglog_slope([u[0] for u in usable], [u[1] for u in usable])
    ok = abs(slope - SLOPE_TARGET) <= SLOPE_TOL
    logger.info(f"[overlaps] decay slope {slope:.3f} +- {err:.3f} over {len(usable)} bins")
    return rows, Criterion(name, slope, SLOPE_TARGET, None, bool(ok), {"stderr": err, "usable_bins": len(usable)})


def run_overlap_decay(cfg: ExperimentConfig, progress_cb: Optional[ProgressFn] = None) -> ExperimentResult:
    ov = cfg.overlaps
    if ov.f is None or ov.g is None:
        raise ValueError("overlaps needs [overlaps] f and g function ids")
    if cfg.ensemble.start != "equilibrium":
        raise ValueError("overlap correlations are only defined at equilibrium (ensemble.start = 'equilibrium')")
    N = cfg.ensemble.N
    f, g = cfg.function(ov.f), cfg.function(ov.g)
    a = _scale_exponent(f, cfg)
    tscale = float(N) ** (-2.0 * a)
    s_times = tscale * window_midpoints(ov.s_window, ov.window_steps)
    t_times = tscale * window_midpoints(ov.t_window, ov.window_steps)
    pred = integrated_overlap_prediction(_unscaled(f), _unscaled(g), ov.s_window, ov.t_window, ov.v, cfg.quadrature.resolution)

    task = partial(overlap_task, cfg, f, g, tuple(s_times), tuple(t_times))
    batch = run_replicas(task, cfg.replicas, cfg.threads, desc=cfg.experiment, progress_cb=progress_cb, stage="sampling")
    samples: List[OverlapSample] = batch.values
    if len(samples) < 2:
        raise ValueError(f"only {len(samples)} usable replicas")

    criteria: List[Criterion] = []
    bulk_o = float(np.nanmean([s.bulk_o for s in samples]))
    bulk_c = float(np.nanmean([s.bulk_c for s in samples]))
    ratio = bulk_o / bulk_c
    criteria.append(bound_criterion("bulk E[O/N] / E[1-|sigma|^2]", abs(ratio - 1.0), BULK_TOL, below=True, ratio=ratio))
    logger.info(f"[overlaps] bulk mean O/N {bulk_o:.4f} vs 1-|sigma|^2 {bulk_c:.4f}")

    decay_rows, decay = decay_slope(samples, ov, N)
    criteria.append(decay)

    # integrated statement: window areas times the covariance of the window-averaged sums
    area = (ov.s_window[1] - ov.s_window[0]) * (ov.t_window[1] - ov.t_window[0])
    a_s = area * np.array([s.a_s for s in samples])
    b_t = np.array([s.b_t for s in samples])
    a_t = area * np.array([s.a_t for s in samples])
    b_s = np.array([s.b_s for s in samples])
    rep = covariance_report(a_s, b_t, pred.value, pred.quadrature_error, cfg.batches)
    criteria.append(rep.criterion(f"window-integrated overlap covariance ({ov.f}, {ov.g})", cfg.z_threshold, a=a))

    d = (a_s - a_s.mean()) * (b_t - b_t.mean()) - (a_t - a_t.mean()) * (b_s - b_s.mean())
    diff, diff_err = batch_means(d, cfg.batches)
    swap_z = abs(diff) / diff_err if diff_err > 0 else 0.0
    criteria.append(bound_criterion("swapped windows symmetric", swap_z, cfg.z_threshold, below=True, difference=diff, stderr=diff_err))

    pairs = sum(s.eigenpairs for s in samples)
    rate = sum(s.excluded for s in samples) / max(pairs, 1)
    criteria.append(bound_criterion("eigenpair exclusion rate", rate, ov.max_exclusion, below=True, eigenpairs=pairs))
    if rate > ov.max_exclusion:
        logger.warning(f"[overlaps] eigenpair exclusion rate {rate:.2e} exceeds {ov.max_exclusion:.1e}")

    tables = {
        "overlap_window": [{"f": ov.f, "g": ov.g, "a": a, **rep.to_row(), "swap_difference": diff, "swap_stderr": diff_err}],
        "overlap_decay": decay_rows,
    }
    return ExperimentResult(cfg.experiment, criteria, tables, excluded=batch.excluded, extra={"bulk_ratio": ratio})
