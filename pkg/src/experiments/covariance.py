from __future__ import annotations

import dataclasses
import math
from functools import partial
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.experiments.config import EnsembleConfig, ExperimentConfig, PairConfig
from src.experiments.estimators import Criterion, EstimatorReport, covariance_report
from src.experiments.replicas import statistics_task
from src.experiments.runner import ExperimentResult, ProgressFn, run_replicas
from src.kernels.covariance import KernelPrediction, gamma_macroscopic, gamma_mesoscopic, kappa_at, kappa_term
from src.kernels.testfunctions import TestFunction
from src.utils.logging import setup_logger


logger = setup_logger()

# seed offset of the Gaussian baseline run used by the cumulant-shift check
BASELINE_SEED_OFFSET = 1


def sampling_time(cfg: ExperimentConfig, s: float) -> float:
    """Matrix time of a pair time: s itself, or T0 + N^{-2a} s for mesoscopic runs."""
    cov = cfg.covariance
    if cov.regime == "meso":
        return cov.T0 + float(cfg.ensemble.N) ** (-2.0 * cov.a) * s
    return s


def _functions(cfg: ExperimentConfig) -> Tuple[List[str], Dict[str, TestFunction]]:
    ids: List[str] = []
    for p in cfg.pairs:
        for fid in (p.f, p.g):
            if fid not in ids:
                ids.append(fid)
    return ids, {fid: cfg.function(fid) for fid in ids}


def _times(cfg: ExperimentConfig) -> List[float]:
    return sorted({sampling_time(cfg, t) for p in cfg.pairs for t in (p.s, p.t)})


def pair_prediction(cfg: ExperimentConfig, p: PairConfig, f: TestFunction, g: TestFunction) -> KernelPrediction:
    tau = abs(p.t - p.s)
    q = cfg.quadrature
    if cfg.covariance.regime == "meso":
        return gamma_mesoscopic(f, g, tau, cfg.covariance.v, resolution=q.resolution)
    kappa = kappa_at(cfg.ensemble.kappa4_at_start, min(p.s, p.t))
    return gamma_macroscopic(f, g, tau, kappa, resolution=q.resolution, kmax=q.kmax)


def sample_statistics(
    cfg: ExperimentConfig,
    ens: EnsembleConfig,
    fns: Sequence[TestFunction],
    times: Sequence[float],
    seed: int,
    progress_cb: Optional[ProgressFn] = None,
    dump_dir: Optional[str] = None,
) -> Tuple[np.ndarray, int]:
    """Raw statistics of shape (M, len(times), len(fns)) and the number of excluded replicas."""
    task = partial(statistics_task, ens, list(fns), list(times), seed, cfg.backend, dump_dir=dump_dir)
    batch = run_replicas(task, cfg.replicas, cfg.threads, desc=cfg.experiment, progress_cb=progress_cb, stage="sampling")
    return np.asarray(batch.values), batch.excluded


def run_covariance(cfg: ExperimentConfig, progress_cb: Optional[ProgressFn] = None) -> ExperimentResult:
    if not cfg.pairs:
        raise ValueError("covariance needs at least one [[pairs]] entry")
    ids, fns = _functions(cfg)
    times = _times(cfg)
    dump_dir = str(Path(cfg.output.dir) / "spectra") if cfg.output.write_samples else None
    data, excluded = sample_statistics(cfg, cfg.ensemble, [fns[i] for i in ids], times, cfg.seed, progress_cb, dump_dir)
    if data.shape[0] < 2:
        raise ValueError(f"only {data.shape[0]} usable replicas")

    criteria: List[Criterion] = []
    rows: List[dict] = []
    reports: Dict[int, EstimatorReport] = {}
    for k, p in enumerate(cfg.pairs):
        f, g = fns[p.f], fns[p.g]
        x = data[:, times.index(sampling_time(cfg, p.s)), ids.index(p.f)]
        y = data[:, times.index(sampling_time(cfg, p.t)), ids.index(p.g)]
        pred = pair_prediction(cfg, p, f, g)
        rep = covariance_report(x, y, pred.value, pred.quadrature_error, cfg.batches)
        reports[k] = rep
        name = f"cov({p.f}@{p.s:g}, {p.g}@{p.t:g})"
        criteria.append(rep.criterion(name, cfg.z_threshold, kernel=pred.kernel_id))
        rows.append({"f": p.f, "s": p.s, "g": p.g, "t": p.t, "kernel": pred.kernel_id, **rep.to_row()})
        logger.info(f"[covariance] {name}: {rep.estimate:.5f} +- {rep.stderr:.5f} vs {rep.predicted:.5f} (z={rep.z:+.2f})")

    tables = {"covariance": rows}
    if cfg.covariance.kappa_shift:
        shift_criteria, shift_rows, extra_excluded = _kappa_shift(cfg, ids, fns, times, data, reports, progress_cb)
        criteria.extend(shift_criteria)
        tables["kappa_shift"] = shift_rows
        excluded += extra_excluded
    return ExperimentResult(cfg.experiment, criteria, tables, excluded=excluded)


def _kappa_shift(
    cfg: ExperimentConfig,
    ids: List[str],
    fns: Dict[str, TestFunction],
    times: List[float],
    data: np.ndarray,
    reports: Dict[int, EstimatorReport],
    progress_cb: Optional[ProgressFn],
) -> Tuple[List[Criterion], List[dict], int]:
    """Variance difference against a Gaussian-entry run from the same kind of start."""
    kappa4 = cfg.ensemble.kappa4_at_start
    if kappa4 == 0.0:
        logger.warning("[covariance] cumulant-shift check requested for an ensemble with kappa_4 = 0")
    gauss = dataclasses.replace(cfg.ensemble, distribution="complex-gaussian", kappa4=None)
    base, excluded = sample_statistics(cfg, gauss, [fns[i] for i in ids], times, cfg.seed + BASELINE_SEED_OFFSET, progress_cb)
    criteria: List[Criterion] = []
    rows: List[dict] = []
    for k, p in enumerate(cfg.pairs):
        if p.f != p.g or p.s != p.t:
            continue
        ti, fi = times.index(sampling_time(cfg, p.s)), ids.index(p.f)
        b = covariance_report(base[:, ti, fi], base[:, ti, fi], 0.0, 0.0, cfg.batches)
        a = reports[k]
        f = fns[p.f]
        pred = kappa_term(f, f, 0.0, kappa_at(kappa4, p.s))
        rep = EstimatorReport(
            estimate=a.estimate - b.estimate,
            stderr=math.sqrt(a.stderr ** 2 + b.stderr ** 2),
            M=min(a.M, b.M),
            predicted=pred,
            quad_err=a.quad_err,
        )
        name = f"kappa shift Var({p.f}@{p.s:g})"
        criteria.append(rep.criterion(name, cfg.z_threshold, kappa4=kappa4))
        rows.append({"f": p.f, "s": p.s, "var": a.estimate, "var_gaussian": b.estimate, **rep.to_row()})
        logger.info(f"[covariance] {name}: shift {rep.estimate:.5f} +- {rep.stderr:.5f} vs {pred:.5f}")
    return criteria, rows, excluded
