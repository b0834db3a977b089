"""Space-time covariance of the log-determinant field log|det(X_t - z)|."""
from __future__ import annotations

import math
from functools import partial
from typing import List, Optional, Sequence

import numpy as np

from src.experiments.config import EnsembleConfig, ExperimentConfig
from src.experiments.estimators import Criterion, covariance_report
from src.experiments.replicas import matrices_at
from src.experiments.runner import ExperimentResult, ProgressFn, run_replicas
from src.kernels.covariance import kappa_at, kernel_K
from src.observables.statistics import logdet_field
from src.utils.logging import setup_logger


logger = setup_logger()


def logdet_prediction(z: complex, w: complex, tau: float, kappa: float) -> float:
    """K(z, w, tau)/4 + (kappa/4) e^{-tau} (1-|z|^2)(1-|w|^2)."""
    value = 0.25 * float(kernel_K(z, w, tau))
    if kappa:
        value += 0.25 * kappa * math.exp(-tau) * (1.0 - abs(z) ** 2) * (1.0 - abs(w) ** 2)
    return value


def logdet_task(ens: EnsembleConfig, points: Sequence[complex], s: float, t: float, seed: int, replica: int) -> np.ndarray:
    """Shape (2, len(points)): the field at time s then at time t; singular points are NaN."""
    mats = matrices_at(ens, [s, t], seed, replica)
    out = np.empty((2, len(points)))
    for k, time in enumerate((s, t)):
        for j, d in enumerate(logdet_field(mats[float(time)], points)):
            out[k, j] = math.nan if d.singular else d.value
    return out


def run_logdet_field(cfg: ExperimentConfig, progress_cb: Optional[ProgressFn] = None) -> ExperimentResult:
    ld = cfg.logdet
    points = [complex(p) for p in ld.points]
    if any(abs(p) >= 1.0 for p in points):
        logger.warning("[logdet] some points lie outside the bulk; the prediction is only meaningful for |z| < 1")
    s, t = sorted((ld.s, ld.t))
    tau = t - s
    task = partial(logdet_task, cfg.ensemble, tuple(points), s, t, cfg.seed)
    batch = run_replicas(task, cfg.replicas, cfg.threads, desc=cfg.experiment, progress_cb=progress_cb, stage="sampling")
    data = np.asarray(batch.values)
    finite = np.all(np.isfinite(data.reshape(data.shape[0], -1)), axis=1)
    dropped = int((~finite).sum())
    if dropped:
        logger.warning(f"[logdet] dropped {dropped} replicas with a numerically singular X - z")
    data = data[finite]
    if data.shape[0] < 2:
        raise ValueError(f"only {data.shape[0]} usable replicas")

    kappa = kappa_at(cfg.ensemble.kappa4_at_start, s)
    criteria: List[Criterion] = []
    rows: List[dict] = []
    for i, z in enumerate(points):
        for j, w in enumerate(points):
            # z = w at equal times is the divergent diagonal of the field
            if i == j and tau == 0.0:
                continue
            pred = logdet_prediction(z, w, tau, kappa)
            rep = covariance_report(data[:, 0, i], data[:, 1, j], pred, 0.0, cfg.batches)
            name = f"cov(logdet({z:g})@{s:g}, logdet({w:g})@{t:g})"
            criteria.append(rep.criterion(name, cfg.z_threshold))
            rows.append({"z_re": z.real, "z_im": z.imag, "w_re": w.real, "w_im": w.imag, "s": s, "t": t, **rep.to_row()})
            logger.info(f"[logdet] {name}: {rep.estimate:.5f} +- {rep.stderr:.5f} vs {pred:.5f}")
    return ExperimentResult(cfg.experiment, criteria, {"logdet_field": rows}, excluded=batch.excluded + dropped)
