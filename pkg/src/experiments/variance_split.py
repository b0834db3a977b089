from __future__ import annotations

import math
from functools import partial
from typing import List, Optional, Tuple

import numpy as np

from src.experiments.config import EnsembleConfig, ExperimentConfig
from src.experiments.estimators import Criterion, EstimatorReport, batch_means, covariance_estimate
from src.experiments.replicas import INNER_STREAM, matrices_at
from src.experiments.runner import ExperimentResult, ProgressFn, run_replicas
from src.kernels.covariance import kappa_at, variance_split_prediction
from src.kernels.testfunctions import TestFunction
from src.linalg.nonhermitian import eigenvalues
from src.observables.statistics import linear_statistic
from src.sampling.ensembles import evolve_ou
from src.sampling.rng import replica_generator
from src.utils.logging import setup_logger


logger = setup_logger()


def split_times(cfg: ExperimentConfig) -> Tuple[float, float]:
    vs = cfg.variance_split
    assert vs is not None
    if vs.regime == "meso":
        scale = float(cfg.ensemble.N) ** (-2.0 * cfg.covariance.a)
        return cfg.covariance.T0 + scale * vs.s, cfg.covariance.T0 + scale * vs.t
    return vs.s, vs.t


def conditional_task(
    ens: EnsembleConfig,
    f: TestFunction,
    s: float,
    t: float,
    inner: int,
    seed: int,
    backend: str,
    replica: int,
) -> np.ndarray:
    """L(f, X_t) for `inner` independent continuations of one X_s; row 0 is an unconditional draw."""
    X_s = matrices_at(ens, [s], seed, replica)[float(s)]
    rng = replica_generator(seed, replica, INNER_STREAM)
    out = np.empty(inner)
    for j in range(inner):
        X_t = evolve_ou(X_s, t - s, rng)
        out[j] = linear_statistic(eigenvalues(X_t, backend), f, t).raw_value
    return out


def split_estimates(samples: np.ndarray, batches: int = 0) -> Tuple[Tuple[float, float], Tuple[float, float]]:
    """((V1, se), (V2, se)) from an (M, inner) array of conditional draws.

    V1 is the between-replica variance of the inner means with the inner-sampling noise removed,
    V2 the mean within-replica variance.
    """
    M, inner = samples.shape
    means = samples.mean(axis=1)
    within = samples.var(axis=1, ddof=1)
    v2, v2_err = batch_means(within, batches)
    between, _ = covariance_estimate(means, means, batches)
    q = (means - means.mean()) ** 2 * M / (M - 1) - within / inner
    _, v1_err = batch_means(q, batches)
    return (between - v2 / inner, v1_err), (v2, v2_err)


def run_variance_split(cfg: ExperimentConfig, progress_cb: Optional[ProgressFn] = None) -> ExperimentResult:
    vs = cfg.variance_split
    if vs is None:
        raise ValueError("variance-split needs a [variance_split] section")
    f = cfg.function(vs.function)
    s, t = split_times(cfg)
    task = partial(conditional_task, cfg.ensemble, f, s, t, vs.inner, cfg.seed, cfg.backend)
    batch = run_replicas(task, cfg.replicas, cfg.threads, desc=cfg.experiment, progress_cb=progress_cb, stage="sampling")
    samples = np.asarray(batch.values)
    if samples.shape[0] < 2:
        raise ValueError(f"only {samples.shape[0]} usable outer replicas")

    kappa = kappa_at(cfg.ensemble.kappa4_at_start, s) if vs.regime == "macro" else 0.0
    p1, p2 = variance_split_prediction(
        f, vs.s, vs.t, kappa=kappa, regime=vs.regime, v=cfg.covariance.v, resolution=cfg.quadrature.resolution
    )
    (v1, e1), (v2, e2) = split_estimates(samples, cfg.batches)
    M = samples.shape[0]
    reports = {
        "V1": EstimatorReport(v1, e1, M, p1.value, p1.quadrature_error),
        "V2": EstimatorReport(v2, e2, M, p2.value, p2.quadrature_error),
    }
    total, total_err = covariance_estimate(samples[:, 0], samples[:, 0], cfg.batches)
    reports["V1+V2"] = EstimatorReport(
        v1 + v2,
        math.sqrt(e1 * e1 + e2 * e2),
        M,
        total,
        total_err,
    )

    criteria: List[Criterion] = []
    rows: List[dict] = []
    for name, rep in reports.items():
        label = f"{name} of {f.id} (s={vs.s:g}, t={vs.t:g})"
        criteria.append(rep.criterion(label, cfg.z_threshold, inner=vs.inner))
        rows.append({"quantity": name, "f": f.id, "s": vs.s, "t": vs.t, "inner": vs.inner, **rep.to_row()})
        logger.info(f"[variance-split] {label}: {rep.estimate:.5f} +- {rep.stderr:.5f} vs {rep.predicted:.5f}")
    return ExperimentResult(cfg.experiment, criteria, {"variance_split": rows}, excluded=batch.excluded)
