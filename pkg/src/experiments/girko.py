from __future__ import annotations

import dataclasses
import math
from functools import partial
from typing import List, Optional

import numpy as np

from src.experiments.config import EnsembleConfig, ExperimentConfig
from src.experiments.estimators import Criterion, batch_means, bound_criterion
from src.experiments.replicas import start_matrix
from src.experiments.runner import ExperimentResult, ProgressFn, run_replicas
from src.kernels.testfunctions import TestFunction
from src.observables.girko import default_thresholds, girko_decompose, girko_grid, trace_at
from src.utils.logging import setup_logger


logger = setup_logger()

SEPARATION_SIGMAS = 2.0
CONTROL_CORRELATION = 0.5


def girko_task(
    ens: EnsembleConfig,
    f: TestFunction,
    thresholds: tuple,
    resolution: int,
    z1: complex,
    z2: complex,
    eta: float,
    seed: int,
    backend: str,
    replica: int,
) -> np.ndarray:
    """[|I_small|, |I_micro|, |I_meso|, tr(z1, eta), tr(z2, eta), tr(z1, 2 eta)] for one matrix."""
    X = start_matrix(ens, seed, replica)
    eta0, eta_c, T = thresholds
    split = girko_decompose(X, f, eta0, eta_c, T, girko_grid(f, resolution), backend)
    return np.array(
        [
            abs(split.I_small),
            abs(split.I_micro),
            abs(split.I_meso),
            trace_at(X, z1, eta, backend),
            trace_at(X, z2, eta, backend),
            trace_at(X, z1, 2.0 * eta, backend),
        ]
    )


def _corr(x: np.ndarray, y: np.ndarray) -> float:
    return float(np.corrcoef(x, y)[0, 1])


def run_girko_regimes(cfg: ExperimentConfig, progress_cb: Optional[ProgressFn] = None) -> ExperimentResult:
    gk = cfg.girko
    if gk is None:
        raise ValueError("girko needs a [girko] section")
    ex = cfg.exponents
    rows: List[dict] = []
    per_size = {}
    excluded = 0
    for N in gk.sizes:
        ens = dataclasses.replace(cfg.ensemble, N=N)
        f = cfg.function(gk.function, N)
        thresholds = default_thresholds(N, ex.delta0, ex.delta1, ex.T_exp)
        eta = gk.eta if gk.eta is not None else thresholds[1]
        task = partial(
            girko_task, ens, f, thresholds, cfg.quadrature.girko_resolution, gk.z1, gk.z2, eta, cfg.seed, cfg.backend
        )
        batch = run_replicas(task, cfg.replicas, cfg.threads, desc=f"girko N={N}", progress_cb=progress_cb, stage=f"N={N}")
        excluded += batch.excluded
        data = np.asarray(batch.values)
        if data.shape[0] < 4:
            raise ValueError(f"only {data.shape[0]} usable replicas at N={N}")
        small, small_err = batch_means(data[:, 0], cfg.batches)
        micro, micro_err = batch_means(data[:, 1], cfg.batches)
        meso, meso_err = batch_means(data[:, 2], cfg.batches)
        row = {
            "N": N,
            "M": int(data.shape[0]),
            "eta": eta,
            "abs_I_small": small,
            "abs_I_small_err": small_err,
            "abs_I_micro": micro,
            "abs_I_micro_err": micro_err,
            "abs_I_meso": meso,
            "abs_I_meso_err": meso_err,
            "corr_z1_z2": _corr(data[:, 3], data[:, 4]),
            "corr_eta_2eta": _corr(data[:, 3], data[:, 5]),
        }
        rows.append(row)
        per_size[N] = row
        logger.info(
            f"[girko] N={N}: |I_small|={small:.3e}+-{small_err:.1e} |I_micro|={micro:.3e}+-{micro_err:.1e} "
            f"corr(z1,z2)={row['corr_z1_z2']:+.3f}"
        )

    criteria: List[Criterion] = []
    for lo, hi in zip(gk.sizes, gk.sizes[1:]):
        a, b = per_size[lo], per_size[hi]
        gap = a["abs_I_small"] - b["abs_I_small"]
        sigma = math.hypot(a["abs_I_small_err"], b["abs_I_small_err"])
        criteria.append(
            bound_criterion(f"|I_small| decreases N={lo}->{hi}", gap, SEPARATION_SIGMAS * sigma, below=False, sigma=sigma)
        )
        criteria.append(
            bound_criterion(f"|I_micro| decreases N={lo}->{hi}", b["abs_I_micro"], a["abs_I_micro"], below=True)
        )
    top = per_size[gk.sizes[-1]]
    M = top["M"]
    criteria.append(
        bound_criterion("trace decorrelation at z1 != z2", abs(top["corr_z1_z2"]), 3.0 / math.sqrt(M), below=True, N=top["N"])
    )
    criteria.append(
        bound_criterion("trace correlation at z1, eta vs 2 eta (control)", top["corr_eta_2eta"], CONTROL_CORRELATION, below=False, N=top["N"])
    )
    return ExperimentResult(cfg.experiment, criteria, {"girko": rows}, excluded=excluded)
