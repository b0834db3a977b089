"""Gaussianity check of a single linear statistic through its third and fourth standardized cumulants."""
from __future__ import annotations

from typing import Dict, List, Optional, Tuple

import numpy as np

from src.experiments.config import ExperimentConfig
from src.experiments.covariance import sample_statistics
from src.experiments.estimators import Criterion, bound_criterion, standardized_cumulants
from src.experiments.runner import ExperimentResult, ProgressFn
from src.sampling.rng import replica_generator
from src.utils.logging import setup_logger


logger = setup_logger()

CONTROL_STREAM = 13


def cumulant_z(cumulants: Dict[str, Tuple[float, float]]) -> Dict[str, float]:
    return {k: (abs(v) / se if se > 0 else float("inf")) for k, (v, se) in cumulants.items()}


def _rows(label: str, cumulants: Dict[str, Tuple[float, float]]) -> List[dict]:
    return [
        {"sample": label, "cumulant": k, "value": v, "stderr": se, "z": abs(v) / se if se > 0 else float("inf")}
        for k, (v, se) in cumulants.items()
    ]


def run_wick(cfg: ExperimentConfig, progress_cb: Optional[ProgressFn] = None) -> ExperimentResult:
    wk = cfg.wick
    if wk is None:
        raise ValueError("wick needs a [wick] section")
    f = cfg.function(wk.function)
    data, excluded = sample_statistics(cfg, cfg.ensemble, [f], [wk.time], cfg.seed, progress_cb)
    x = data[:, 0, 0]
    M = x.size
    if M < 8:
        raise ValueError(f"only {M} usable replicas")

    thr = cfg.z_threshold
    cum = standardized_cumulants(x, wk.n_resamples, cfg.seed)
    criteria: List[Criterion] = [
        bound_criterion(f"{k} of {f.id}@{wk.time:g}", z, thr, below=True, value=cum[k][0], stderr=cum[k][1])
        for k, z in cumulant_z(cum).items()
    ]
    rows = _rows(f.id, cum)
    for k, (v, se) in cum.items():
        logger.info(f"[wick] {f.id}: {k} = {v:+.4f} +- {se:.4f}")

    if wk.controls:
        rng = replica_generator(cfg.seed, 0, CONTROL_STREAM)
        gauss = rng.standard_normal(M)
        chi2 = rng.standard_normal(M) ** 2
        g_cum = standardized_cumulants(gauss, wk.n_resamples, cfg.seed)
        c_cum = standardized_cumulants(chi2, wk.n_resamples, cfg.seed)
        # a Gaussian sample of the same size must pass; a chi-square(1) sample must be rejected
        criteria.append(bound_criterion("gaussian control accepted", max(cumulant_z(g_cum).values()), thr, below=True))
        criteria.append(bound_criterion("chi-square control rejected", max(cumulant_z(c_cum).values()), thr, below=False))
        rows += _rows("control-gaussian", g_cum) + _rows("control-chi2", c_cum)
    return ExperimentResult(cfg.experiment, criteria, {"cumulants": rows}, excluded=excluded)
