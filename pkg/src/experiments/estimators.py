from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from src.sampling.rng import replica_generator


DEFAULT_Z_THRESHOLD = 4.0


@dataclass
class Criterion:
    """One pass/fail line of a run summary."""

    name: str
    estimate: float
    predicted: float
    z: Optional[float]
    passed: bool
    detail: Dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> Dict[str, Any]:
        out = {"name": self.name, "estimate": self.estimate, "predicted": self.predicted, "z": self.z, "pass": self.passed}
        if self.detail:
            out["detail"] = self.detail
        return out


@dataclass
class EstimatorReport:
    estimate: float
    stderr: float
    M: int
    predicted: float
    quad_err: float = 0.0

    @property
    def z(self) -> float:
        return z_score(self.estimate, self.predicted, self.stderr, self.quad_err)

    def criterion(self, name: str, threshold: float = DEFAULT_Z_THRESHOLD, **detail: Any) -> Criterion:
        z = self.z
        return Criterion(
            name=name,
            estimate=self.estimate,
            predicted=self.predicted,
            z=z,
            passed=bool(abs(z) <= threshold),
            detail={"stderr": self.stderr, "M": self.M, "quad_err": self.quad_err, **detail},
        )

    def to_row(self) -> Dict[str, Any]:
        return {
            "estimate": self.estimate,
            "stderr": self.stderr,
            "M": self.M,
            "predicted": self.predicted,
            "quad_err": self.quad_err,
            "z": self.z,
        }


def z_score(estimate: float, predicted: float, stderr: float, quad_err: float = 0.0) -> float:
    scale = math.sqrt(stderr * stderr + quad_err * quad_err)
    if scale == 0.0:
        return 0.0 if estimate == predicted else math.copysign(math.inf, estimate - predicted)
    return (estimate - predicted) / scale


def n_batches(M: int, batches: int = 0) -> int:
    b = batches if batches > 0 else int(math.isqrt(M))
    return max(2, min(b, M))


def batch_means(samples: Sequence[float], batches: int = 0) -> Tuple[float, float]:
    """Mean and batch-means standard error (floor(sqrt(M)) contiguous batches by default)."""
    x = np.asarray(samples, dtype=float)
    M = x.size
    if M < 2:
        raise ValueError(f"need at least two samples, got {M}")
    b = n_batches(M, batches)
    usable = (M // b) * b
    means = x[:usable].reshape(b, -1).mean(axis=1)
    return float(x.mean()), float(means.std(ddof=1) / math.sqrt(b))


def covariance_estimate(x: Sequence[float], y: Sequence[float], batches: int = 0) -> Tuple[float, float]:
    """Cov(x, y) centered by the pooled means, with a batch-means error on the centered products."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {y.shape}")
    prod = (x - x.mean()) * (y - y.mean())
    est, err = batch_means(prod, batches)
    M = x.size
    return est * M / (M - 1), err


def covariance_report(x: Sequence[float], y: Sequence[float], predicted: float, quad_err: float = 0.0, batches: int = 0) -> EstimatorReport:
    est, err = covariance_estimate(x, y, batches)
    return EstimatorReport(estimate=est, stderr=err, M=len(x), predicted=predicted, quad_err=quad_err)


def standardized_cumulants(samples: Sequence[float], n_resamples: int = 999, seed: int = 0) -> Dict[str, Tuple[float, float]]:
    """Skewness and excess kurtosis with bootstrap standard errors."""
    x = np.asarray(samples, dtype=float)
    rng = replica_generator(seed, 0, stream=7)
    out: Dict[str, Tuple[float, float]] = {}
    for name, fn in (("skewness", stats.skew), ("excess_kurtosis", stats.kurtosis)):
        res = stats.bootstrap((x,), fn, n_resamples=n_resamples, method="percentile", random_state=rng, vectorized=True)
        out[name] = (float(fn(x)), float(res.standard_error))
    return out


def tolerance_criterion(name: str, error: float, tol: float, **detail: Any) -> Criterion:
    """Exact-identity check: passes when error <= tol."""
    return Criterion(name=name, estimate=float(error), predicted=float(tol), z=None, passed=bool(error <= tol), detail=dict(detail))


def bound_criterion(name: str, value: float, bound: float, below: bool = True, **detail: Any) -> Criterion:
    ok = value < bound if below else value > bound
    return Criterion(name=name, estimate=float(value), predicted=float(bound), z=None, passed=bool(ok), detail=dict(detail))


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> Tuple[float, float]:
    """Least-squares slope of log y against log x and its standard error."""
    fit = stats.linregress(np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float)))
    return float(fit.slope), float(fit.stderr)


def all_passed(criteria: Sequence[Criterion]) -> bool:
    return all(c.passed for c in criteria)
