from __future__ import annotations

import math

import numpy as np
import pytest

from src.errors import ConfigError, LabError, ReplicaShortfallError
from src.experiments.config import parse_config
from src.experiments.estimators import (
    all_passed,
    batch_means,
    bound_criterion,
    covariance_estimate,
    covariance_report,
    loglog_slope,
    n_batches,
    standardized_cumulants,
    tolerance_criterion,
    z_score,
)
from src.experiments.runner import make_manifest, run_replicas
from src.utils.config import ConfigSource


def _square(replica: int) -> float:
    return float(replica * replica)


def _fail_on_three(replica: int) -> float:
    if replica == 3:
        raise LabError("replica three diverged")
    return float(replica)


# ---------------------------------------------------------------- estimators


def test_z_score_edge_cases():
    assert z_score(1.0, 0.5, 0.25) == pytest.approx(2.0)
    assert z_score(1.0, 0.5, 0.3, 0.4) == pytest.approx(1.0)
    assert z_score(1.0, 1.0, 0.0) == 0.0
    assert z_score(2.0, 1.0, 0.0) == math.inf


def test_batch_count():
    assert n_batches(100) == 10
    assert n_batches(3) == 2
    assert n_batches(50, 7) == 7
    with pytest.raises(ValueError):
        batch_means([1.0])


def test_covariance_estimate_matches_numpy():
    rng = np.random.default_rng(0)
    x = rng.standard_normal(400)
    y = 0.5 * x + rng.standard_normal(400)
    est, err = covariance_estimate(x, y)
    assert est == pytest.approx(np.cov(x, y)[0, 1], rel=1e-12)
    assert err > 0
    with pytest.raises(ValueError):
        covariance_estimate(x, y[:10])


def test_covariance_report_criterion():
    rng = np.random.default_rng(1)
    x = rng.standard_normal(900)
    rep = covariance_report(x, x, predicted=1.0)
    c = rep.criterion("Var(x)")
    assert c.passed
    assert c.detail["M"] == 900
    assert set(rep.to_row()) == {"estimate", "stderr", "M", "predicted", "quad_err", "z"}


def test_standardized_cumulants_of_gaussian():
    rng = np.random.default_rng(2)
    out = standardized_cumulants(rng.standard_normal(2000), n_resamples=200)
    for name in ("skewness", "excess_kurtosis"):
        value, err = out[name]
        assert abs(value) < 4.0 * err + 0.05


def test_simple_criteria():
    assert tolerance_criterion("identity", 1e-12, 1e-10).passed
    assert not bound_criterion("decorrelation", 0.3, 0.1).passed
    assert bound_criterion("correlation", 0.8, 0.5, below=False).passed
    assert not all_passed([tolerance_criterion("a", 0.0, 1.0), tolerance_criterion("b", 2.0, 1.0)])


def test_loglog_slope_of_power_law():
    x = np.geomspace(1e-3, 1.0, 6)
    slope, err = loglog_slope(x, 3.0 * x ** 1.5)
    assert slope == pytest.approx(1.5)
    assert err == pytest.approx(0.0, abs=1e-10)


# ---------------------------------------------------------------- runner


def test_run_replicas_in_order():
    batch = run_replicas(_square, 6)
    assert batch.indices == list(range(6))
    assert batch.values == [0.0, 1.0, 4.0, 9.0, 16.0, 25.0]
    assert batch.excluded == 0


def test_run_replicas_thread_count_invariant():
    a = run_replicas(_square, 8, threads=1)
    b = run_replicas(_square, 8, threads=2)
    assert a.values == b.values


def test_failed_replica_is_excluded():
    seen = []
    batch = run_replicas(_fail_on_three, 5, progress_cb=lambda stage, pct, extra: seen.append(pct))
    assert batch.indices == [0, 1, 2, 4]
    assert batch.excluded == 1
    assert "diverged" in batch.failures[3]
    assert seen[-1] == pytest.approx(100.0)


def test_replica_shortfall_names_the_failures():
    batch = run_replicas(_fail_on_three, 4)
    batch.require(3, "girko")
    with pytest.raises(ReplicaShortfallError) as info:
        batch.require(4, "girko")
    assert info.value.usable == 3
    assert "LabError" in str(info.value)


def test_manifest_hash_is_stable():
    a = make_manifest("covariance", 3, {"N": 16, "v": 0.5j})
    b = make_manifest("covariance", 3, {"v": 0.5j, "N": 16})
    assert a.config_hash == b.config_hash
    assert "timestamp" not in a.to_json(with_timestamp=False)
    assert "timestamp" in a.to_json()


# ---------------------------------------------------------------- configuration


BASE = """experiment = "covariance"
seed = 5
replicas = 40

[ensemble]
N = 32
distribution = "two-radius-mixture"
kappa4 = 0.5

[[functions]]
id = "b"
kind = "bump"
center = [0.1, -0.2]
width = 0.3

[[pairs]]
f = "b"
g = "b"
t = 0.2
"""


def test_parse_full_config():
    cfg = parse_config(BASE)
    assert cfg.seed == 5
    assert cfg.ensemble.N == 32
    assert cfg.ensemble.entry_distribution().fourth_cumulant == pytest.approx(0.5)
    assert cfg.functions[0].center == complex(0.1, -0.2)
    assert cfg.pairs[0].s == 0.0
    assert cfg.function("b").center == complex(0.1, -0.2)
    with pytest.raises(KeyError):
        cfg.function("nope")


def test_overrides_win():
    cfg = parse_config(BASE, seed=9, replicas=None, out="elsewhere")
    assert cfg.seed == 9
    assert cfg.replicas == 40
    assert cfg.output.dir == "elsewhere"


def test_unknown_key_reports_line():
    text = 'experiment = "covariance"\nseed = 1\nbogus = 3\n'
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert exc.value.field == "bogus"
    assert exc.value.line == 3


def test_nested_errors():
    with pytest.raises(ConfigError) as exc:
        parse_config('experiment = "girko"\n[ensemble]\nNx = 4\n')
    assert exc.value.field == "ensemble.Nx"
    assert exc.value.line == 3
    with pytest.raises(ConfigError) as exc:
        parse_config('experiment = "girko"\n[ensemble]\nN = 1\n')
    assert exc.value.field == "ensemble"


def test_type_errors():
    with pytest.raises(ConfigError):
        parse_config('experiment = "covariance"\nreplicas = "many"\n')
    with pytest.raises(ConfigError):
        parse_config('experiment = "overlaps"\n[overlaps]\nv = [1.0, 2.0, 3.0]\n')


def test_undefined_function_reference():
    text = BASE.replace('g = "b"', 'g = "missing"')
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert "missing" in str(exc.value)


def test_malformed_toml():
    with pytest.raises(ConfigError) as exc:
        parse_config('experiment = "covariance"\nseed = = 1\n')
    assert exc.value.line == 2


def test_unknown_experiment():
    with pytest.raises(ConfigError):
        parse_config('experiment = "spectral-gap"\n')


def test_line_lookup_on_array_tables():
    src = ConfigSource(text=BASE)
    assert src.line_of("functions[0]") == BASE.splitlines().index("[[functions]]") + 1
    assert src.line_of("ensemble.kappa4") == BASE.splitlines().index("kappa4 = 0.5") + 1
