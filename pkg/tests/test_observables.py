from __future__ import annotations

import math

import numpy as np
import pytest

from src.kernels.testfunctions import GaussianBump
from src.linalg.nonhermitian import eigendecompose, eigenvalues
from src.observables.girko import default_thresholds, girko_decompose, girko_grid, trace_at
from src.observables.overlaps import bulk_overlap_ratio, overlap_records
from src.observables.statistics import linear_statistic, linear_statistics, logdet_field, logdet_from_singular_values


def test_linear_statistic_is_uncentered_sum(ginibre):
    X = ginibre(16)
    lam = eigenvalues(X)
    f = GaussianBump(id="b", width=0.3)
    stat = linear_statistic(lam, f, time=0.5)
    assert stat.raw_value == pytest.approx(float(np.sum(np.real(f.value(lam)))))
    assert stat.to_row(3) == {"replica": 3, "time": 0.5, "function_id": "b", "value": stat.raw_value}
    from_spec = linear_statistic(eigendecompose(X), f, time=0.5)
    assert from_spec.raw_value == pytest.approx(stat.raw_value, abs=1e-10)
    assert [s.function_id for s in linear_statistics(lam, [f, GaussianBump(id="c")])] == ["b", "c"]


def test_logdet_field_matches_slogdet(ginibre):
    X = ginibre(12)
    points = [0j, 0.4 + 0.1j, -0.2j]
    out = logdet_field(X, points)
    for z, d in zip(points, out):
        assert not d.singular
        assert d.value == pytest.approx(np.linalg.slogdet(X - z * np.eye(12))[1], abs=1e-10)
        assert logdet_from_singular_values(X, z) == pytest.approx(d.value, abs=1e-8)


def test_logdet_field_flags_exact_eigenvalue():
    X = np.diag([0.5, -0.5, 0.25j]).astype(complex)
    out = logdet_field(X, [0.5, 0.1])
    assert out[0].singular and out[0].value == -math.inf
    assert not out[1].singular
    with pytest.raises(ValueError):
        logdet_field(X, [complex(math.inf, 0)])


def test_girko_split_sums_to_linear_statistic(ginibre):
    X = ginibre(8)
    f = GaussianBump(id="b", width=0.2)
    eta0, eta_c, T = default_thresholds(8)
    split = girko_decompose(X, f, eta0, eta_c, T, grid=girko_grid(f, 160))
    expected = float(np.sum(np.real(f.value(eigenvalues(X)))))
    assert split.total == pytest.approx(expected, abs=2e-2)
    row = split.to_row()
    assert row["total"] == pytest.approx(split.total)
    assert row["eta0"] < row["eta_c"] < row["T"]


def test_girko_rejects_unordered_thresholds(ginibre):
    with pytest.raises(ValueError):
        girko_decompose(ginibre(4), GaussianBump(), 0.1, 0.01, 10.0)


def test_default_thresholds():
    eta0, eta_c, T = default_thresholds(100, 0.1, 0.2, 10.0)
    assert eta0 == pytest.approx(100 ** -1.1)
    assert eta_c == pytest.approx(100 ** -0.8)
    assert T == pytest.approx(1e20)


def test_trace_at_formula(ginibre):
    X = ginibre(10)
    z, eta = 0.2 + 0.1j, 0.05
    s = np.linalg.svd(X - z * np.eye(10), compute_uv=False)
    assert trace_at(X, z, eta) == pytest.approx(np.mean(eta / (s ** 2 + eta ** 2)), rel=1e-8)


def test_normal_matrix_has_unit_overlaps():
    lam = np.array([0.1, -0.3j, 0.4 + 0.2j, 0.7])
    rng = np.random.default_rng(0)
    Q, _ = np.linalg.qr(rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4)))
    X = Q @ np.diag(lam) @ Q.conj().T
    records, excluded = overlap_records(eigendecompose(X))
    assert excluded == 0
    np.testing.assert_allclose([r.overlap for r in records], 1.0, atol=1e-8)
    o, c = bulk_overlap_ratio(records, N=4, radius=0.5)
    assert o == pytest.approx(0.25)
    assert c == pytest.approx(np.mean([1 - 0.01, 1 - 0.09, 1 - 0.2]))


def test_non_normal_overlaps_exceed_one():
    X = np.array([[0.1, 1.0], [0.0, -0.1]], dtype=complex)
    records, _ = overlap_records(eigendecompose(X))
    assert all(r.overlap > 1.0 for r in records)


def test_bulk_ratio_empty_window():
    o, c = bulk_overlap_ratio([], N=4)
    assert math.isnan(o) and math.isnan(c)
