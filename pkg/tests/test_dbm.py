from __future__ import annotations

import math

import numpy as np
import pytest

from src.dbm.drivers import (
    DriverSpec,
    coupled_from_cross_bracket,
    drivers_for,
    independent_driver,
    make_coupled_drivers,
    mixing_weights,
)
from src.dbm.experiments import (
    coupling_gap_experiment,
    gap_summary,
    hard_edge_density,
    hard_edge_universality_experiment,
    interpolated_driver,
    interpolation_tangent,
    relaxation_envelope,
    relaxation_experiment,
)
from src.dbm.initial_data import perturbed_quantiles, semicircle_quantiles
from src.dbm.local_law import lattice, local_law_check
from src.dbm.matrix_route import (
    RouteComparison,
    matrix_flow_singular_values,
    overlap_cross_bracket,
    overlap_induced_drivers,
    sde_vs_matrix,
)
from src.dbm.observable import advection_scaling, observable_f
from src.dbm.particles import (
    ParticleConfiguration,
    drift,
    empirical_stieltjes,
    interaction_drift,
    is_ordered,
    mirror_solve,
    neighbor_gaps,
    symmetric_full,
)
from src.dbm.propagator import generator_matrix, propagate, propagator_properties, tangential_operator
from src.dbm.simulate import DBMSimConfig, realized_bracket, simulate_coupled, simulate_dbm, step_admissible
from src.errors import ReplicaShortfallError
from src.sampling.distributions import EntryDistribution
from src.sampling.rng import replica_generator
from src.theory.free_convolution import SemicircleTransform


X4 = np.array([0.1, 0.4, 0.9, 1.5])


# ---------------------------------------------------------------- particles


def test_configuration_rejects_unordered():
    with pytest.raises(ValueError):
        ParticleConfiguration(np.array([0.3, 0.2]))
    with pytest.raises(ValueError):
        ParticleConfiguration(np.array([-0.1, 0.2]))
    assert ParticleConfiguration(X4).full().tolist() == [-1.5, -0.9, -0.4, -0.1, 0.1, 0.4, 0.9, 1.5]


def test_drift_matches_full_sum():
    full = symmetric_full(X4)
    N = X4.size
    expected = []
    for i in range(N, 2 * N):
        others = np.delete(full, i)
        expected.append(np.sum(1.0 / (full[i] - others)) / (2.0 * N))
    np.testing.assert_allclose(drift(X4), expected, rtol=1e-12)


def test_neighbor_gaps_use_mirror():
    gaps = neighbor_gaps(X4)
    np.testing.assert_allclose(gaps, [0.2, 0.3, 0.5, 0.6])


def test_interaction_drift_drops_mirror_term():
    np.testing.assert_allclose(drift(X4) - interaction_drift(X4), 0.25 / (X4.size * X4), rtol=1e-12)
    # stays bounded as the first particle approaches the origin
    x = np.array([1e-12, 0.5, 1.0])
    assert np.all(np.abs(interaction_drift(x)) < 10.0)


def test_mirror_solve_positive_and_increasing():
    a = np.array([-1.0, -1e-3, 0.0, 1e-3, 0.5])
    h, N = 1e-3, 2
    y = mirror_solve(a, h, N)
    assert np.all(y > 0)
    assert np.all(np.diff(y) > 0)
    np.testing.assert_allclose(y, a + h / (4 * N * y), rtol=1e-9, atol=1e-15)


def test_empirical_stieltjes_full_average():
    w = 0.2 + 0.3j
    full = symmetric_full(X4)
    assert empirical_stieltjes(X4, w) == pytest.approx(np.mean(1.0 / (full - w)))


# ---------------------------------------------------------------- drivers


def test_coupled_driver_brackets():
    N, K, eps, rate = 6, 3, 0.4, 0.7
    ds, dr = make_coupled_drivers(N, K, eps, rate)
    np.testing.assert_allclose(ds.bracket_rates(), rate)
    np.testing.assert_allclose(dr.bracket_rates(), rate)
    cross = np.diag(ds.mixing @ dr.mixing.T)
    e = mixing_weights(N, K, eps)
    np.testing.assert_allclose(cross, rate * np.sqrt(1.0 - e * e))
    # beyond K the motions are independent
    assert np.all(cross[K:] == 0.0)


def test_cross_bracket_drivers():
    C = np.array([[0.5, 0.1, 0.0], [0.0, 0.3, 0.2], [0.1, 0.0, 0.4]])
    ds, dr = coupled_from_cross_bracket(C)
    np.testing.assert_allclose(ds.mixing @ dr.mixing.T, C, atol=1e-10)
    np.testing.assert_allclose(dr.mixing @ dr.mixing.T, np.eye(3), atol=1e-10)


def test_driver_spec_validation():
    with pytest.raises(ValueError):
        DriverSpec(kind="bogus")
    with pytest.raises(ValueError):
        DriverSpec(eps=1.5)
    with pytest.raises(ValueError):
        drivers_for(DriverSpec(kind="overlap-induced"), 4)
    ds, dr = drivers_for(DriverSpec(kind="independent"), 4)
    assert np.allclose(ds.mixing @ dr.mixing.T, 0.0)


def test_interpolated_driver_endpoints():
    ds, dr = make_coupled_drivers(4, 2, 0.5)
    np.testing.assert_allclose(interpolated_driver(ds, dr, 1.0).mixing, ds.mixing)
    np.testing.assert_allclose(interpolated_driver(ds, dr, 0.0).mixing, dr.mixing)
    with pytest.raises(ValueError):
        interpolated_driver(ds, independent_driver(4), 0.5)


# ---------------------------------------------------------------- simulation


def test_sim_config_validation():
    with pytest.raises(ValueError):
        DBMSimConfig(N=4, dt=0.0)
    with pytest.raises(ValueError):
        DBMSimConfig(N=4, guard=0.8)


def test_simulation_keeps_order_and_is_deterministic():
    init = semicircle_quantiles(8).particles
    cfg = DBMSimConfig(N=8, dt=1e-3, T=0.05)
    times = [0.01, 0.05]
    a = simulate_dbm(init, independent_driver(8), cfg, times, rng=replica_generator(3, 0, 3))
    b = simulate_dbm(init, independent_driver(8), cfg, times, rng=replica_generator(3, 0, 3))
    assert all(is_ordered(x) for x in a.states)
    np.testing.assert_array_equal(a.final, b.final)
    np.testing.assert_array_equal(a.at(0.01), b.at(0.01))
    with pytest.raises(KeyError):
        a.at(0.02)


def test_fully_coupled_paths_coincide():
    init = semicircle_quantiles(8).particles
    ds, dr = make_coupled_drivers(8, 8, 0.0)
    cfg = DBMSimConfig(N=8, dt=1e-3, T=0.03)
    s, r = simulate_coupled([init, init], [ds, dr], cfg, rng=replica_generator(0, 1, 3))
    np.testing.assert_allclose(s.final, r.final, atol=1e-14)


def test_realized_bracket_tracks_time():
    init = semicircle_quantiles(8).particles
    cfg = DBMSimConfig(N=8, dt=1e-3, T=0.5, record_increments=True)
    traj = simulate_dbm(init, independent_driver(8), cfg, rng=replica_generator(5, 0, 3))
    elapsed, qv = realized_bracket(traj.increments)
    assert elapsed == pytest.approx(0.5)
    assert np.mean(qv) / elapsed == pytest.approx(1.0, abs=0.2)


def test_simulation_size_mismatch():
    init = semicircle_quantiles(4).particles
    with pytest.raises(ValueError):
        simulate_dbm(init, independent_driver(5), DBMSimConfig(N=4, T=0.01))


def test_step_admissibility():
    x = np.array([0.5, 1.0])
    no_drift = np.zeros(2)
    assert step_admissible(x, np.array([0.52, 1.01]), no_drift, 0.4)
    # the gap halves within one step
    assert not step_admissible(x, np.array([0.7, 0.95]), no_drift, 0.4)
    assert not step_admissible(x, np.array([1.1, 1.0]), no_drift, 0.4)
    # drift displacement larger than 0.4 x gap
    assert not step_admissible(x, x, np.array([-0.3, 0.3]), 0.4)
    assert step_admissible(np.array([0.3]), np.array([1e-9]), np.zeros(1), 0.4)


def test_single_particle_stays_positive():
    init = ParticleConfiguration(np.array([0.5]))
    cfg = DBMSimConfig(N=1, dt=1e-3, T=1.0)
    for seed in range(50):
        traj = simulate_dbm(init, independent_driver(1), cfg, rng=replica_generator(seed, 0, 3))
        assert traj.final[0] > 0
        assert traj.halvings == 0


@pytest.mark.slow
def test_single_particle_positive_over_many_seeds():
    init = semicircle_quantiles(1).particles
    cfg = DBMSimConfig(N=1, dt=1e-3, T=1.0)
    for seed in range(1000):
        traj = simulate_dbm(init, independent_driver(1), cfg, rng=replica_generator(seed, 0, 3))
        assert traj.final[0] > 0


def test_brownian_runs_complete_at_small_n():
    init = semicircle_quantiles(8).particles
    cfg = DBMSimConfig(N=8, dt=1e-3, T=0.5)
    for seed in range(10):
        traj = simulate_dbm(init, independent_driver(8), cfg, rng=replica_generator(seed, 0, 3))
        assert is_ordered(traj.final)


@pytest.mark.slow
@pytest.mark.parametrize("N", [32, 64])
def test_brownian_runs_complete_at_route_sizes(N):
    init = semicircle_quantiles(N).particles
    cfg = DBMSimConfig(N=N, dt=1e-4, T=0.5)
    for seed in range(5):
        traj = simulate_dbm(init, independent_driver(N), cfg, rng=replica_generator(seed, 0, 3))
        assert is_ordered(traj.final)
        # the spectrum spreads by the semicircle scale, it does not collapse
        assert np.min(np.diff(traj.final)) > 1e-6


# ---------------------------------------------------------------- initial data and local law


def test_lattice_contains_imaginary_axis():
    pts = lattice(256, nu=0.05)
    assert np.any(pts.real == 0.0)
    assert np.all(np.abs(pts.real) <= 0.5 + 1e-12)
    with pytest.raises(ValueError):
        lattice(4, nu=0.5)


def test_semicircle_quantiles_are_regular():
    data = semicircle_quantiles(64)
    assert data.N == 64
    x = data.particles.x
    assert x[-1] < 2.0
    report = data.verify([0.3j, 0.5 + 0.2j, -0.8 + 0.5j, 1.0j])
    assert report.ok
    bounds = data.reference_bounds([0.3j, 0.5 + 0.2j])
    assert bounds["min_im"] > 0


def test_local_law_flags_wrong_reference():
    x = semicircle_quantiles(64).particles
    wide = SemicircleTransform(4.0)
    report = local_law_check(x, wide, [0.1j, 0.2j], phi=1.0)
    assert not report.ok
    assert report.worst_point is not None


def test_perturbed_quantiles():
    data = perturbed_quantiles(64, amp=1.0)
    assert is_ordered(data.particles.x)
    assert not np.allclose(data.particles.x, semicircle_quantiles(64).particles.x)
    with pytest.raises(ValueError):
        perturbed_quantiles(4, amp=1.0)


# ---------------------------------------------------------------- propagator and observable


def test_propagator_identity_and_mass():
    full = symmetric_full(X4)
    np.testing.assert_array_equal(propagate(full, 0.0), np.eye(8))
    np.testing.assert_allclose(generator_matrix(full).sum(axis=1), 0.0, atol=1e-10)
    with pytest.raises(ValueError):
        propagate(full, -1.0)


def test_propagator_sign_and_mass():
    report = propagator_properties(semicircle_quantiles(16).particles, 0.05)
    assert report.sign_ok
    assert report.mass_ok
    assert report.to_json()["steps"] >= 1


def test_tangential_operator_matches_full_generator():
    v = np.array([0.2, -0.1, 0.5, 0.3])
    out = tangential_operator(X4, v)
    full = generator_matrix(symmetric_full(X4)) @ symmetric_full(v)
    np.testing.assert_allclose(out, full[4:])
    # the mirror half is antisymmetric too
    np.testing.assert_allclose(full[:4], -full[4:][::-1], atol=1e-12)


def test_observable_requires_complex_point():
    with pytest.raises(ValueError):
        observable_f(X4, X4, 0.5)
    z = 0.3 + 0.4j
    full_x, full_v = symmetric_full(X4), symmetric_full(X4)
    assert observable_f(X4, X4, z) == pytest.approx(np.sum(full_v / (full_x - z)))


def test_advection_residual_is_higher_order():
    x = semicircle_quantiles(16).particles.x
    res = advection_scaling(x, 0.3 + 0.5j, np.geomspace(1e-5, 1e-3, 4), replicas=200, seed=1)
    assert res.slope > 1.2
    assert len(res.to_rows()) == 4


# ---------------------------------------------------------------- experiments


def test_relaxation_envelope():
    assert relaxation_envelope(2, 100, 0.01) == pytest.approx(0.02 * (1.0 + 0.02))
    assert relaxation_envelope(2, 100, 0.01, index_factor=False) == pytest.approx(1.02)


def test_coupling_gaps_shrink_with_coupling():
    init = semicircle_quantiles(8)
    coupled = coupling_gap_experiment(init, K=8, eps=0.1, t_grid=[0.02], replicas=8, seed=2, dt=1e-3, i_max=3)
    free = coupling_gap_experiment(init, K=0, eps=1.0, t_grid=[0.02], replicas=8, seed=2, dt=1e-3, i_max=3)
    assert coupled.gaps.shape == (8, 1, 3)
    assert coupled.scaled_median(1) < free.scaled_median(1)
    summary = gap_summary(coupled, free)
    assert "baseline_median_scaled_gap_3" in summary
    assert len(coupled.to_rows()) == 3


def test_empty_replica_tables_raise():
    init = semicircle_quantiles(8)
    with pytest.raises(ReplicaShortfallError):
        coupling_gap_experiment(init, K=8, eps=0.1, t_grid=[0.02], replicas=0, dt=1e-3)
    with pytest.raises(ReplicaShortfallError):
        relaxation_experiment(init, perturbed_quantiles(8, amp=0.5), [0.01, 0.02], replicas=0, dt=1e-3)


def test_interpolation_tangent_zero_for_equal_drivers():
    init = semicircle_quantiles(6).particles
    d = independent_driver(6)
    tangent = interpolation_tangent(init, d, d, 0.5, t=0.01, dt=1e-3)
    np.testing.assert_allclose(tangent, 0.0, atol=1e-8)


def test_hard_edge_density_at_origin():
    # symmetrized singular-value density of a Ginibre matrix at 0 is 1/pi for z = 0
    assert hard_edge_density(0.0) == pytest.approx(1.0 / math.pi, rel=1e-6)


def test_hard_edge_validation():
    dist = EntryDistribution("complex-gaussian")
    with pytest.raises(ValueError):
        hard_edge_universality_experiment(dist, [1.2], 0.5, 4, 8)
    with pytest.raises(ValueError):
        hard_edge_universality_experiment(dist, [0.2], 1.0, 4, 8)
    with pytest.raises(ValueError):
        hard_edge_universality_experiment(dist, [], 0.5, 4, 8)


def test_hard_edge_small_run():
    dist = EntryDistribution("uniform-modulus-phase")
    report = hard_edge_universality_experiment(dist, [0.0, 0.3], 0.3, replicas=6, N=8, seed=4)
    assert report.flow.shape == (6, 2)
    assert np.all(report.flow > 0)
    assert len(report.to_rows()) == 2
    assert report.correlation(0, 0) == pytest.approx(1.0)


# ---------------------------------------------------------------- matrix route


def test_overlap_bracket_is_identity_at_equal_points(ginibre):
    X = ginibre(6)
    C = overlap_cross_bracket(X, 0.2 + 0.1j, 0.2 + 0.1j)
    np.testing.assert_allclose(C, np.eye(6), atol=1e-8)
    ds, dr = overlap_induced_drivers(X, 0.2 + 0.1j, 0.2 + 0.1j)
    np.testing.assert_allclose(dr.mixing @ dr.mixing.T, np.eye(6), atol=1e-8)
    np.testing.assert_allclose(ds.mixing @ dr.mixing.T, C, atol=1e-10)


def test_matrix_flow_singular_values(ginibre, rng):
    Y = ginibre(6)
    svs = matrix_flow_singular_values(Y, [0.0, 0.1], 0.3, rng)
    np.testing.assert_allclose(svs[0], np.linalg.svd(Y - 0.3 * np.eye(6), compute_uv=False)[::-1], rtol=1e-8, atol=1e-10)
    assert is_ordered(svs[1])


def test_route_comparison_validates_time():
    with pytest.raises(ValueError):
        sde_vs_matrix(4, t=1.0, replicas=2)


def test_route_comparison_passes_on_ks_distance():
    close = RouteComparison(statistic=0.04, pvalue=0.001, sde=np.zeros(3), matrix=np.zeros(3))
    assert close.passed
    assert not close.pvalue_ok
    far = RouteComparison(statistic=0.2, pvalue=0.5, sde=np.zeros(3), matrix=np.zeros(3))
    assert not far.passed
    assert far.to_json()["ks_limit"] == pytest.approx(0.05)


def test_small_route_comparison():
    route = sde_vs_matrix(4, t=0.1, replicas=12, seed=3, dt=1e-3)
    assert route.sde.shape == route.matrix.shape == (12,)
    assert np.all(route.sde > 0)
    assert route.passed == (route.statistic < 0.05)


def test_relaxation_of_identical_data_is_exact():
    init = semicircle_quantiles(8)
    table = relaxation_experiment(init, init, [0.01, 0.02], replicas=3, seed=1, dt=1e-3, i_max=2)
    assert table.gaps.shape == (3, 2, 2)
    np.testing.assert_array_equal(table.gaps, 0.0)
    assert table.exceedance() == 0.0
    assert len(table.to_rows()) == 4
    with pytest.raises(ValueError):
        relaxation_experiment(init, init, [0.0, 0.01], replicas=1)
    with pytest.raises(ValueError):
        relaxation_experiment(init, semicircle_quantiles(6), [0.01], replicas=1)
