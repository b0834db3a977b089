from __future__ import annotations

import math

import numpy as np
import pytest

from src.sampling.distributions import (
    COMPLEX_GAUSSIAN,
    FOUR_POINT,
    TWO_RADIUS,
    UNIFORM_PHASE,
    EntryDistribution,
    kappa4_at_time,
    make_distribution,
)
from src.sampling.ensembles import MatrixEnsembleConfig, TimeGrid, evolve_ou, sample_iid_matrix, sample_trajectory
from src.sampling.rng import replica_generator


@pytest.mark.parametrize(
    "kind,kappa4",
    [(COMPLEX_GAUSSIAN, None), (UNIFORM_PHASE, None), (FOUR_POINT, None), (TWO_RADIUS, 1.5), (TWO_RADIUS, -0.5)],
)
def test_entry_moments(kind, kappa4):
    dist = make_distribution(kind, kappa4)
    chi = dist.sample(replica_generator(1, 0, 0), 200_000)
    assert abs(chi.mean()) < 0.01
    assert abs(np.mean(np.abs(chi) ** 2) - 1.0) < 0.02
    assert abs(np.mean(chi ** 2)) < 0.01
    k4 = np.mean(np.abs(chi) ** 4) - 2.0
    assert abs(k4 - dist.fourth_cumulant) < 0.1


def test_two_radius_rejects_kappa_below_minus_one():
    with pytest.raises(ValueError):
        EntryDistribution(TWO_RADIUS, {"kappa4": -1.5})
    with pytest.raises(ValueError):
        EntryDistribution(COMPLEX_GAUSSIAN, {"kappa4": 0.3})


def test_kappa4_decays_along_flow():
    dist = make_distribution(FOUR_POINT)
    assert kappa4_at_time(dist, 0.0) == -1.0
    assert kappa4_at_time(dist, 1.0) == pytest.approx(-math.exp(-2.0))
    with pytest.raises(ValueError):
        kappa4_at_time(dist, -0.1)


def test_replica_streams_are_pure():
    a = replica_generator(7, 3, 1).standard_normal(5)
    b = replica_generator(7, 3, 1).standard_normal(5)
    c = replica_generator(7, 4, 1).standard_normal(5)
    d = replica_generator(7, 3, 2).standard_normal(5)
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c)
    assert not np.allclose(a, d)
    with pytest.raises(ValueError):
        replica_generator(7, -1)


def test_iid_matrix_is_deterministic_per_replica():
    cfg = MatrixEnsembleConfig(N=16, distribution=make_distribution(UNIFORM_PHASE), seed=99)
    X1 = sample_iid_matrix(cfg, replica=2)
    X2 = sample_iid_matrix(cfg, replica=2)
    np.testing.assert_array_equal(X1, X2)
    np.testing.assert_allclose(np.abs(X1), 1.0 / 4.0)


def test_ensemble_config_validation():
    with pytest.raises(ValueError):
        MatrixEnsembleConfig(N=1)
    with pytest.raises(ValueError):
        MatrixEnsembleConfig(N=4, seed=-1)


def test_evolve_ou_zero_step_is_identity(ginibre):
    X = ginibre(8)
    np.testing.assert_array_equal(evolve_ou(X, 0.0, 1), X)
    with pytest.raises(ValueError):
        evolve_ou(X, -0.1, 1)


def test_ou_preserves_ginibre_second_moment():
    N = 64
    X = np.zeros((N, N), dtype=complex)
    Y = evolve_ou(X, 50.0, replica_generator(3, 0, 1))
    assert np.mean(np.abs(Y) ** 2) * N == pytest.approx(1.0, abs=0.05)


def test_ou_transition_covariance():
    # E[x_t conj(x_0)] = e^{-t/2} E|x_0|^2 entrywise
    N, t = 32, 0.4
    X0 = sample_iid_matrix(MatrixEnsembleConfig(N=N, seed=5))
    Xt = evolve_ou(X0, t, replica_generator(5, 0, 1))
    corr = np.sum(Xt * np.conj(X0)).real / np.sum(np.abs(X0) ** 2)
    assert corr == pytest.approx(math.exp(-t / 2.0), abs=0.05)


def test_time_grid_validation():
    with pytest.raises(ValueError):
        TimeGrid([])
    with pytest.raises(ValueError):
        TimeGrid([0.2, 0.1])
    with pytest.raises(ValueError):
        TimeGrid([-0.1, 0.1])
    assert len(TimeGrid([0, 0.5, 1])) == 3


def test_trajectory_chains_transitions(ginibre):
    X0 = ginibre(8)
    traj = sample_trajectory(X0, TimeGrid([0.0, 0.1, 0.3]), replica_generator(1, 0, 1))
    np.testing.assert_array_equal(traj.at(0.0), X0)
    assert traj.at(0.3).shape == (8, 8)
    with pytest.raises(KeyError):
        traj.at(0.2)
