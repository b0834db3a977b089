from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.errors import CharacteristicsError, StieltjesBoundError
from src.sampling.ensembles import sample_ginibre
from src.sampling.rng import replica_generator
from src.theory.characteristics import (
    characteristics_forward,
    characteristics_pullback,
    integrate_characteristic,
)
from src.theory.free_convolution import (
    ConvolvedTransform,
    DiracTransform,
    EmpiricalTransform,
    FreeConvolutionModel,
    HermitizationTransform,
    SemicircleTransform,
    density_at,
    free_convolve,
    semicircle_convolution,
    subordination_point,
)
from src.theory.selfconsistent import E1, E2, cubic_roots, deterministic_M, ntr, residual, solve_mz, solve_mz_general
from src.theory.stieltjes import default_sample_points, stieltjes_bounds_check
from src.theory.two_resolvent import chiral_pair_closed_form, chiral_pair_sum, stability_matrix, two_resolvent_M


def test_cubic_roots():
    roots = sorted(cubic_roots(1.0, -6.0, 11.0, -6.0), key=lambda r: r.real)
    np.testing.assert_allclose(roots, [1.0, 2.0, 3.0], atol=1e-10)
    with pytest.raises(ValueError):
        cubic_roots(0.0, 1.0, 1.0, 1.0)


@settings(max_examples=40, deadline=None)
@given(
    r=st.floats(0.0, 2.0),
    phase=st.floats(0.0, 2 * math.pi),
    eta=st.floats(1e-4, 10.0),
)
def test_solve_mz_branch(r, phase, eta):
    z = r * complex(math.cos(phase), math.sin(phase))
    pt = solve_mz(z, eta)
    assert pt.m.real == 0.0
    assert pt.m.imag > 0
    assert 0 < pt.u.real <= 1.0
    assert residual(pt.m, z, eta) <= 1e-12


def test_solve_mz_small_eta_limits():
    inside = solve_mz(0.3, 1e-9)
    assert inside.m.imag == pytest.approx(math.sqrt(1 - 0.09), abs=1e-6)
    assert solve_mz(0.3, 0.0).m == pytest.approx(1j * math.sqrt(0.91))
    outside = solve_mz(1.5, 1e-9)
    assert outside.m.imag < 1e-6
    assert solve_mz(1.5, 0.0).u == pytest.approx(1 / 2.25)
    with pytest.raises(ValueError):
        solve_mz(0.3, -1.0)


def test_general_branch_matches_imaginary_axis():
    for z, eta in [(0.2, 0.1), (0.8j, 0.01), (1.3, 0.5)]:
        assert solve_mz_general(z, 1j * eta) == pytest.approx(solve_mz(z, eta).m, abs=1e-10)
    with pytest.raises(ValueError):
        solve_mz_general(0.2, 0.5 - 0.1j)


def test_deterministic_M_structure():
    M = deterministic_M(0.3 + 0.4j, 0.2)
    pt = solve_mz(0.3 + 0.4j, 0.2)
    assert M[0, 0] == M[1, 1] == pt.m
    assert M[0, 1] == pytest.approx(-(0.3 + 0.4j) * pt.u)


@pytest.mark.parametrize("z_t,eta_t,t", [(0.2, 0.05, 0.3), (0.5 + 0.5j, 0.01, 1.0), (1.4, 0.2, 0.5)])
def test_pullback_then_forward(z_t, eta_t, t):
    z0, eta0 = characteristics_pullback(z_t, eta_t, t)
    assert z0 == pytest.approx(math.exp(t / 2) * z_t)
    z_back, eta_back = characteristics_forward(z0, eta0, t)
    assert z_back == pytest.approx(z_t)
    assert eta_back == pytest.approx(eta_t, rel=1e-8)


def test_characteristic_ode_agrees_with_closed_form():
    z0, eta0, t = 0.3 + 0.1j, 0.4, 0.2
    z_t, eta_t = characteristics_forward(z0, eta0, t)
    state = integrate_characteristic(z0, eta0, t, step=1e-3)
    assert state.z == pytest.approx(z_t, abs=1e-8)
    assert state.eta == pytest.approx(eta_t, abs=1e-7)


def test_forward_reports_crossing_time():
    with pytest.raises(CharacteristicsError) as info:
        characteristics_forward(0.1, 1e-4, 1.0)
    assert 0.0 < info.value.crossing_time < 1.0


def test_semicircle_convolution_closed_form():
    model = FreeConvolutionModel(SemicircleTransform(1.0), 0.5)
    target = semicircle_convolution(1.0, 0.5)
    for w in (0.3 + 0.5j, -1.7 + 0.2j, 4.0 + 1.0j):
        assert free_convolve(model, w) == pytest.approx(target(w), abs=1e-9)
        u = subordination_point(model, w)
        assert model.in_domain(u)


def test_dirac_flows_to_semicircle():
    model = FreeConvolutionModel(DiracTransform(), 2.0)
    assert free_convolve(model, 0.5 + 0.3j) == pytest.approx(SemicircleTransform(2.0)(0.5 + 0.3j), abs=1e-9)


def test_density_at_semicircle_centre():
    model = FreeConvolutionModel(SemicircleTransform(1.0), 1.0)
    assert density_at(model, 0.0) == pytest.approx(1.0 / (math.pi * math.sqrt(2.0)), abs=1e-4)


def test_zero_time_is_identity():
    m0 = EmpiricalTransform([-1.0, 0.0, 2.0])
    model = FreeConvolutionModel(m0, 0.0)
    assert free_convolve(model, 0.1 + 0.2j) == m0(0.1 + 0.2j)
    with pytest.raises(ValueError):
        FreeConvolutionModel(m0, -0.1)


def test_convolved_transform_support():
    conv = ConvolvedTransform(FreeConvolutionModel(SemicircleTransform(1.0), 0.25))
    assert conv.support() == pytest.approx((-3.0, 3.0))
    assert conv(0.2 + 0.4j) == pytest.approx(SemicircleTransform(1.25)(0.2 + 0.4j), abs=1e-9)


def test_hermitization_transform_solves_cubic():
    h = HermitizationTransform(0.5)
    w = 0.3 + 0.2j
    m = h(w)
    assert m.imag > 0
    assert abs(m ** 3 + 2 * w * m ** 2 + (w * w + 1 - 0.25) * m + w) < 1e-10
    num = (h(w + 1e-6) - h(w - 1e-6)) / 2e-6
    assert h.derivative(w) == pytest.approx(num, rel=1e-5)


def test_stieltjes_bounds_hold_for_semicircle():
    sc = SemicircleTransform(1.0)
    report = stieltjes_bounds_check(sc, sc.support(), default_sample_points(sc.support()))
    assert report.ok
    assert report.to_json()["max_modulus_ratio"] <= 1.0 + 1e-9


def test_stieltjes_bounds_flag_a_fake_transform():
    fake = lambda w: -3.0 / w  # noqa: E731
    with pytest.raises(StieltjesBoundError):
        stieltjes_bounds_check(fake, (0.0, 0.0), [1j, 2 + 1j])
    report = stieltjes_bounds_check(fake, (0.0, 0.0), [1j], raise_on_violation=False)
    assert not report.ok
    with pytest.raises(ValueError):
        stieltjes_bounds_check(fake, (0.0, 0.0), [0.5 + 0j])


@pytest.mark.parametrize(
    "z1,eta1,z2,eta2",
    [(0.2, 0.1, 0.5j, 0.2), (0.3 + 0.3j, 0.05, 0.3 - 0.3j, 0.05), (0.6j, 0.3, 0.1, 0.4)],
)
def test_two_resolvent_closed_form(z1, eta1, z2, eta2):
    assert chiral_pair_sum(z1, eta1, z2, eta2) == pytest.approx(chiral_pair_closed_form(z1, eta1, z2, eta2), rel=1e-8)


def test_stability_matrix_is_identity_for_zero_M():
    Z = np.zeros((2, 2), dtype=complex)
    np.testing.assert_allclose(stability_matrix(Z, Z), np.eye(4))


def _hermitized_resolvent(X: np.ndarray, z: complex, eta: float) -> np.ndarray:
    N = X.shape[0]
    Y = X - z * np.eye(N)
    H = np.block([[np.zeros((N, N)), Y], [Y.conj().T, np.zeros((N, N))]])
    return np.linalg.inv(H - 1j * eta * np.eye(2 * N))


@pytest.mark.slow
@pytest.mark.parametrize("z1,z2", [(0.2, 0.5j), (0.3 + 0.3j, 0.3 - 0.3j), (0.0, 0.6)])
def test_two_resolvent_matches_ginibre_average(z1, z2):
    N, samples, eta = 256, 200, 0.2
    values = []
    for r in range(samples):
        X = sample_ginibre(N, replica_generator(17, r, 0))
        G1 = _hermitized_resolvent(X, z1, eta)
        G2 = _hermitized_resolvent(X, z2, eta)
        # <G1 E1 G2 E2> keeps the lower-left block of G1 and the upper-right block of G2
        values.append(np.trace(G1[N:, :N] @ G2[:N, N:]) / (2 * N))
    values = np.asarray(values)
    predicted = ntr(two_resolvent_M(z1, eta, z2, eta, E1) @ E2)
    # complex standard error sqrt((var Re + var Im) / samples)
    stderr = np.std(values, ddof=1) / math.sqrt(samples)
    assert abs(values.mean() - predicted) <= 3.0 * stderr
