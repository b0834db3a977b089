from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import k1

from src.errors import PositivityError
from src.kernels.bessel import bessel_k1, q_hat, x_k1
from src.kernels.covariance import (
    gamma_laplacian_form,
    gamma_macroscopic,
    gamma_mesoscopic,
    gamma_mesoscopic_logform,
    gamma_mesoscopic_qform,
    gamma_theta_form,
    h_half_pairing,
    kappa_at,
    kappa_term,
    kernel_argument,
    kernel_K,
    martingale_variance,
    overlap_corr_prediction,
    static_variance,
    theta_kernel,
    variance_split_prediction,
)
from src.kernels.overlap_decay import integrated_overlap_prediction, overlap_prediction_bruteforce, same_time_pair_prediction
from src.kernels.positivity import psd_gram, semigroup_defect
from src.kernels.selftest import run_selftest
from src.kernels.testfunctions import BoundarySeries, GaussianBump, RadialFourierFunction, build_test_function, rescale_function


DISK_POINTS = st.tuples(st.floats(0.0, 0.95), st.floats(0.0, 2 * math.pi)).map(lambda p: p[0] * complex(math.cos(p[1]), math.sin(p[1])))


@settings(max_examples=50, deadline=None)
@given(z=DISK_POINTS, w=DISK_POINTS, tau=st.floats(0.01, 3.0))
def test_kernel_symmetry(z, w, tau):
    assert kernel_K(z, w, tau) == pytest.approx(kernel_K(w, z, tau), rel=1e-10, abs=1e-12)
    # both points inside: Theta = K / 2
    assert theta_kernel(z, w, tau) == pytest.approx(0.5 * kernel_K(z, w, tau), rel=1e-10, abs=1e-12)


def test_kernel_diagonal_and_argument():
    assert kernel_K(0.3, 0.3, 0.0) == math.inf
    assert kernel_argument(0.0, 0.0, 1.0) == pytest.approx(1 - math.exp(-1.0))
    with pytest.raises(ValueError):
        kernel_argument(0.0, 0.0, -0.1)


def test_theta_outside_regime_is_finite():
    assert math.isfinite(theta_kernel(1.5, 2.0j, 0.3))
    assert math.isfinite(theta_kernel(0.2, 2.0, 0.3))


def test_overlap_corr_prediction():
    assert overlap_corr_prediction(0.1, 0.3, 0.0, 0.5, 0.0) == pytest.approx(1.0 / (0.5 + 0.04) ** 2)
    with pytest.raises(ValueError):
        overlap_corr_prediction(0.1, 0.1, 0.2, 0.2, 0.0)


def test_h_half_pairing():
    f = BoundarySeries(coeffs=np.array([0.0, 1.0, 0.0, 0.5, 0.0]))  # k = -2..2
    assert h_half_pairing(f, f) == pytest.approx(1.0 + 0.25)
    assert h_half_pairing(f, f, tau=2.0) == pytest.approx(math.exp(-1.0) * 1.25)


def test_static_variance_of_bump_is_quarter():
    # (1/4pi) int |grad f|^2 = 1/4 for exp(-|z|^2 / 2 s^2), whatever s
    f = GaussianBump(width=0.1)
    assert static_variance(f, f, resolution=24).value == pytest.approx(0.25, abs=1e-4)


def test_kappa_term_for_interior_bump():
    f = GaussianBump(width=0.1)
    assert f.disk_mean() == pytest.approx(2 * 0.01, rel=1e-4)
    assert kappa_term(f, f, 0.0, -1.0) == pytest.approx(-(0.02 ** 2), rel=1e-3)
    assert kappa_term(f, f, 0.5, 0.0) == 0.0
    assert kappa_at(-1.0, 0.5) == pytest.approx(-math.exp(-1.0))


def test_macroscopic_routes_agree():
    f = GaussianBump(id="f", center=0.1, width=0.08)
    g = GaussianBump(id="g", center=-0.1j, width=0.08, tilt=0.5)
    tau = 0.2
    a = gamma_macroscopic(f, g, tau, resolution=24).value
    b = gamma_laplacian_form(f, g, tau, resolution=24).value
    c = gamma_theta_form(f, g, tau, resolution=24).value
    assert a == pytest.approx(b, rel=1e-3)
    assert a == pytest.approx(c, rel=1e-3)


def test_boundary_term_for_fourier_mode():
    f = RadialFourierFunction(k=2, coeff=1.0, rho0=1.0, width=0.3)
    assert not f.interior
    pred = gamma_macroscopic(f, f, 0.0, resolution=24)
    assert pred.value > 0


def test_mesoscopic_routes_agree():
    f = GaussianBump(id="f", width=0.5)
    g = GaussianBump(id="g", center=0.5, width=0.5)
    q = gamma_mesoscopic_qform(f, g, 0.4, 0.3, resolution=24).value
    lg = gamma_mesoscopic_logform(f, g, 0.4, 0.3, resolution=24).value
    assert q == pytest.approx(lg, rel=1e-4)
    with pytest.raises(ValueError):
        gamma_mesoscopic(f, g, 0.1, 1.0)


def test_variance_split_sums_to_static():
    f = GaussianBump(width=0.15)
    v1, v2 = variance_split_prediction(f, 0.0, 0.1, resolution=24)
    static = static_variance(f, f, resolution=24).value
    assert v1.value + v2.value == pytest.approx(static, rel=1e-3)
    assert v2.value > 0
    with pytest.raises(ValueError):
        variance_split_prediction(f, 0.2, 0.1)


def test_martingale_variance_vanishes_at_zero():
    f = GaussianBump(width=0.15)
    assert martingale_variance(f, 0.0).value == 0.0
    assert martingale_variance(f, 0.1, resolution=24).value > 0


@pytest.mark.parametrize("x", [0.05, 0.5, 1.9, 2.1, 7.0, 16.9, 17.1, 40.0])
def test_bessel_k1_matches_scipy(x):
    assert bessel_k1(x) == pytest.approx(float(k1(x)), rel=1e-7)


def test_q_hat_limits():
    assert x_k1(0.0) == 1.0
    assert q_hat(0.0, 3.0) == 1.0
    assert q_hat(1.0, 0.0) == 1.0
    with pytest.raises(ValueError):
        bessel_k1(0.0)


def test_semigroup_defect_is_positive():
    # q_r does not form a semigroup: the product of transforms differs from the transform at r1 + r2
    assert semigroup_defect(0.5, 0.5) > 1e-3
    assert semigroup_defect(0.0, 0.5) == pytest.approx(0.0, abs=1e-12)


def test_gram_matrix_is_psd():
    fs = [GaussianBump(id=f"b{i}", center=0.3 * i, width=0.4) for i in range(3)]
    report = psd_gram(fs, [0.0, 0.2, 0.5], v=0.2, kernel="meso", resolution=16)
    assert report.lambda_min > -1e-6 * report.trace
    assert report.schwarz_ok


def test_gram_error_carries_lambda_min():
    err = PositivityError("negative", lambda_min=-1.0, trace=2.0)
    assert err.lambda_min == -1.0 and err.trace == 2.0


def test_overlap_window_matches_bruteforce():
    f = GaussianBump(id="f", width=0.3)
    g = GaussianBump(id="g", center=0.2, width=0.3)
    s_w, t_w = (0.0, 0.05), (0.1, 0.15)
    closed = integrated_overlap_prediction(f, g, s_w, t_w, 0.0, resolution=16).value
    brute = overlap_prediction_bruteforce(f, g, s_w, t_w, 0.0, resolution=32, time_nodes=16)
    assert closed == pytest.approx(brute, rel=1e-3)
    with pytest.raises(ValueError):
        integrated_overlap_prediction(f, g, (0.0, 0.2), (0.1, 0.3), 0.0)


def test_same_time_pair_decays_like_inverse_fourth_power():
    d = np.array([0.1, 0.2])
    p = same_time_pair_prediction(d, 0.0, 100)
    assert p[0] / p[1] == pytest.approx(16.0)


def test_build_test_function_and_rescaling():
    f = build_test_function({"id": "b", "kind": "bump", "center": [0.1, 0.2], "width": 0.2})
    assert f.center == 0.1 + 0.2j
    r = build_test_function({"id": "m", "kind": "bump", "width": 1.0, "v": [0.2, 0.0], "a": 0.25}, N=16)
    assert r.id == "m"
    assert r.support_radius == pytest.approx(f.support_radius * 5 / 2)
    assert r.value(np.array([0.2 + 0j]))[0] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        build_test_function({"kind": "spline"})
    with pytest.raises(ValueError):
        build_test_function({"kind": "bump", "a": 0.2})
    with pytest.raises(ValueError):
        rescale_function(f, 0j, 0.5, 16)


def test_selftest_passes():
    criteria = run_selftest(seed=0)
    failed = [c.name for c in criteria if not c.passed]
    assert not failed
