from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.errors import NotHermitianError
from src.linalg.dump import read_spectrum, write_spectrum
from src.linalg.hermitian import eigh, eigvalsh, hermitian_eigensolve
from src.linalg.hermitize import hermitize, singular_values
from src.linalg.lu import inverse, lu_logabsdet, solve
from src.linalg.nonhermitian import balance, eigendecompose, eigenvalues, hessenberg, nonhermitian_eigensolve
from src.linalg.resolvent import eta_integral, log_term, resolvent_trace
from src.sampling.rng import replica_generator


def _complex_matrix(seed: int, n: int) -> np.ndarray:
    rng = replica_generator(seed, 0, 0)
    g = rng.standard_normal((n, n, 2))
    return (g[..., 0] + 1j * g[..., 1]) / math.sqrt(2.0 * n)


def _sorted(values: np.ndarray) -> np.ndarray:
    return np.array(sorted(values, key=lambda z: (round(z.real, 8), z.imag)))


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 24))
def test_hermitian_eigensolve_matches_numpy(seed, n):
    A = _complex_matrix(seed, n)
    H = A + A.conj().T
    res = hermitian_eigensolve(H)
    np.testing.assert_allclose(res.values, np.linalg.eigvalsh(H), atol=1e-10)
    assert res.residual < 1e-10
    assert res.orthogonality < 1e-10


def test_hermitian_rejects_non_hermitian():
    with pytest.raises(NotHermitianError):
        hermitian_eigensolve(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(ValueError):
        eigvalsh(np.zeros((2, 3)))


def test_eigh_backends_agree():
    A = _complex_matrix(3, 12)
    H = A + A.conj().T
    w_native, V = eigh(H)
    w_numpy, _ = eigh(H, backend="numpy")
    np.testing.assert_allclose(w_native, w_numpy, atol=1e-10)
    np.testing.assert_allclose(H @ V, V * w_native[None, :], atol=1e-10)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 20))
def test_nonhermitian_eigenvalues_match_numpy(seed, n):
    X = _complex_matrix(seed, n)
    ours = _sorted(eigenvalues(X))
    ref = _sorted(np.linalg.eigvals(X))
    np.testing.assert_allclose(ours, ref, atol=1e-8)


def test_eigenvectors_are_biorthogonal():
    X = _complex_matrix(11, 32)
    spec = nonhermitian_eigensolve(X)
    R, L = spec.right, spec.left
    np.testing.assert_allclose(L.T @ R, np.eye(32), atol=1e-8)
    np.testing.assert_allclose(np.linalg.norm(R, axis=0), 1.0, atol=1e-12)
    assert not spec.any_defective
    # O_ii >= 1 always
    assert np.all(spec.overlaps() >= 1.0 - 1e-9)


def test_numpy_backend_decomposition_agrees():
    X = _complex_matrix(12, 24)
    a = eigendecompose(X)
    b = eigendecompose(X, backend="numpy")
    np.testing.assert_allclose(np.sort(a.overlaps()), np.sort(b.overlaps()), rtol=1e-6)


def test_triangular_and_diagonal_inputs():
    T = np.triu(_complex_matrix(4, 6))
    np.testing.assert_allclose(_sorted(eigenvalues(T)), _sorted(np.diagonal(T)), atol=1e-12)
    D = np.diag([1.0, 2.0, 3.0]).astype(complex)
    np.testing.assert_allclose(np.sort(eigenvalues(D).real), [1.0, 2.0, 3.0], atol=1e-12)


def test_balance_is_a_similarity():
    A = _complex_matrix(5, 8)
    A[0, :] *= 1e4
    B, d = balance(A)
    np.testing.assert_allclose(B, (A * d[None, :]) / d[:, None], atol=1e-8)


def test_hessenberg_form():
    A = _complex_matrix(6, 10)
    H, Q = hessenberg(A)
    assert np.allclose(np.tril(H, -2), 0.0)
    np.testing.assert_allclose(Q @ H @ Q.conj().T, A, atol=1e-10)


def test_lu_logabsdet_and_solve():
    A = _complex_matrix(7, 16) + 2.0 * np.eye(16)
    det = lu_logabsdet(A)
    assert not det.singular
    assert det.value == pytest.approx(np.linalg.slogdet(A)[1], abs=1e-10)
    b = np.arange(16, dtype=complex)
    np.testing.assert_allclose(A @ solve(A, b), b, atol=1e-10)
    np.testing.assert_allclose(inverse(A) @ A, np.eye(16), atol=1e-10)


def test_lu_flags_singular_matrix():
    A = np.ones((3, 3), dtype=complex)
    res = lu_logabsdet(A)
    assert res.singular
    assert res.value == -math.inf
    with pytest.raises(ValueError):
        lu_logabsdet(np.zeros((2, 3)))


def test_hermitization_spectrum_and_singular_values():
    X = _complex_matrix(8, 10)
    z = 0.3 - 0.2j
    op = hermitize(X, z)
    spec = op.spectrum()
    np.testing.assert_allclose(spec, -spec[::-1], atol=1e-10)
    ref = np.linalg.svd(X - z * np.eye(10), compute_uv=False)[::-1]
    np.testing.assert_allclose(singular_values(X, z), ref, atol=1e-10)
    x = replica_generator(8, 0, 1).standard_normal(20).astype(complex)
    np.testing.assert_allclose(op.matvec(x), op.dense() @ x, atol=1e-12)


def test_singular_triplets():
    X = _complex_matrix(9, 8)
    z = 0.1j
    trip = hermitize(X, z).singular_triplets()
    A = X - z * np.eye(8)
    for i in range(8):
        np.testing.assert_allclose(A @ trip.right[:, i], trip.values[i] * trip.left[:, i], atol=1e-8)


def test_resolvent_helpers():
    lam = np.array([0.0, 0.5, 1.0])
    eta = 0.1
    assert resolvent_trace(lam, eta) == pytest.approx(1j * np.sum(2 * eta / (lam ** 2 + eta ** 2)))
    assert log_term(lam, 2.0) == pytest.approx(np.sum(np.log(lam ** 2 + 4.0)))
    assert eta_integral(lam, 0.0, 1.0) == math.inf
    assert eta_integral(lam[1:], 0.1, 1.0) == pytest.approx(np.sum(np.log((lam[1:] ** 2 + 1) / (lam[1:] ** 2 + 0.01))))
    with pytest.raises(ValueError):
        resolvent_trace(lam, 0.0)
    with pytest.raises(ValueError):
        eta_integral(lam, 1.0, 0.5)


def test_spectrum_dump_roundtrip(tmp_path):
    vals = np.array([1 + 2j, -0.5j, 3.0])
    p = write_spectrum(tmp_path / "s.bin", vals)
    raw = p.read_bytes()
    assert raw[:8] == b"GFLSPEC1"
    assert len(raw) == 16 + 16 * 3
    np.testing.assert_array_equal(read_spectrum(p), vals)
    (tmp_path / "bad.bin").write_bytes(b"NOTMAGIC" + raw[8:])
    with pytest.raises(ValueError):
        read_spectrum(tmp_path / "bad.bin")
