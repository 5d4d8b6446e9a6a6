"""Lanczos (H + beta I)^{-1/2} preconditioner against dense references."""

import numpy as np
import pytest

from wsfn_lab.spectral import (
    dense_inv_sqrt,
    lanczos_apply_inv_sqrt,
    lanczos_tridiag,
)


def _sym(dim, seed, spread=1.0):
    rng = np.random.default_rng(seed)
    A = spread * rng.standard_normal((dim, dim))
    return 0.5 * (A + A.T)


def test_identity_operator_halves_with_beta_three():
    v = np.array([2.0, -4.0, 6.0])
    out = lanczos_apply_inv_sqrt(lambda x: x, v, beta_reg=3.0, m=3)
    np.testing.assert_allclose(out, v / 2.0, atol=1e-12)


def test_diagonal_saddle_with_beta_sixteen():
    # both eigenvalues square to 9, so the map is uniformly 1/sqrt(9+16)
    A = np.diag([-3.0, 3.0])
    v = np.array([1.0, 2.0])
    out = lanczos_apply_inv_sqrt(lambda x: A @ x, v, beta_reg=16.0, m=2)
    np.testing.assert_allclose(out, v / 5.0, atol=1e-12)


def test_full_depth_matches_dense():
    for dim in (3, 8, 24):
        A = _sym(dim, seed=dim, spread=2.0)
        rng = np.random.default_rng(100 + dim)
        v = rng.standard_normal(dim)
        got = lanczos_apply_inv_sqrt(lambda x: A @ x, v, beta_reg=0.5, m=dim)
        want = dense_inv_sqrt(A, v, beta_reg=0.5)
        assert np.max(np.abs(got - want)) <= 1e-8 * max(1.0, np.abs(want).max())


def test_error_decreases_with_depth():
    dim = 16
    A = _sym(dim, seed=7, spread=3.0)
    v = np.random.default_rng(8).standard_normal(dim)
    want = dense_inv_sqrt(A, v, beta_reg=1.0)
    errs = [np.linalg.norm(
        lanczos_apply_inv_sqrt(lambda x: A @ x, v, beta_reg=1.0, m=m) - want)
        for m in (2, 4, 8, dim)]
    assert all(errs[i + 1] <= errs[i] + 1e-12 for i in range(len(errs) - 1))
    assert errs[-1] <= 1e-8


def test_indefinite_spectrum_is_fine():
    """Squaring the spectrum makes negative eigenvalues harmless."""
    A = np.diag([-0.9, -0.1, 0.3, 5.0])
    v = np.ones(4)
    got = lanczos_apply_inv_sqrt(lambda x: A @ x, v, beta_reg=1.0, m=4)
    want = v / np.sqrt(np.diag(A) ** 2 + 1.0)
    np.testing.assert_allclose(got, want, atol=1e-10)


def test_breakdown_early_exit_is_exact():
    # v lives in a 2-dimensional invariant subspace of a 6-dim operator,
    # so Lanczos terminates after two steps with the exact answer.
    A = np.diag([1.0, 4.0, 9.0, 9.0, 9.0, 9.0])
    v = np.array([1.0, 1.0, 0.0, 0.0, 0.0, 0.0])
    state = lanczos_tridiag(lambda x: A @ x, v, m=6)
    assert state.breakdown and state.alphas.size == 2
    got = lanczos_apply_inv_sqrt(lambda x: A @ x, v, beta_reg=5.0, m=6)
    want = dense_inv_sqrt(A, v, beta_reg=5.0)
    np.testing.assert_allclose(got, want, atol=1e-12)


def test_non_symmetric_operator_rejected():
    A = np.array([[0.0, 1.0], [0.0, 0.0]])
    with pytest.raises(ValueError, match="non-symmetric"):
        lanczos_tridiag(lambda x: A @ x, np.array([1.0, 1.0]), m=2)


def test_zero_vector_and_bad_args_rejected():
    with pytest.raises(ValueError, match="nonzero"):
        lanczos_tridiag(lambda x: x, np.zeros(3), m=2)
    with pytest.raises(ValueError, match="positive"):
        lanczos_apply_inv_sqrt(lambda x: x, np.ones(3), beta_reg=0.0, m=2)
    with pytest.raises(ValueError, match="zero vector"):
        lanczos_apply_inv_sqrt(lambda x: x, np.zeros(3), beta_reg=1.0, m=2)
    with pytest.raises(ValueError):
        lanczos_tridiag(lambda x: x, np.ones(3), m=0)
