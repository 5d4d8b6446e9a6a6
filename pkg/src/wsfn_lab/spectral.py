"""Lanczos application of (H^2 + beta I)^(-1/2) to a vector.

The Krylov space is built for H itself, not H^2; squaring happens inside the
small tridiagonal eigenproblem, which halves the HVP count per step and is
exact once the Krylov space is invariant. Full reorthogonalization keeps the
basis clean at the desk scales this toolkit targets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BREAKDOWN_REL_TOL = 1e-12


@dataclass
class LanczosState:
    alphas: np.ndarray   # diagonal of T, length m_used
    betas: np.ndarray    # off-diagonal, length m_used - 1
    basis: np.ndarray    # (dim, m_used) orthonormal columns
    breakdown: bool      # stopped early on a tiny beta


def lanczos_tridiag(apply_op, v, m, breakdown_tol=None) -> LanczosState:
    """m-step Lanczos with full reorthogonalization.

    `apply_op` must implement a symmetric linear map on flat vectors; this is
    asserted with a free probe (for symmetric A, <q1, A q2> equals beta_1 by
    the three-term recurrence) rather than extra matvecs.
    """
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    vnorm = np.linalg.norm(v)
    if vnorm == 0.0:
        raise ValueError("Lanczos needs a nonzero start vector")
    if m < 1:
        raise ValueError("depth m must be >= 1")
    if breakdown_tol is None:
        breakdown_tol = BREAKDOWN_REL_TOL * vnorm
    dim = v.size
    m = min(m, dim)
    basis = np.empty((dim, m))
    alphas = np.empty(m)
    betas = np.empty(max(m - 1, 0))
    basis[:, 0] = v / vnorm
    broke = False
    used = m
    for i in range(m):
        # np.array (not asarray): apply_op may return its input unchanged
        # (identity map), and an aliased w would corrupt the basis in place.
        w = np.array(apply_op(basis[:, i]), dtype=np.float64).reshape(-1)
        if i == 1:
            probe = float(basis[:, 0] @ w)
            scale = max(1.0, abs(alphas[0]), abs(betas[0]))
            if abs(probe - betas[0]) > 1e-5 * scale:
                raise ValueError(
                    f"operator looks non-symmetric: <q1,Aq2>={probe:.6e} "
                    f"but beta_1={betas[0]:.6e}"
                )
        alphas[i] = float(basis[:, i] @ w)
        w -= alphas[i] * basis[:, i]
        if i > 0:
            w -= betas[i - 1] * basis[:, i - 1]
        # full reorthogonalization against everything built so far
        w -= basis[:, : i + 1] @ (basis[:, : i + 1].T @ w)
        if i == m - 1:
            break
        b = np.linalg.norm(w)
        if b < breakdown_tol:
            used = i + 1
            broke = True
            break
        betas[i] = b
        basis[:, i + 1] = w / b
    return LanczosState(
        alphas=alphas[:used],
        betas=betas[: used - 1],
        basis=basis[:, :used],
        breakdown=broke,
    )


def _tridiag_function(state: LanczosState, f):
    """f(T) e_1 through the eigendecomposition of the tridiagonal T."""
    t = np.diag(state.alphas)
    if state.betas.size:
        idx = np.arange(state.betas.size)
        t[idx, idx + 1] = state.betas
        t[idx + 1, idx] = state.betas
    evals, evecs = np.linalg.eigh(t)
    return evecs @ (f(evals) * evecs[0, :])


def lanczos_apply_inv_sqrt(apply_op, v, beta_reg, m) -> np.ndarray:
    """Approximate (H^2 + beta I)^(-1/2) v with an m-step Krylov space of H."""
    if beta_reg <= 0:
        raise ValueError("beta_reg must be positive")
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    vnorm = np.linalg.norm(v)
    if vnorm == 0.0:
        raise ValueError("cannot precondition the zero vector")
    state = lanczos_tridiag(apply_op, v, m)
    coeffs = _tridiag_function(state, lambda lam: 1.0 / np.sqrt(lam * lam + beta_reg))
    out = vnorm * (state.basis @ coeffs)
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("Lanczos produced non-finite values")
    return out


def dense_inv_sqrt(matrix, v, beta_reg) -> np.ndarray:
    """Oracle: eigendecompose the (symmetrized) matrix and map eigenvalues."""
    if beta_reg <= 0:
        raise ValueError("beta_reg must be positive")
    a = np.asarray(matrix, dtype=np.float64)
    a = 0.5 * (a + a.T)
    evals, evecs = np.linalg.eigh(a)
    scale = 1.0 / np.sqrt(evals * evals + beta_reg)
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    return evecs @ (scale * (evecs.T @ v))
