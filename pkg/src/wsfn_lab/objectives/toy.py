"""Potential and pairwise-interaction energies with closed-form blocks.

These are the instruments behind most verification checks: every derivative
is available by hand, so FD oracles, dense spectra, and rate guarantees can
be tested without numerical slack.
"""

from __future__ import annotations

import numpy as np

from ..measure import ParticleEnsemble, TangentField
from .base import Objective

_FORMS = ("quadratic", "quadratic_form", "quartic")


def _symmetric_matrix(matrix, dim):
    mat = np.asarray(matrix, dtype=np.float64)
    if mat.shape != (dim, dim):
        raise ValueError(f"matrix must be {dim}x{dim}, got {mat.shape}")
    if not np.allclose(mat, mat.T, atol=1e-12):
        raise ValueError("matrix must be symmetric")
    return mat


class PotentialObjective(Objective):
    """F(mu) = mean of V over particles; M_i = Hess V(x_i), K = 0.

    Forms: quadratic V = |x-m|^2/2, quadratic_form V = (x-m)^T D (x-m)/2
    with symmetric D (possibly indefinite, handy for saddle tests), and
    quartic V = sum_c x_c^4 / 4 whose minimizer at 0 is degenerate.
    """

    kind = "potential"

    def __init__(self, form="quadratic", dim=None, center=None, matrix=None):
        if form not in _FORMS:
            raise ValueError(f"unknown potential form {form!r}")
        self.form = form
        if center is not None:
            center = np.asarray(center, dtype=np.float64).ravel()
            dim = dim or center.size
        if matrix is not None:
            matrix = np.asarray(matrix, dtype=np.float64)
            dim = dim or matrix.shape[0]
        if dim is None:
            raise ValueError("potential needs dim (or center/matrix to infer it)")
        self.particle_dim = int(dim)
        self.center = np.zeros(self.particle_dim) if center is None else center
        if self.center.size != self.particle_dim:
            raise ValueError("center length does not match dim")
        if form == "quadratic_form":
            self.matrix = _symmetric_matrix(
                np.eye(self.particle_dim) if matrix is None else matrix,
                self.particle_dim,
            )
        else:
            self.matrix = None
        self.rng_provenance = {}

    def value(self, mu):
        self._check(mu)
        y = mu.positions - self.center
        if self.form == "quadratic":
            per = 0.5 * np.sum(y * y, axis=1)
        elif self.form == "quadratic_form":
            per = 0.5 * np.einsum("ik,kl,il->i", y, self.matrix, y)
        else:
            per = 0.25 * np.sum(y**4, axis=1)
        return float(np.mean(per))

    def grad(self, mu):
        self._check(mu)
        y = mu.positions - self.center
        if self.form == "quadratic":
            g = y
        elif self.form == "quadratic_form":
            g = y @ self.matrix
        else:
            g = y**3
        return TangentField(g)

    @property
    def supports_blocks(self):
        return True

    def m_block(self, mu, i):
        self._check(mu)
        if self.form == "quadratic":
            return np.eye(self.particle_dim)
        if self.form == "quadratic_form":
            return self.matrix.copy()
        y = mu.positions[i] - self.center
        return np.diag(3.0 * y * y)

    def k_block(self, mu, i, j):
        self._check(mu)
        return np.zeros((self.particle_dim, self.particle_dim))

    def m_apply(self, mu, v):
        if self.form == "quadratic":
            return v.copy()
        if self.form == "quadratic_form":
            return v @ self.matrix
        y = mu.positions - self.center
        return 3.0 * y * y * v

    def k_apply(self, mu, v):
        return np.zeros_like(v)


class InteractionObjective(Objective):
    """F(mu) = (1/2) double integral of U(x - y) over mu x mu.

    Blocks take the mean-field form M_i = mean_j Hess U(x_i - x_j) and
    A[i, j] = -Hess U(x_i - x_j); for the quadratic forms here Hess U is the
    constant matrix D, so (Hv)_i = D (v_i - mean v) and constants come out
    exactly (C_M = |D|_2, C_K from the all-equal blocks).
    """

    kind = "interaction"

    def __init__(self, form="quadratic", dim=None, matrix=None):
        if form not in ("quadratic", "quadratic_form"):
            raise ValueError(f"unknown interaction form {form!r}")
        self.form = form
        if matrix is not None:
            matrix = np.asarray(matrix, dtype=np.float64)
            dim = dim or matrix.shape[0]
        if dim is None:
            raise ValueError("interaction needs dim (or matrix to infer it)")
        self.particle_dim = int(dim)
        if form == "quadratic_form":
            self.matrix = _symmetric_matrix(
                np.eye(self.particle_dim) if matrix is None else matrix,
                self.particle_dim,
            )
        else:
            self.matrix = np.eye(self.particle_dim)
        self.rng_provenance = {}

    def value(self, mu):
        self._check(mu)
        x = mu.positions
        diff = x[:, None, :] - x[None, :, :]
        per = 0.5 * np.einsum("ijk,kl,ijl->ij", diff, self.matrix, diff)
        return float(0.5 * np.mean(per))

    def grad(self, mu):
        self._check(mu)
        centered = mu.positions - mu.positions.mean(axis=0)
        return TangentField(centered @ self.matrix)

    @property
    def supports_blocks(self):
        return True

    def m_block(self, mu, i):
        self._check(mu)
        return self.matrix.copy()

    def k_block(self, mu, i, j):
        self._check(mu)
        return -self.matrix

    def m_apply(self, mu, v):
        return v @ self.matrix

    def k_apply(self, mu, v):
        return -np.broadcast_to(v.mean(axis=0) @ self.matrix, v.shape).copy()
