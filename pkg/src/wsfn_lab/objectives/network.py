"""Mean-field two-layer network objectives (matrix decomposition, ICL).

A particle is theta = (a, w) with a in R^k, w in R^l; the student map is
h(z) = (1/N) sum_j a_j sigma(w_j^T z) evaluated on a fixed sample of inputs.
Both objectives are functions of the per-sample features h(z_s) only, so
gradients chain a small per-sample backprop vector g_s = dF/dh(z_s) through
the particles:

    grad_a(theta_j) = sum_s g_s sigma(w_j^T z_s)
    grad_w(theta_j) = sum_s (a_j . g_s) sigma'(w_j^T z_s) z_s

(the leading 1/N of the mean-field average cancels against the N of the
empirical Wasserstein gradient convention). Hessian blocks are deliberately
not provided; curvature is reached through finite-difference transport HVPs.
"""

from __future__ import annotations

import numpy as np

from ..measure import ParticleEnsemble, TangentField
from .base import NumericError, Objective


def _tanh(x):
    return np.tanh(x)


def _tanh_prime(x):
    c = np.cosh(x)
    return 1.0 / (c * c)


def _relu(x):
    return np.maximum(x, 0.0)


def _relu_prime(x):
    return (x > 0.0).astype(np.float64)


_ACTIVATIONS = {"tanh": (_tanh, _tanh_prime), "relu": (_relu, _relu_prime)}


def teacher_data(feature_dim, input_dim, n_samples, teacher_count, seed, with_linear):
    """Deterministic teacher/input data from a recorded seed.

    Teacher particles are i.i.d. N(0,1)/sqrt(k+l), inputs are i.i.d. N(0,1),
    and the optional k x k readout matrix is i.i.d. N(0,1)/sqrt(k). Draw
    order is fixed, so the same seed always yields bit-identical data.
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    k, l = feature_dim, input_dim
    teacher = rng.standard_normal((teacher_count, k + l)) / np.sqrt(k + l)
    inputs = rng.standard_normal((n_samples, l))
    linear = rng.standard_normal((k, k)) / np.sqrt(k) if with_linear else None
    return teacher, inputs, linear


class _TwoLayerObjective(Objective):
    def __init__(self, feature_dim, input_dim, n_samples, teacher_count,
                 activation, seed, with_linear):
        if feature_dim < 1 or input_dim < 1 or n_samples < 1 or teacher_count < 1:
            raise ValueError("feature_dim, input_dim, n_samples, teacher_count must be >= 1")
        if activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.k = int(feature_dim)
        self.l = int(input_dim)
        self.n = int(n_samples)
        self.activation = activation
        self.sigma, self.sigma_prime = _ACTIVATIONS[activation]
        self.particle_dim = self.k + self.l
        teacher, inputs, linear = teacher_data(
            self.k, self.l, self.n, teacher_count, seed, with_linear
        )
        self.teacher_particles = teacher
        self.inputs = inputs
        self.teacher_linear = linear
        self.rng_provenance = {
            "seed": seed,
            "teacher_count": teacher_count,
            "activation": activation,
        }
        self.h_star = self._features_of(teacher)  # (k, n)
        if linear is not None:
            self.h_star = linear @ self.h_star

    def _features_of(self, particles):
        a = particles[:, : self.k]
        w = particles[:, self.k :]
        act = self.sigma(w @ self.inputs.T)  # (count, n)
        return a.T @ act / particles.shape[0]

    def _forward(self, mu):
        self._check(mu)
        a = mu.positions[:, : self.k]
        w = mu.positions[:, self.k :]
        pre = w @ self.inputs.T
        act = self.sigma(pre)
        h = a.T @ act / mu.count  # (k, n)
        return a, w, pre, act, h

    def _backprop(self, mu, a, pre, act, g):
        """Chain per-sample dF/dh columns g (k, n) through the particles."""
        grad_a = act @ g.T  # (N, k)
        coef = (a @ g) * self.sigma_prime(pre)  # (N, n)
        grad_w = coef @ self.inputs  # (N, l)
        return TangentField(np.hstack([grad_a, grad_w]))


class MatrixDecompositionObjective(_TwoLayerObjective):
    """F = (1/n) sum_s | h h^T - h* h*^T |_F^2 at the sampled inputs."""

    kind = "matrix_decomp"

    def __init__(self, feature_dim, input_dim, n_samples, teacher_count=20,
                 activation="tanh", seed=0):
        super().__init__(feature_dim, input_dim, n_samples, teacher_count,
                         activation, seed, with_linear=False)

    def value(self, mu):
        _, _, _, _, h = self._forward(mu)
        u = np.sum(h * h, axis=0)
        vv = np.sum(self.h_star * self.h_star, axis=0)
        c = np.sum(h * self.h_star, axis=0)
        # |h h^T - h* h*^T|_F^2 = u^2 - 2 c^2 + v^2
        return float(np.mean(u * u - 2.0 * c * c + vv * vv))

    def grad(self, mu):
        a, w, pre, act, h = self._forward(mu)
        u = np.sum(h * h, axis=0)
        c = np.sum(h * self.h_star, axis=0)
        g = (4.0 / self.n) * (h * u - self.h_star * c)
        return self._backprop(mu, a, pre, act, g)


class ICLObjective(_TwoLayerObjective):
    """In-context feature learning loss with the readout layer solved out.

    With Sigma_{mu,nu} = (1/n) sum_s h_mu(z_s) h_nu(z_s)^T and the teacher
    map h*(z) = T_hat h_teacher(z),

        F = Tr(Sigma_**)/2 - Tr(Sigma_*mu P Sigma_mu*)/2,
        P = (Sigma_mumu + r I)^{-1},  r = ridge * Tr(Sigma_mumu) / k.

    The analytic dF/dh includes the derivative of the adaptive ridge r, so
    it matches finite differences of value() to full first order.
    """

    kind = "icl"

    def __init__(self, feature_dim, input_dim, n_samples, teacher_count=20,
                 activation="tanh", seed=0, ridge=1e-6):
        super().__init__(feature_dim, input_dim, n_samples, teacher_count,
                         activation, seed, with_linear=True)
        if ridge < 0:
            raise ValueError("ridge must be non-negative")
        self.ridge = float(ridge)
        self._trace_star = float(np.trace(self.h_star @ self.h_star.T)) / self.n

    def _solve_parts(self, h):
        sigma = (h @ h.T) / self.n
        sigma = 0.5 * (sigma + sigma.T)
        cross = (h @ self.h_star.T) / self.n  # Sigma_{mu,*}
        shift = self.ridge * np.trace(sigma) / self.k
        try:
            p = np.linalg.inv(sigma + shift * np.eye(self.k))
        except np.linalg.LinAlgError as exc:
            raise NumericError(
                f"icl: feature covariance singular beyond ridge rescue "
                f"(trace {np.trace(sigma):.3e}, ridge shift {shift:.3e}): {exc}"
            ) from exc
        if not np.all(np.isfinite(p)):
            raise NumericError(
                f"icl: non-finite covariance inverse (ridge shift {shift:.3e})"
            )
        return cross, p

    def value(self, mu):
        _, _, _, _, h = self._forward(mu)
        cross, p = self._solve_parts(h)
        fit = float(np.trace(cross.T @ p @ cross))
        return 0.5 * self._trace_star - 0.5 * fit

    def grad(self, mu):
        a, w, pre, act, h = self._forward(mu)
        cross, p = self._solve_parts(h)
        g_mat = p @ cross @ cross.T @ p
        ridge_term = (self.ridge / self.k) * np.trace(g_mat)
        g = (g_mat @ h + ridge_term * h - p @ cross @ self.h_star) / self.n
        return self._backprop(mu, a, pre, act, g)
