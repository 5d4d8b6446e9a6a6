"""Pure-numpy pair kernels for the clamped Coulomb interaction.

All functions share the same conventions. For points x, y in R^d with d >= 3
and p = d - 2, the clamped kernel is

    k(z) = max(|z|^2, eps2) ** (-p/2)

with gradient and Hessian taken to be exactly zero whenever |z|^2 <= eps2
(the clamped function is constant there). Outside the clamp,

    grad k(z) = -p r2^(-d/2) z
    Hess k(z) = -p (r2^(-d/2) I - d r2^(-(d+2)/2) z z^T),   r2 = |z|^2.

"self" variants sum over ordered pairs i != j of one point set; "cross"
variants sum over all pairs between two sets. Reduction order is a fixed
numpy sum, so results are reproducible for a given build.
"""

import numpy as np


def _pair_r2(x, y):
    diff = x[:, None, :] - y[None, :, :]
    return diff, np.einsum("ijk,ijk->ij", diff, diff)


def energy_self(x, eps2):
    """sum_{i != j} k(x_i - x_j) over ordered pairs."""
    n, d = x.shape
    p = d - 2
    _, r2 = _pair_r2(x, x)
    np.fill_diagonal(r2, np.inf)  # exclude i == j
    return float(np.sum(np.maximum(r2, eps2) ** (-0.5 * p)))


def energy_cross(x, y, eps2):
    """sum_{i,l} k(x_i - y_l)."""
    p = x.shape[1] - 2
    _, r2 = _pair_r2(x, y)
    return float(np.sum(np.maximum(r2, eps2) ** (-0.5 * p)))


def _grad_weights(r2, eps2, d):
    """Scalar factor s(r2) with grad k = s * z; zero inside the clamp."""
    p = d - 2
    with np.errstate(divide="ignore"):
        s = -p * r2 ** (-0.5 * d)
    s[r2 <= eps2] = 0.0
    return s


def grad_self(x, eps2):
    """out_i = sum_{j != i} grad k(x_i - x_j)."""
    n, d = x.shape
    diff, r2 = _pair_r2(x, x)
    np.fill_diagonal(r2, np.inf)
    s = _grad_weights(r2, eps2, d)
    return np.einsum("ij,ijk->ik", s, diff)


def grad_cross(x, y, eps2):
    """out_i = sum_l grad k(x_i - y_l)."""
    d = x.shape[1]
    diff, r2 = _pair_r2(x, y)
    s = _grad_weights(r2, eps2, d)
    return np.einsum("ij,ijk->ik", s, diff)


def _hess_factors(r2, eps2, d):
    p = d - 2
    with np.errstate(divide="ignore"):
        a = -p * r2 ** (-0.5 * d)          # coefficient of I
        b = p * d * r2 ** (-0.5 * (d + 2))  # coefficient of z z^T
    inside = r2 <= eps2
    a[inside] = 0.0
    b[inside] = 0.0
    return a, b


def wsum_self(x, v, eps2):
    """out_i = sum_{j != i} Hess k(x_i - x_j) v_j."""
    n, d = x.shape
    diff, r2 = _pair_r2(x, x)
    np.fill_diagonal(r2, np.inf)
    a, b = _hess_factors(r2, eps2, d)
    zv = np.einsum("ijk,jk->ij", diff, v)
    return np.einsum("ij,jk->ik", a, v) + np.einsum("ij,ij,ijk->ik", b, zv, diff)


def wdiag_self(x, eps2):
    """out_i = sum_{j != i} Hess k(x_i - x_j), an (n, d, d) stack."""
    n, d = x.shape
    diff, r2 = _pair_r2(x, x)
    np.fill_diagonal(r2, np.inf)
    a, b = _hess_factors(r2, eps2, d)
    eye = np.eye(d)
    out = np.einsum("i,kl->ikl", a.sum(axis=1), eye)
    out += np.einsum("ij,ijk,ijl->ikl", b, diff, diff)
    return out


def wdiag_cross(x, y, eps2):
    """out_i = sum_l Hess k(x_i - y_l), an (n, d, d) stack."""
    d = x.shape[1]
    diff, r2 = _pair_r2(x, y)
    a, b = _hess_factors(r2, eps2, d)
    eye = np.eye(d)
    out = np.einsum("i,kl->ikl", a.sum(axis=1), eye)
    out += np.einsum("ij,ijk,ijl->ikl", b, diff, diff)
    return out
