"""Hessian-vector products, dense assembly, kernel spectra, and constants.

Flattened coordinates (stack the N rows of a tangent field into one vector
of length N*d) carry the plain Euclidean inner product. The operator
blockdiag(M) + (1/N)[A] is symmetric there exactly when it is symmetric in
L^2_mu, because the 1/N weights are uniform, so Krylov iterations can run on
flat vectors with no weighting bookkeeping.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse.linalg as spla

from .measure import ParticleEnsemble, TangentField, push
from .objectives import CapabilityError, Objective

DENSE_CAP = 4096
FD_STEP_DEFAULT = 1e-4


def flatten(field: TangentField) -> np.ndarray:
    return field.values.reshape(-1).copy()


def unflatten(vec: np.ndarray, count: int, dim: int) -> TangentField:
    return TangentField(np.asarray(vec, dtype=np.float64).reshape(count, dim))


class HessianOperator:
    """The Wasserstein Hessian of an objective at a fixed ensemble.

    mode='exact_blocks' uses the objective's M/A blocks and is available for
    the analytic kinds. mode='fd_transport' only needs gradients: push the
    particles by +-t v, evaluate the gradient at the pushed particles, and
    difference. The step is scaled as t = fd_step (1 + max|x|) / max(1, max|v|)
    so it tracks both the ensemble size and the probe magnitude.
    """

    def __init__(self, obj: Objective, mu: ParticleEnsemble, mode=None,
                 fd_step: float = FD_STEP_DEFAULT):
        if mode is None:
            mode = "exact_blocks" if obj.supports_blocks else "fd_transport"
        if mode not in ("exact_blocks", "fd_transport"):
            raise ValueError(f"unknown HVP mode {mode!r}")
        if mode == "exact_blocks" and not obj.supports_blocks:
            raise CapabilityError(
                f"{obj.kind}: exact blocks unavailable, use mode='fd_transport'"
            )
        if fd_step <= 0:
            raise ValueError("fd_step must be positive")
        self.obj = obj
        self.mu = mu
        self.mode = mode
        self.fd_step = fd_step
        self._pos_scale = 1.0 + float(np.max(np.abs(mu.positions)))

    def apply(self, v: TangentField) -> TangentField:
        if v.count != self.mu.count or v.dim != self.mu.dim:
            raise ValueError("tangent field shape does not match the ensemble")
        if self.mode == "exact_blocks":
            out = self.obj.hvp_blocks(self.mu, v.values)
        else:
            vmax = float(np.max(np.abs(v.values)))
            if vmax == 0.0:
                return TangentField(np.zeros_like(v.values))
            t = self.fd_step * self._pos_scale / max(1.0, vmax)
            gp = self.obj.grad(push(self.mu, v, t)).values
            gm = self.obj.grad(push(self.mu, v, -t)).values
            out = (gp - gm) / (2.0 * t)
        if not np.all(np.isfinite(out)):
            raise FloatingPointError("HVP produced non-finite values")
        return TangentField(out)

    def apply_flat(self, vec: np.ndarray) -> np.ndarray:
        field = unflatten(vec, self.mu.count, self.mu.dim)
        return flatten(self.apply(field))


def hvp(op: HessianOperator, v: TangentField) -> TangentField:
    return op.apply(v)


def assemble_dense(op: HessianOperator, cap: int = DENSE_CAP) -> np.ndarray:
    """Dense (N d) x (N d) matrix blockdiag(M) + (1/N)[A]. Oracle use only."""
    if op.mode != "exact_blocks":
        raise CapabilityError("dense assembly needs exact blocks")
    mu, obj = op.mu, op.obj
    n, d = mu.count, mu.dim
    if n * d > cap:
        raise ValueError(f"flattened dimension {n * d} exceeds cap {cap}")
    out = np.zeros((n * d, n * d))
    for i in range(n):
        sl = slice(i * d, (i + 1) * d)
        out[sl, sl] = obj.m_block(mu, i)
        for j in range(n):
            out[sl, j * d : (j + 1) * d] += obj.k_block(mu, i, j) / n
    return out


def kernel_matrix(obj: Objective, mu: ParticleEnsemble, cap: int = DENSE_CAP) -> np.ndarray:
    """Dense flattened kernel operator (1/N)[A[i,j]]."""
    n, d = mu.count, mu.dim
    if n * d > cap:
        raise ValueError(f"flattened dimension {n * d} exceeds cap {cap}")
    out = np.zeros((n * d, n * d))
    for i in range(n):
        for j in range(n):
            out[i * d : (i + 1) * d, j * d : (j + 1) * d] = obj.k_block(mu, i, j) / n
    return out


def min_eig_kernel(obj: Objective, mu: ParticleEnsemble, cap: int = DENSE_CAP,
                   maxiter: int = 5000, tol: float = 1e-9) -> float:
    """Smallest eigenvalue of the flattened kernel part (1/N)[A].

    Dense eigensolve when N d <= cap; otherwise a Lanczos extremal iteration
    on -K (largest algebraic eigenvalue of -K is -lambda_min). Network kinds
    have no kernel blocks and raise; their runs use the stagnation trigger.
    """
    if not obj.supports_blocks:
        raise CapabilityError(
            f"{obj.kind}: kernel blocks unavailable; use the stagnation trigger"
        )
    n, d = mu.count, mu.dim
    if n * d <= cap:
        k = kernel_matrix(obj, mu, cap=cap)
        return float(np.linalg.eigvalsh(0.5 * (k + k.T))[0])

    def neg_k(vec):
        field = vec.reshape(n, d)
        return -obj.k_apply(mu, field).reshape(-1)

    linop = spla.LinearOperator((n * d, n * d), matvec=neg_k)
    vals = spla.eigsh(linop, k=1, which="LA", maxiter=maxiter, tol=tol,
                      return_eigenvectors=False)
    return float(-vals[0])


def estimate_constants(obj: Objective, mu: ParticleEnsemble) -> dict:
    """Empirical Hessian bounds: C_M = max_i |M_i|_2 and the Hilbert-Schmidt
    kernel norm C_K = sqrt((1/N^2) sum_{i,j} |A[i,j]|_F^2)."""
    if not obj.supports_blocks:
        raise CapabilityError(f"{obj.kind}: blocks unavailable")
    n = mu.count
    c_m = 0.0
    for i in range(n):
        m = obj.m_block(mu, i)
        c_m = max(c_m, float(np.max(np.abs(np.linalg.eigvalsh(0.5 * (m + m.T))))))
    total = 0.0
    for i in range(n):
        for j in range(n):
            a = obj.k_block(mu, i, j)
            total += float(np.sum(a * a))
    return {"C_M": c_m, "C_K": float(np.sqrt(total / (n * n)))}
