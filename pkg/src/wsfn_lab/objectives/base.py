"""Objective interface: value, Wasserstein gradient, and Hessian blocks.

The Wasserstein gradient at a particle is N times the Euclidean partial
derivative of the empirical objective with respect to that particle, so that
for potential energy it reduces to the plain Euclidean gradient of V.

The Hessian splits into a pointwise part M (one d x d matrix per particle)
and a kernel part K built from pair blocks A[i, j] with A[i, j] = A[j, i]^T;
the operator acts as (Hv)_i = M_i v_i + (1/N) sum_j A[i, j] v_j. Network
objectives expose neither part and rely on finite-difference transport HVPs.
"""

from __future__ import annotations

import numpy as np

from ..measure import ParticleEnsemble, TangentField


class CapabilityError(RuntimeError):
    """The objective kind does not support the requested operation."""


class NumericError(RuntimeError):
    """Evaluation produced a singular system or non-finite numbers."""


class Objective:
    kind: str = "?"
    particle_dim: int = 0

    #: kind-specific payload recorded for reproducibility
    rng_provenance: dict

    def _check(self, mu: ParticleEnsemble):
        if mu.dim != self.particle_dim:
            raise ValueError(
                f"{self.kind}: ensemble dim {mu.dim} != objective dim {self.particle_dim}"
            )

    # -- required everywhere ------------------------------------------------
    def value(self, mu: ParticleEnsemble) -> float:
        raise NotImplementedError

    def grad(self, mu: ParticleEnsemble) -> TangentField:
        raise NotImplementedError

    # -- block accessors (analytic kinds only) -------------------------------
    @property
    def supports_blocks(self) -> bool:
        return False

    def m_block(self, mu: ParticleEnsemble, i: int) -> np.ndarray:
        raise CapabilityError(
            f"{self.kind}: pointwise Hessian blocks unavailable; use the "
            "finite-difference transport HVP (hessian.HessianOperator with "
            "mode='fd_transport')"
        )

    def k_block(self, mu: ParticleEnsemble, i: int, j: int) -> np.ndarray:
        raise CapabilityError(
            f"{self.kind}: kernel Hessian blocks unavailable; use the "
            "finite-difference transport HVP and the stagnation trigger"
        )

    # -- bulk forms, overridable for speed -----------------------------------
    def m_apply(self, mu: ParticleEnsemble, v: np.ndarray) -> np.ndarray:
        n = mu.count
        out = np.empty_like(v)
        for i in range(n):
            out[i] = self.m_block(mu, i) @ v[i]
        return out

    def k_apply(self, mu: ParticleEnsemble, v: np.ndarray) -> np.ndarray:
        n = mu.count
        out = np.zeros_like(v)
        for i in range(n):
            for j in range(n):
                out[i] += self.k_block(mu, i, j) @ v[j]
        return out / n

    def hvp_blocks(self, mu: ParticleEnsemble, v: np.ndarray) -> np.ndarray:
        return self.m_apply(mu, v) + self.k_apply(mu, v)
