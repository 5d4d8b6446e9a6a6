"""Gaussian perturbations of particle ensembles.

The Hessian-guided field is sampled as xi_i = (1/sqrt(N)) sum_k A[i,k] g_k
with g_k i.i.d. standard normal d-vectors, equivalently xi = sqrt(N) K[g].
Its covariance is the kernel C(x_i, x_j) = (1/N) sum_k A[i,k] A[k,j], whose
integral operator is K^2, and E |xi|^2_{L2} = (1/N^2) sum_{i,j} |A[i,j]|_F^2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .measure import ParticleEnsemble, TangentField, l2_norm
from .objectives import CapabilityError, Objective

MODES = ("gp_hessian", "isotropic", "gp_rms_normalized")
RESAMPLE_CAP = 100


class PerturbationBoundError(RuntimeError):
    """Resampling never met the kappa bound; carries the last norm seen."""

    def __init__(self, message, last_norm):
        super().__init__(message)
        self.last_norm = last_norm


@dataclass(frozen=True)
class PerturbationSpec:
    mode: str = "gp_hessian"
    eta: float = 0.1
    kappa: float | None = None  # off by default; the stated algorithm never truncates

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown perturbation mode {self.mode!r}")
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if self.kappa is not None and self.kappa <= 0:
            raise ValueError("kappa must be positive when set")


def sample_gp(obj: Objective, mu: ParticleEnsemble, rng: np.random.Generator) -> TangentField:
    """One draw of the Hessian-guided Gaussian field at the particles."""
    if not obj.supports_blocks:
        raise CapabilityError(
            f"{obj.kind}: kernel blocks unavailable for the Hessian-guided "
            "perturbation; fall back to isotropic noise"
        )
    g = rng.standard_normal((mu.count, mu.dim))
    return TangentField(np.sqrt(mu.count) * obj.k_apply(mu, g))


def sample_isotropic(n: int, d: int, rng: np.random.Generator) -> TangentField:
    if n < 1 or d < 1:
        raise ValueError("n and d must be >= 1")
    return TangentField(rng.standard_normal((n, d)))


def apply_perturbation(mu: ParticleEnsemble, xi: TangentField,
                       spec: PerturbationSpec, resample=None) -> ParticleEnsemble:
    """Displace particles by eta * xi (RMS-normalizing first if asked).

    When spec.kappa is set, draws violating |xi|_{L2} <= kappa are rejected
    and `resample` (a zero-argument callable returning a fresh field) is
    invoked, up to 100 attempts total.
    """
    if xi.count != mu.count or xi.dim != mu.dim:
        raise ValueError("perturbation field shape does not match the ensemble")
    norm = l2_norm(xi)
    if spec.kappa is not None:
        attempts = 1
        while norm > spec.kappa:
            if resample is None or attempts >= RESAMPLE_CAP:
                raise PerturbationBoundError(
                    f"perturbation norm {norm:.6g} still above kappa={spec.kappa:.6g} "
                    f"after {attempts} attempts",
                    last_norm=norm,
                )
            xi = resample()
            norm = l2_norm(xi)
            attempts += 1
    values = xi.values
    if spec.mode == "gp_rms_normalized":
        if norm == 0.0:
            raise ValueError("cannot RMS-normalize a zero perturbation field")
        values = values / norm
    return ParticleEnsemble(mu.positions + spec.eta * values)
