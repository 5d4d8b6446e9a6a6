"""Objective construction and dispatch over the five supported kinds."""

from __future__ import annotations

import numpy as np

from ..measure import load_ensemble
from .base import CapabilityError, NumericError, Objective
from .coulomb import CoulombMMDObjective
from .network import ICLObjective, MatrixDecompositionObjective, teacher_data
from .toy import InteractionObjective, PotentialObjective

KINDS = ("potential", "interaction", "coulomb_mmd", "matrix_decomp", "icl")


def gaussian_modes_sample(centers, noise, count, dim, seed):
    """Draw `count` points from an equal-weight Gaussian mixture, reproducibly."""
    centers = np.asarray(centers, dtype=np.float64)
    if centers.ndim != 2 or centers.shape[1] != dim:
        raise ValueError(f"mode centers must be (modes, {dim})")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    which = rng.integers(0, centers.shape[0], size=count)
    return centers[which] + noise * rng.standard_normal((count, dim))


def _coulomb_target(spec, dim):
    target = spec.get("target")
    if target is None:
        raise ValueError("coulomb_mmd: missing 'target' section")
    mode = target.get("mode", "gaussian_modes")
    if mode == "gaussian_modes":
        seed = target.get("seed", 0)
        samples = gaussian_modes_sample(
            target["centers"], float(target["noise"]), int(target["count"]), dim, seed
        )
        prov = {"target_mode": mode, "target_seed": seed}
    elif mode == "csv":
        samples = load_ensemble(target["path"]).positions
        prov = {"target_mode": mode, "target_path": str(target["path"])}
    elif mode == "array":
        samples = np.asarray(target["values"], dtype=np.float64)
        prov = {"target_mode": mode}
    else:
        raise ValueError(f"coulomb_mmd: unknown target mode {mode!r}")
    return samples, prov


def make_objective(spec: dict) -> Objective:
    """Build an objective from a plain-dict description (the config schema).

    The same spec (including seeds) always produces bit-identical embedded
    data. Raises ValueError on unknown kinds or incomplete payloads.
    """
    if "kind" not in spec:
        raise ValueError("objective spec missing 'kind'")
    kind = spec["kind"]
    if kind == "potential":
        return PotentialObjective(
            form=spec.get("form", "quadratic"),
            dim=spec.get("dim"),
            center=spec.get("center"),
            matrix=spec.get("matrix"),
        )
    if kind == "interaction":
        return InteractionObjective(
            form=spec.get("form", "quadratic"),
            dim=spec.get("dim"),
            matrix=spec.get("matrix"),
        )
    if kind == "coulomb_mmd":
        dim = int(spec.get("dim", 3))
        samples, prov = _coulomb_target(spec, dim)
        return CoulombMMDObjective(
            samples, eps_ker=float(spec.get("eps_ker", 5e-2)), rng_provenance=prov
        )
    if kind == "matrix_decomp":
        return MatrixDecompositionObjective(
            feature_dim=int(spec["feature_dim"]),
            input_dim=int(spec["input_dim"]),
            n_samples=int(spec["n_samples"]),
            teacher_count=int(spec.get("teacher_count", 20)),
            activation=spec.get("activation", "tanh"),
            seed=spec.get("seed", 0),
        )
    if kind == "icl":
        return ICLObjective(
            feature_dim=int(spec["feature_dim"]),
            input_dim=int(spec["input_dim"]),
            n_samples=int(spec["n_samples"]),
            teacher_count=int(spec.get("teacher_count", 20)),
            activation=spec.get("activation", "tanh"),
            seed=spec.get("seed", 0),
            ridge=float(spec.get("ridge", 1e-6)),
        )
    raise ValueError(f"unknown objective kind {kind!r} (expected one of {KINDS})")


__all__ = [
    "CapabilityError",
    "CoulombMMDObjective",
    "ICLObjective",
    "InteractionObjective",
    "KINDS",
    "MatrixDecompositionObjective",
    "NumericError",
    "Objective",
    "PotentialObjective",
    "gaussian_modes_sample",
    "make_objective",
    "teacher_data",
]
