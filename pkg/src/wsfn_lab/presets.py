"""Experiment presets materialized to the plain-JSON config schema.

A config document has sections `objective`, `optimizers` (list), `trials`,
`iters`, `seed`, `init`, `output`, plus an optional `w2_reference` used for
the transport-distance column in traces. Presets produce exactly this schema
so a run is reproducible from its metadata sidecar alone.
"""

from __future__ import annotations

import copy

import numpy as np

from .measure import ParticleEnsemble
from .objectives import gaussian_modes_sample
from .optimize import OptimizerConfig

PRESET_NAMES = ("exp1_icl", "exp2_matdec", "exp3_coulomb")

MIN_PARTICLES = 20
MIN_ITERS = 50


def _episode(n_out, eta, perturb_mode, F0=None, F0_rel=None):
    block = {
        "trigger": "stagnation",
        "n_out": n_out,
        "eta": eta,
        "perturb_mode": perturb_mode,
        "halt_on_failed_episode": False,
    }
    if F0 is not None:
        block["F0"] = F0
    if F0_rel is not None:
        block["F0_rel"] = F0_rel
    return block


def preset_config(name: str) -> dict:
    if name == "exp1_icl":
        # Published step size 1e-7 is inert here for the same reason as in
        # exp2_matdec (see below): total simulated time would be 3e-4.
        # tau = 0.01 shows the intended contrast; everything else is kept.
        tau, beta, m = 1e-2, 1e-3, 10
        episode = dict(n_out=100, eta=0.1, F0_rel=1e-3)
        return {
            "name": name,
            "seed": 101,
            "trials": 5,
            "iters": 3000,
            "objective": {
                "kind": "icl",
                "feature_dim": 5,
                "input_dim": 15,
                "n_samples": 300,
                "teacher_count": 20,
                "activation": "tanh",
                "seed": 11,
            },
            "init": {"count": 400, "dim": 20, "scale": float(1.0 / np.sqrt(20.0))},
            "w2_reference": None,
            "optimizers": [
                {"method": "wgf", "tau": tau},
                {"method": "wgf_isotropic", "tau": tau,
                 **_episode(perturb_mode="isotropic", **episode)},
                {"method": "pwgf", "tau": tau,
                 **_episode(perturb_mode="gp_hessian", **episode)},
                {"method": "wsfn", "tau": tau, "beta": beta, "lanczos_m": m,
                 **_episode(perturb_mode="gp_hessian", **episode)},
            ],
            "output": "runs/exp1_icl",
        }
    if name == "exp2_matdec":
        # The published step size for this problem (5e-6) moves nothing at
        # the magnitudes produced by mean-field features and unit-variance
        # inputs: the whole spectrum sits below 1e-3, so simulated time
        # 3000 * 5e-6 is far too short for any trajectory to leave the
        # plateau.  We keep every structural setting (N, dims, sample
        # count, beta, window, Lanczos depth, one shared tau) and retime
        # the flow so the plateau exit is observable: tau = 0.2, output
        # weights started two orders below the hidden layer.
        tau, beta, m = 0.2, 1e-4, 12
        episode = dict(n_out=100, eta=0.01, F0_rel=1e-3)
        return {
            "name": name,
            "seed": 202,
            "trials": 5,
            "iters": 3000,
            "objective": {
                "kind": "matrix_decomp",
                "feature_dim": 5,
                "input_dim": 15,
                "n_samples": 300,
                "teacher_count": 20,
                "activation": "tanh",
                "seed": 22,
            },
            "init": {"count": 300, "dim": 20, "scale": [0.02] * 5 + [1.0] * 15},
            "w2_reference": None,
            "optimizers": [
                {"method": "wgf", "tau": tau},
                {"method": "wgf_isotropic", "tau": tau,
                 **_episode(perturb_mode="isotropic", **episode)},
                {"method": "pwgf", "tau": tau,
                 **_episode(perturb_mode="gp_hessian", **episode)},
                {"method": "wsfn", "tau": tau, "beta": beta, "lanczos_m": m,
                 **_episode(perturb_mode="gp_hessian", **episode)},
            ],
            "output": "runs/exp2_matdec",
        }
    if name == "exp3_coulomb":
        tau, beta, m = 1e-6, 1e-5, 12
        episode = dict(n_out=20, eta=0.1, F0=1e-2)
        centers = [[2.0, 0.0, 0.0], [-2.0, 0.0, 0.0]]
        return {
            "name": name,
            "seed": 303,
            "trials": 5,
            "iters": 3000,
            "objective": {
                "kind": "coulomb_mmd",
                "dim": 3,
                "eps_ker": 0.05,
                "target": {
                    "mode": "gaussian_modes",
                    "centers": centers,
                    "noise": 0.25,
                    "count": 400,
                    "seed": 33,
                },
            },
            "init": {"count": 500, "dim": 3, "scale": 0.1},
            "w2_reference": {
                "centers": centers,
                "noise": 0.25,
                "count": 500,
                "seed": 44,
            },
            "optimizers": [
                {"method": "wgf", "tau": tau},
                {"method": "wgf_isotropic", "tau": tau,
                 **_episode(perturb_mode="isotropic", **episode)},
                {"method": "pwgf", "tau": tau,
                 **_episode(perturb_mode="gp_rms_normalized", **episode)},
                {"method": "wsfn", "tau": tau, "beta": beta, "lanczos_m": m,
                 **_episode(perturb_mode="gp_rms_normalized", **episode)},
            ],
            "output": "runs/exp3_coulomb",
        }
    raise ValueError(f"unknown preset {name!r} (expected one of {PRESET_NAMES})")


def apply_scale(config: dict, scale: float) -> dict:
    """Shrink particle count, target-sample count, and iterations by `scale`
    with floors of 20 particles and 50 iterations. Data-size knobs of the
    network objectives (sample and teacher counts) are left alone."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    out = copy.deepcopy(config)
    out["init"]["count"] = max(MIN_PARTICLES, round(out["init"]["count"] * scale))
    out["iters"] = max(MIN_ITERS, round(out["iters"] * scale))
    target = out.get("objective", {}).get("target")
    if target is not None and "count" in target:
        target["count"] = max(MIN_PARTICLES, round(target["count"] * scale))
    ref = out.get("w2_reference")
    if ref is not None:
        ref["count"] = out["init"]["count"]
    return out


def init_ensemble(config: dict, trial: int) -> ParticleEnsemble:
    """Per-trial initial ensemble, shared by every method in the run."""
    init = config["init"]
    rng = np.random.default_rng(
        np.random.SeedSequence((int(config["seed"]), 1, int(trial))))
    # a scalar spreads one scale over every coordinate; a list gives one
    # scale per coordinate (used to start network output weights small
    # while the hidden layer stays warm)
    scale = np.asarray(init["scale"], dtype=np.float64)
    if scale.ndim not in (0, 1) or (scale.ndim == 1 and scale.size != init["dim"]):
        raise ValueError("init scale must be a scalar or one value per coordinate")
    positions = scale * rng.standard_normal((init["count"], init["dim"]))
    center = init.get("center")
    if center is not None:
        positions = positions + np.asarray(center, dtype=np.float64)
    return ParticleEnsemble(positions)


def w2_reference_ensemble(config: dict) -> ParticleEnsemble | None:
    ref = config.get("w2_reference")
    if ref is None:
        return None
    samples = gaussian_modes_sample(
        ref["centers"], float(ref["noise"]), int(ref["count"]),
        config["init"]["dim"], ref["seed"])
    return ParticleEnsemble(samples)


def method_seed(base_seed: int, method_index: int) -> int:
    """Derived integer seed for one method's perturbation stream."""
    ss = np.random.SeedSequence((int(base_seed), 2, int(method_index)))
    return int(ss.generate_state(1, np.uint64)[0])


def build_optimizer_config(opt: dict, iters: int, seed: int,
                           initial_loss: float | None = None) -> OptimizerConfig:
    """Materialize one optimizer dict into an OptimizerConfig.

    An `F0_rel` entry resolves to F0 = F0_rel * |initial_loss| (the
    stagnation tolerance rule for runs whose loss scale is data-dependent).
    """
    fields = dict(opt)
    rel = fields.pop("F0_rel", None)
    if rel is not None:
        if "F0" in fields:
            raise ValueError("give either F0 or F0_rel, not both")
        if initial_loss is None:
            raise ValueError("F0_rel needs the initial loss to resolve")
        fields["F0"] = float(rel) * abs(float(initial_loss))
    return OptimizerConfig(max_iters=int(iters), seed=int(seed), **fields)
