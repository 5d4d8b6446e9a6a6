"""Particle-transport optimization lab.

Optimizes functionals of empirical measures by pushing particles along
tangent fields. Ships first-order flows, dense Newton and damped-Newton
baselines, and a saddle-free preconditioned method driven by a matrix
function of the transport Hessian, plus Gaussian perturbation episodes for
leaving flat regions, a property-verification suite, and a CLI runner.
"""

from ._kernels import BACKEND as COULOMB_BACKEND
from .hessian import (
    HessianOperator,
    assemble_dense,
    estimate_constants,
    flatten,
    hvp,
    kernel_matrix,
    min_eig_kernel,
    unflatten,
)
from .measure import (
    ParticleEnsemble,
    TangentField,
    l2_inner,
    l2_norm,
    load_ensemble,
    push,
    save_ensemble,
    w2_1d,
    w2_exact,
)
from .objectives import (
    CapabilityError,
    CoulombMMDObjective,
    ICLObjective,
    InteractionObjective,
    KINDS,
    MatrixDecompositionObjective,
    NumericError,
    Objective,
    PotentialObjective,
    gaussian_modes_sample,
    make_objective,
)
from .optimize import (
    OptimizerConfig,
    RunRecord,
    RunRow,
    TheoryConstants,
    read_run_csv,
    run,
    step_lm,
    step_newton,
    step_wgf,
    step_wsfn,
    theoretical_params,
    write_run_csv,
)
from .perturb import (
    PerturbationBoundError,
    PerturbationSpec,
    apply_perturbation,
    sample_gp,
    sample_isotropic,
)
from .spectral import dense_inv_sqrt, lanczos_apply_inv_sqrt, lanczos_tridiag
from .verify import CheckReport, gradient_fd_max_relerr, run_property_suite

__version__ = "0.1.0"

__all__ = [
    "COULOMB_BACKEND",
    "CapabilityError",
    "CheckReport",
    "CoulombMMDObjective",
    "HessianOperator",
    "ICLObjective",
    "InteractionObjective",
    "KINDS",
    "MatrixDecompositionObjective",
    "NumericError",
    "Objective",
    "OptimizerConfig",
    "ParticleEnsemble",
    "PerturbationBoundError",
    "PerturbationSpec",
    "PotentialObjective",
    "RunRecord",
    "RunRow",
    "TangentField",
    "TheoryConstants",
    "apply_perturbation",
    "assemble_dense",
    "dense_inv_sqrt",
    "estimate_constants",
    "flatten",
    "gaussian_modes_sample",
    "gradient_fd_max_relerr",
    "hvp",
    "kernel_matrix",
    "l2_inner",
    "l2_norm",
    "lanczos_apply_inv_sqrt",
    "lanczos_tridiag",
    "load_ensemble",
    "make_objective",
    "min_eig_kernel",
    "push",
    "read_run_csv",
    "run",
    "run_property_suite",
    "sample_gp",
    "sample_isotropic",
    "save_ensemble",
    "step_lm",
    "step_newton",
    "step_wgf",
    "step_wsfn",
    "theoretical_params",
    "unflatten",
    "w2_1d",
    "w2_exact",
    "write_run_csv",
]
