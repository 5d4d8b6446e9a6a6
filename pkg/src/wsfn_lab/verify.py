"""One-command property suite.

Every check pins its seed and problem size, so verdicts (and the emitted
report) are deterministic: re-running with the same seed gives a
byte-identical report. Checks execute in a small thread pool; the report is
assembled in name order regardless of completion order.
"""

from __future__ import annotations

import functools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .hessian import HessianOperator, assemble_dense, flatten, min_eig_kernel, unflatten
from .measure import ParticleEnsemble, TangentField, l2_inner, l2_norm, push, w2_1d, w2_exact
from .objectives import (
    CoulombMMDObjective,
    ICLObjective,
    InteractionObjective,
    MatrixDecompositionObjective,
    PotentialObjective,
)
from .optimize import OptimizerConfig, step_lm, step_newton, step_wgf, step_wsfn
from .perturb import sample_gp
from .spectral import dense_inv_sqrt, lanczos_apply_inv_sqrt

GP_MC_SAMPLES = 100_000


@dataclass
class CheckRow:
    name: str
    status: str        # pass | fail | skipped
    measured: float
    tolerance: float
    seed: int


@dataclass
class CheckReport:
    rows: list[CheckRow] = field(default_factory=list)

    @property
    def overall_pass(self) -> bool:
        return all(r.status != "fail" for r in self.rows)

    def to_table(self) -> str:
        width = max([len(r.name) for r in self.rows] + [5])
        lines = [f"{'check'.ljust(width)}  status   measured                 tolerance"]
        for r in self.rows:
            lines.append(
                f"{r.name.ljust(width)}  {r.status.ljust(7)}  "
                f"{repr(r.measured).ljust(23)}  {r.tolerance!r}"
            )
        passed = sum(r.status == "pass" for r in self.rows)
        verdict = "pass" if self.overall_pass else "FAIL"
        lines.append(f"overall: {verdict} ({passed}/{len(self.rows)} passed)")
        return "\n".join(lines)

    def to_json(self) -> str:
        payload = {
            "overall": "pass" if self.overall_pass else "fail",
            "checks": [
                {
                    "name": r.name,
                    "status": r.status,
                    "measured": r.measured,
                    "tolerance": r.tolerance,
                    "seed": r.seed,
                }
                for r in self.rows
            ],
        }
        return json.dumps(payload, indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# shared oracles and instance builders


def gradient_fd_max_relerr(obj, mu: ParticleEnsemble, rel_step: float = 1e-5) -> float:
    """Max deviation between the analytic field and the value-only oracle.

    The oracle is N times the centered difference of the empirical objective
    in each particle coordinate, with step rel_step * (1 + |x|). The error is
    normalized by the oracle's largest entry so near-zero components do not
    blow up the ratio.
    """
    n, d = mu.count, mu.dim
    analytic = obj.grad(mu).values
    fd = np.zeros((n, d))
    base = mu.positions
    for i in range(n):
        for c in range(d):
            h = rel_step * (1.0 + abs(base[i, c]))
            hi = base.copy()
            hi[i, c] += h
            lo = base.copy()
            lo[i, c] -= h
            fd[i, c] = (obj.value(ParticleEnsemble(hi))
                        - obj.value(ParticleEnsemble(lo))) / (2.0 * h) * n
    scale = max(float(np.max(np.abs(fd))), 1e-12)
    return float(np.max(np.abs(analytic - fd))) / scale


def _random_symmetric(rng, dim):
    a = rng.standard_normal((dim, dim))
    return 0.5 * (a + a.T)


def _all_five(rng):
    d3 = _random_symmetric(rng, 3) + 2.0 * np.eye(3)
    return [
        PotentialObjective("quadratic_form", dim=3, center=rng.standard_normal(3),
                           matrix=d3),
        InteractionObjective("quadratic_form", dim=3,
                             matrix=np.diag([1.5, 0.75, 2.0])),
        CoulombMMDObjective(rng.standard_normal((8, 3))),
        MatrixDecompositionObjective(2, 3, n_samples=20, teacher_count=5, seed=7),
        ICLObjective(2, 3, n_samples=20, teacher_count=5, seed=7),
    ]


def _analytic_three(rng):
    return [
        PotentialObjective("quadratic_form", dim=3,
                           matrix=_random_symmetric(rng, 3)),
        InteractionObjective("quadratic_form", dim=3,
                             matrix=_random_symmetric(rng, 3) + np.eye(3)),
        CoulombMMDObjective(rng.standard_normal((8, 3))),
    ]


def _cloud(rng, n, d):
    return ParticleEnsemble(rng.standard_normal((n, d)))


@functools.lru_cache(maxsize=4)
def _gp_mc(seed: int):
    """Monte-Carlo draws of the Hessian-guided field on the frozen 2-particle
    1D interaction instance (kernel blocks all equal -1)."""
    obj = InteractionObjective("quadratic", dim=1)
    mu = ParticleEnsemble([[0.0], [2.0]])
    rng = np.random.default_rng(np.random.SeedSequence((seed, 100)))
    draws = np.empty((GP_MC_SAMPLES, 2))
    for s in range(GP_MC_SAMPLES):
        draws[s] = sample_gp(obj, mu, rng).values[:, 0]
    return draws


# ---------------------------------------------------------------------------
# checks: each returns (measured, tolerance, passed)


def _check_grad_fd(rng):
    worst = 0.0
    for obj in _all_five(rng):
        mu = _cloud(rng, 10, obj.particle_dim)
        worst = max(worst, gradient_fd_max_relerr(obj, mu))
    return worst, 1e-5, worst <= 1e-5


def _check_hessian_symmetry(rng):
    worst = 0.0
    for obj in _analytic_three(rng):
        mu = _cloud(rng, 8, obj.particle_dim)
        op = HessianOperator(obj, mu, mode="exact_blocks")
        for _ in range(5):
            v = TangentField(rng.standard_normal(mu.positions.shape))
            w = TangentField(rng.standard_normal(mu.positions.shape))
            hv_w = l2_inner(op.apply(v), w)
            v_hw = l2_inner(v, op.apply(w))
            worst = max(worst, abs(hv_w - v_hw) / max(1.0, abs(hv_w)))
    return worst, 1e-10, worst <= 1e-10


def _check_dense_matvec(rng):
    worst = 0.0
    for obj in _analytic_three(rng):
        mu = _cloud(rng, 8, obj.particle_dim)
        op = HessianOperator(obj, mu, mode="exact_blocks")
        dense = assemble_dense(op)
        for _ in range(3):
            vec = rng.standard_normal(dense.shape[0])
            lhs = dense @ vec
            rhs = op.apply_flat(vec)
            worst = max(worst, float(np.max(np.abs(lhs - rhs)))
                        / max(1.0, float(np.max(np.abs(lhs)))))
    return worst, 1e-12, worst <= 1e-12


def _check_fd_vs_exact(rng):
    worst = 0.0
    instances = [
        (CoulombMMDObjective(rng.standard_normal((8, 3))), 10),
        (InteractionObjective("quadratic_form", dim=3,
                              matrix=_random_symmetric(rng, 3)), 8),
    ]
    for obj, n in instances:
        mu = _cloud(rng, n, obj.particle_dim)
        exact = HessianOperator(obj, mu, mode="exact_blocks")
        fd = HessianOperator(obj, mu, mode="fd_transport")
        for _ in range(3):
            v = TangentField(rng.standard_normal(mu.positions.shape))
            ev = exact.apply(v)
            fv = fd.apply(v)
            diff = l2_norm(TangentField(fv.values - ev.values))
            worst = max(worst, diff / max(l2_norm(ev), 1e-12))
    return worst, 1e-4, worst <= 1e-4


def _check_second_order(rng):
    instances = [
        PotentialObjective("quartic", dim=2),
        CoulombMMDObjective(rng.standard_normal((8, 3))),
        MatrixDecompositionObjective(2, 3, n_samples=10, teacher_count=5, seed=3),
    ]
    t = 0.02
    worst = math.inf
    for obj in instances:
        mu = _cloud(rng, 6, obj.particle_dim)
        v = TangentField(rng.standard_normal(mu.positions.shape))
        v = TangentField(v.values / l2_norm(v))
        f0 = obj.value(mu)
        gv = l2_inner(obj.grad(mu), v)
        op = HessianOperator(obj, mu)
        hvv = l2_inner(op.apply(v), v)

        def remainder(step):
            return abs(obj.value(push(mu, v, step)) - f0 - step * gv
                       - 0.5 * step * step * hvv)

        big, small = remainder(t), remainder(t / 2)
        if small < 1e-13 * max(1.0, abs(f0)):
            continue  # expansion is exact here, nothing to rate
        worst = min(worst, big / small)
    return worst, 6.0, worst >= 6.0


def _check_lanczos_oracle(rng):
    worst = 0.0
    beta = 0.3
    for dim in (8, 32, 64):
        a = _random_symmetric(rng, dim)
        v = rng.standard_normal(dim)
        want = dense_inv_sqrt(a, v, beta)
        got = lanczos_apply_inv_sqrt(lambda x: a @ x, v, beta, dim)
        worst = max(worst, float(np.linalg.norm(got - want))
                    / float(np.linalg.norm(want)))
    return worst, 1e-8, worst <= 1e-8


def _check_lanczos_monotone(rng):
    dim, beta = 32, 0.3
    a = _random_symmetric(rng, dim)
    v = rng.standard_normal(dim)
    want = dense_inv_sqrt(a, v, beta)
    errs = []
    for m in (2, 4, 8, dim):
        got = lanczos_apply_inv_sqrt(lambda x: a @ x, v, beta, m)
        errs.append(float(np.linalg.norm(got - want)))
    growth = max(errs[i + 1] - errs[i] for i in range(len(errs) - 1))
    return growth, 1e-10, growth <= 1e-10


def _check_gp_covariance(rng, seed):
    draws = _gp_mc(seed)
    worst = 0.0
    for i in range(2):
        for j in range(2):
            prods = draws[:, i] * draws[:, j]
            emp = float(np.mean(prods))
            se = float(np.std(prods, ddof=1)) / math.sqrt(len(prods))
            # hand kernel on this instance: every entry is 1
            err = abs(emp - 1.0)
            allowed = max(0.05, 3.0 * se)
            worst = max(worst, err / allowed)
    return worst, 1.0, worst <= 1.0


def _check_gp_norm_law(rng, seed):
    draws = _gp_mc(seed)
    emp = float(np.mean(np.mean(draws * draws, axis=1)))
    err = abs(emp - 1.0)  # (1/N^2) sum |A|_F^2 = 1 on this instance
    return err, 0.02, err <= 0.02


def _check_descent_lemma(rng):
    beta = 0.01
    tau = math.sqrt(beta)  # C_H = 1 for the plain quadratic potential
    obj = PotentialObjective("quadratic", dim=2)
    mu = _cloud(rng, 5, 2)
    cfg = OptimizerConfig(method="wsfn", tau=tau, beta=beta, lanczos_m=10)
    min_slack = math.inf
    for _ in range(200):
        f_now = obj.value(mu)
        g = flatten(obj.grad(mu))
        dense = assemble_dense(HessianOperator(obj, mu, mode="exact_blocks"))
        s = dense_inv_sqrt(dense, g, beta)
        bound = 0.5 * tau * math.sqrt(beta) * float(s @ s) / mu.count
        mu = step_wsfn(obj, mu, cfg)
        min_slack = min(min_slack, f_now - bound - obj.value(mu))
    return min_slack, -1e-10, min_slack >= -1e-10


def _check_linear_rate(rng):
    beta, tau = 0.5, 0.3
    center = rng.standard_normal(3)
    obj = PotentialObjective("quadratic", dim=3, center=center)
    target = ParticleEnsemble(np.tile(center, (4, 1)))
    mu = _cloud(rng, 4, 3)
    cfg = OptimizerConfig(method="wsfn", tau=tau, beta=beta, lanczos_m=8)
    rho = 1.0 - tau / math.sqrt(1.0 + beta)
    worst = 0.0
    dist = w2_exact(mu, target)
    for _ in range(20):
        mu = step_wsfn(obj, mu, cfg)
        nxt = w2_exact(mu, target)
        worst = max(worst, abs(nxt / dist - rho))
        dist = nxt
    return worst, 1e-12, worst <= 1e-12


def _check_newton_one_step(rng):
    center = rng.standard_normal(3)
    obj = PotentialObjective("quadratic_form", dim=3, center=center,
                             matrix=np.diag([1.0, 2.0, 0.5]))
    mu = _cloud(rng, 6, 3)
    target = ParticleEnsemble(np.tile(center, (6, 1)))
    moved = step_newton(obj, mu, tau=1.0)
    err = w2_exact(moved, target)
    return err, 1e-10, err <= 1e-10


def _check_degenerate_rate(rng):
    obj = PotentialObjective("quartic", dim=1)
    cfg = OptimizerConfig(method="wsfn", tau=1.0, beta=1e-4, lanczos_m=4)
    mu = ParticleEnsemble([[0.1]])
    worst = 0.0
    for _ in range(5):
        e_now = abs(float(mu.positions[0, 0]))
        mu = step_wsfn(obj, mu, cfg)
        e_next = abs(float(mu.positions[0, 0]))
        worst = max(worst, e_next / e_now**2)
    return worst, 60.0, worst <= 60.0


def _check_multiplier_table(rng):
    tau, beta, amp = 0.25, 0.5, 0.01
    obj = PotentialObjective("quadratic_form", dim=2, matrix=np.diag([2.0, -1.0]))
    flat_dim = 3 * 2
    probe = ParticleEnsemble(np.zeros((3, 2)))
    dense = assemble_dense(HessianOperator(obj, probe, mode="exact_blocks"))
    evals, evecs = np.linalg.eigh(dense)
    worst = 0.0
    cfg = OptimizerConfig(method="wsfn", tau=tau, beta=beta, lanczos_m=flat_dim)
    for idx in (0, flat_dim - 1):  # most negative and most positive eigenpairs
        lam = evals[idx]
        e = evecs[:, idx]
        mu = ParticleEnsemble(amp * e.reshape(3, 2))

        def observed(stepped):
            return float(flatten(TangentField(stepped.positions)) @ e) / amp

        got_gd = observed(step_wgf(obj, mu, tau))
        got_newton = observed(step_newton(obj, mu, tau))
        got_wsfn = observed(step_wsfn(obj, mu, cfg))
        want_wsfn = 1.0 - tau * lam / math.sqrt(lam * lam + beta)
        worst = max(
            worst,
            abs(got_gd - (1.0 - tau * lam)),
            abs(got_newton - (1.0 - tau)),
            abs(got_wsfn - want_wsfn),
        )
        if lam < 0 and not (got_newton < 1.0 < got_wsfn):
            return worst, 1e-8, False  # attraction/repulsion signs are wrong
    return worst, 1e-8, worst <= 1e-8


def _check_min_eig_oracle(rng):
    pair = InteractionObjective("quadratic", dim=1)
    mu_pair = ParticleEnsemble([[0.0], [2.0]])
    err = abs(min_eig_kernel(pair, mu_pair) - (-1.0))

    obj = CoulombMMDObjective(rng.standard_normal((12, 3)))
    mu = _cloud(rng, 30, 3)
    dense_val = min_eig_kernel(obj, mu)             # dense path (90 <= cap)
    iter_val = min_eig_kernel(obj, mu, cap=1)       # forces the iterative path
    worst = max(err, abs(dense_val - iter_val))
    return worst, 1e-7, worst <= 1e-7


def _check_w2_oracle(rng):
    frozen = abs(w2_exact(ParticleEnsemble([[0.0], [2.0]]),
                          ParticleEnsemble([[1.0], [3.0]])) - 1.0)
    worst = frozen
    for _ in range(5):
        a = _cloud(rng, 50, 1)
        b = ParticleEnsemble(rng.standard_normal((50, 1)) * 2.0 + 0.5)
        worst = max(worst, abs(w2_exact(a, b) - w2_1d(a, b)))
    return worst, 1e-12, worst <= 1e-12


def _check_lm_limits(rng):
    obj = PotentialObjective("quadratic", dim=3)
    mu = _cloud(rng, 5, 3)
    grad = obj.grad(mu).values

    small = step_lm(obj, mu, tau=1e-3)
    gd_dir = -1e-3 * grad
    lm_dir = small.positions - mu.positions
    rel_small = float(np.linalg.norm(lm_dir - gd_dir) / np.linalg.norm(gd_dir))

    big = step_lm(obj, mu, tau=1e3)
    newton = step_newton(obj, mu, tau=1.0)
    nw_dir = newton.positions - mu.positions
    rel_big = float(np.linalg.norm((big.positions - mu.positions) - nw_dir)
                    / np.linalg.norm(nw_dir))
    worst = max(rel_small / 0.05, rel_big / 0.01)
    return worst, 1.0, worst <= 1.0


_REGISTRY = {
    "grad_fd": _check_grad_fd,
    "hessian_symmetry": _check_hessian_symmetry,
    "dense_matvec": _check_dense_matvec,
    "fd_vs_exact": _check_fd_vs_exact,
    "second_order": _check_second_order,
    "lanczos_oracle": _check_lanczos_oracle,
    "lanczos_monotone": _check_lanczos_monotone,
    "gp_covariance": _check_gp_covariance,
    "gp_norm_law": _check_gp_norm_law,
    "descent_lemma": _check_descent_lemma,
    "linear_rate": _check_linear_rate,
    "newton_one_step": _check_newton_one_step,
    "degenerate_rate": _check_degenerate_rate,
    "multiplier_table": _check_multiplier_table,
    "min_eig_oracle": _check_min_eig_oracle,
    "w2_oracle": _check_w2_oracle,
    "lm_limits": _check_lm_limits,
}

CHECK_NAMES = tuple(sorted(_REGISTRY))
_NEEDS_SEED = ("gp_covariance", "gp_norm_law")


def run_property_suite(selection=None, seed: int = 0, jobs: int | None = None) -> CheckReport:
    """Execute the named checks (all of them by default) and build a report."""
    if selection is None:
        names = list(CHECK_NAMES)
    else:
        names = sorted(set(selection))
        unknown = [n for n in names if n not in _REGISTRY]
        if unknown:
            raise ValueError(
                f"unknown check name(s) {unknown}; known: {', '.join(CHECK_NAMES)}")

    order = {name: i for i, name in enumerate(CHECK_NAMES)}

    def execute(name):
        rng = np.random.default_rng(np.random.SeedSequence((seed, order[name])))
        fn = _REGISTRY[name]
        try:
            if name in _NEEDS_SEED:
                measured, tol, passed = fn(rng, seed)
            else:
                measured, tol, passed = fn(rng)
            status = "pass" if passed else "fail"
        except Exception:
            measured, tol, status = math.nan, math.nan, "fail"
        return CheckRow(name=name, status=status, measured=float(measured),
                        tolerance=float(tol), seed=seed)

    workers = jobs if jobs and jobs > 0 else min(8, len(names))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        rows = list(pool.map(execute, names))
    rows.sort(key=lambda r: r.name)
    return CheckReport(rows=rows)
