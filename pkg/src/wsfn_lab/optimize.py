"""Transport step rules, the perturbed-run controller, and the parameter
calculator for the escape analysis.

Step rules push particles along fields:

    wgf     mu' = (Id - tau grad F)_# mu
    wsfn    mu' = (Id - tau (H^2 + beta I)^{-1/2} grad F)_# mu
    newton  mu' = (Id - tau H^{-1} grad F)_# mu
    lm      mu' = (Id - (H + I/tau)^{-1} grad F)_# mu

wgf_isotropic and pwgf share the wgf step rule; they differ only in which
perturbation they pair with, so the method name is an identity label for the
experiment outputs.

Rows in a run trace are state indices: row n records F(mu^n) and the gradient
norm at mu^n. When a perturbation fires at iteration n the displacement is
applied before the transport step and row n records the post-perturbation
state, which is exactly the reference value the episode assessment at
n = n_pert + n_out compares against.
"""

from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .hessian import HessianOperator, assemble_dense, flatten, min_eig_kernel, unflatten
from .measure import ParticleEnsemble, TangentField, l2_norm, push, w2_exact
from .objectives import CapabilityError, Objective
from .perturb import (
    PerturbationBoundError,
    PerturbationSpec,
    apply_perturbation,
    sample_gp,
    sample_isotropic,
)
from .spectral import lanczos_apply_inv_sqrt

METHODS = ("wgf", "wgf_isotropic", "pwgf", "newton", "lm", "wsfn")
TRIGGERS = ("grad_norm", "grad_and_curvature", "stagnation")
PERTURB_MODES = ("none", "isotropic", "gp_hessian", "gp_rms_normalized")
EVENTS = ("step", "perturb", "episode_end", "terminate")

# default perturbation paired with each method when none is given explicitly
_METHOD_PERTURB = {
    "wgf": "none",
    "wgf_isotropic": "isotropic",
    "pwgf": "gp_hessian",
    "wsfn": "gp_hessian",
    "newton": "none",
    "lm": "none",
}


@dataclass
class OptimizerConfig:
    method: str = "wgf"
    tau: float = 1e-3
    beta: float = 1e-4            # preconditioner regularizer (wsfn)
    lanczos_m: int = 10
    eps: float = 0.0              # gradient-norm trigger threshold
    delta: float = 0.0            # curvature trigger threshold
    n_out: int = 100              # episode length
    F0: float = 0.0               # episode decrease threshold
    eta: float = 0.1              # perturbation amplitude
    kappa: float | None = None
    trigger: str = "grad_norm"
    perturb_mode: str | None = None
    max_iters: int = 1000
    seed: int = 0
    fd_step: float = 1e-4
    halt_on_failed_episode: bool = True

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.trigger not in TRIGGERS:
            raise ValueError(f"unknown trigger {self.trigger!r}")
        if self.perturb_mode is None:
            self.perturb_mode = _METHOD_PERTURB[self.method]
        if self.perturb_mode not in PERTURB_MODES:
            raise ValueError(f"unknown perturb_mode {self.perturb_mode!r}")
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.method == "wsfn" and self.beta <= 0:
            raise ValueError("wsfn needs beta > 0")
        if self.n_out < 1:
            raise ValueError("n_out must be >= 1")
        if self.F0 < 0:
            raise ValueError("F0 must be >= 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass
class TheoryConstants:
    """User-supplied regularity constants for the parameter calculator."""

    C_H: float    # Hessian operator-norm bound
    L_H: float    # Hessian Lipschitz constant along transport
    R_F: float    # relative-curvature bound near critical points
    zeta: float   # overall failure probability budget, in (0,1)
    F_min: float  # initial objective gap F(mu^0) - inf F

    def __post_init__(self):
        for name in ("C_H", "L_H", "R_F", "zeta", "F_min"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.zeta >= 1:
            raise ValueError("zeta must lie in (0, 1)")


@dataclass
class RunRow:
    iter: int
    loss: float
    grad_norm: float
    event: str
    elapsed_ms: float
    w2_to_target: float | None = None


@dataclass
class RunRecord:
    rows: list[RunRow] = field(default_factory=list)
    final: ParticleEnsemble | None = None
    reason: str = ""
    perturbations: int = 0
    episodes_succeeded: int = 0
    episodes_failed: int = 0
    # modes actually drawn, in first-use order (GP may fall back to isotropic)
    perturb_modes_used: list[str] = field(default_factory=list)

    @property
    def losses(self) -> np.ndarray:
        return np.array([r.loss for r in self.rows])

    @property
    def grad_norms(self) -> np.ndarray:
        return np.array([r.grad_norm for r in self.rows])


# ---------------------------------------------------------------------------
# step rules


def _finite_grad(obj, mu):
    g = obj.grad(mu)
    if not np.all(np.isfinite(g.values)):
        raise FloatingPointError("gradient is non-finite")
    return g


def _finite_value(obj, mu):
    f = obj.value(mu)
    if not math.isfinite(f):
        raise FloatingPointError(f"objective value is non-finite ({f})")
    return f


def step_wgf(obj: Objective, mu: ParticleEnsemble, tau: float) -> ParticleEnsemble:
    return push(mu, _finite_grad(obj, mu), -tau)


def step_wsfn(obj: Objective, mu: ParticleEnsemble, cfg: OptimizerConfig,
              grad: TangentField | None = None) -> ParticleEnsemble:
    g = grad if grad is not None else _finite_grad(obj, mu)
    gflat = flatten(g)
    if np.linalg.norm(gflat) == 0.0:
        return mu
    op = HessianOperator(obj, mu, fd_step=cfg.fd_step)
    direction = lanczos_apply_inv_sqrt(op.apply_flat, gflat, cfg.beta, cfg.lanczos_m)
    return push(mu, unflatten(direction, mu.count, mu.dim), -cfg.tau)


def step_newton(obj: Objective, mu: ParticleEnsemble, tau: float) -> ParticleEnsemble:
    op = HessianOperator(obj, mu, mode="exact_blocks")
    h = assemble_dense(op)
    cond = np.linalg.cond(h)
    if not np.isfinite(cond) or cond > 1e12:
        raise np.linalg.LinAlgError(
            f"Hessian condition number {cond:.3e} is too large for a plain "
            "Newton solve; use the lm or wsfn method instead"
        )
    g = flatten(_finite_grad(obj, mu))
    direction = np.linalg.solve(h, g)
    return push(mu, unflatten(direction, mu.count, mu.dim), -tau)


def step_lm(obj: Objective, mu: ParticleEnsemble, tau: float) -> ParticleEnsemble:
    op = HessianOperator(obj, mu, mode="exact_blocks")
    h = assemble_dense(op)
    shifted = h + np.eye(h.shape[0]) / tau
    try:
        factor = scipy.linalg.cho_factor(shifted)
    except scipy.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            "H + I/tau is not positive definite: curvature lies below "
            f"-1/tau (tau={tau:.3g}); decrease tau or use wsfn"
        ) from exc
    g = flatten(_finite_grad(obj, mu))
    direction = scipy.linalg.cho_solve(factor, g)
    return push(mu, unflatten(direction, mu.count, mu.dim), -1.0)


def _take_step(obj, mu, cfg, grad):
    if cfg.method in ("wgf", "wgf_isotropic", "pwgf"):
        return push(mu, grad, -cfg.tau)
    if cfg.method == "wsfn":
        return step_wsfn(obj, mu, cfg, grad=grad)
    if cfg.method == "newton":
        return step_newton(obj, mu, cfg.tau)
    return step_lm(obj, mu, cfg.tau)


# ---------------------------------------------------------------------------
# the run controller


def _perturbation_rng(seed, trial, iteration):
    return np.random.default_rng(
        np.random.SeedSequence((int(seed), int(trial), int(iteration))))


def _draw_perturbation(obj, mu, mode, rng):
    """Returns (field, effective_mode). GP modes fall back to isotropic noise
    when the objective cannot expose kernel blocks."""
    if mode == "isotropic":
        return sample_isotropic(mu.count, mu.dim, rng), mode
    try:
        return sample_gp(obj, mu, rng), mode
    except CapabilityError:
        return sample_isotropic(mu.count, mu.dim, rng), "isotropic"


def _trigger_fires(cfg, obj, mu, grad_norm, losses, n):
    if cfg.trigger == "grad_norm":
        return grad_norm <= cfg.eps
    if cfg.trigger == "grad_and_curvature":
        if grad_norm > cfg.eps:
            return False
        return min_eig_kernel(obj, mu) < -cfg.delta
    # stagnation: the loss gained less than F0 over the last n_out steps
    if n - cfg.n_out < 0:
        return False
    return losses[n - cfg.n_out] - losses[n] <= cfg.F0


def run(obj: Objective, mu0: ParticleEnsemble, cfg: OptimizerConfig,
        theory: TheoryConstants | None = None, trial: int = 0,
        w2_target: ParticleEnsemble | None = None) -> RunRecord:
    """Run one trajectory and record the per-iteration trace.

    The trace has max_iters + 1 rows (states 0..max_iters) unless a failed
    episode halts it early, in which case the returned ensemble is the
    snapshot taken right after that episode's perturbation.

    Passing `theory` derives tau, kappa, n_out, F0 and eta from the
    parameter calculator at (cfg.beta, cfg.delta, cfg.eps), replacing the
    hand-set values; cfg.eps must then be finite.
    """
    if w2_target is not None and (w2_target.count != mu0.count
                                  or w2_target.dim != mu0.dim):
        raise ValueError("w2_target must match the ensemble count and dim")
    if theory is not None:
        if not math.isfinite(cfg.eps) or cfg.delta <= 0:
            raise ValueError(
                "deriving parameters from theory constants needs finite eps "
                "and positive delta in the config")
        derived = theoretical_params(theory, cfg.beta, cfg.delta, cfg.eps)
        cfg = dataclasses.replace(
            cfg, tau=derived["tau"], kappa=derived["kappa"],
            n_out=derived["n_out"], F0=derived["F0"], eta=derived["eta"])

    record = RunRecord()
    t0 = time.perf_counter()
    perturb_enabled = cfg.perturb_mode != "none"
    spec = PerturbationSpec(mode=cfg.perturb_mode, eta=cfg.eta,
                            kappa=cfg.kappa) if perturb_enabled else None

    def log(n, loss, gnorm, event, mu):
        w2 = w2_exact(mu, w2_target) if w2_target is not None else None
        record.rows.append(RunRow(
            iter=n, loss=loss, grad_norm=gnorm, event=event,
            elapsed_ms=(time.perf_counter() - t0) * 1e3, w2_to_target=w2,
        ))

    mu = mu0
    f = _finite_value(obj, mu)
    g = _finite_grad(obj, mu)
    gnorm = l2_norm(g)
    losses = [f]
    n_pert = 0
    episode = None  # (loss right after perturbing, snapshot ensemble)

    try:
        for n in range(cfg.max_iters + 1):
            event = "step"
            if (perturb_enabled and n - n_pert > cfg.n_out
                    and _trigger_fires(cfg, obj, mu, gnorm, losses, n)):
                rng = _perturbation_rng(cfg.seed, trial, n)
                xi, effective = _draw_perturbation(obj, mu, spec.mode, rng)
                eff_spec = spec if effective == spec.mode else PerturbationSpec(
                    mode="isotropic", eta=spec.eta, kappa=spec.kappa)

                def redraw():
                    return _draw_perturbation(obj, mu, eff_spec.mode, rng)[0]

                mu = apply_perturbation(mu, xi, eff_spec, resample=redraw)
                if eff_spec.mode not in record.perturb_modes_used:
                    record.perturb_modes_used.append(eff_spec.mode)
                n_pert = n
                f = _finite_value(obj, mu)
                g = _finite_grad(obj, mu)
                gnorm = l2_norm(g)
                losses[n] = f
                episode = (f, mu)
                record.perturbations += 1
                event = "perturb"
            elif episode is not None and n == n_pert + cfg.n_out:
                start_loss, snapshot = episode
                episode = None
                if start_loss - f <= cfg.F0:
                    record.episodes_failed += 1
                    if cfg.halt_on_failed_episode:
                        log(n, f, gnorm, "terminate", mu)
                        record.final = snapshot
                        record.reason = (
                            f"episode gained {start_loss - f:.6g} <= F0={cfg.F0:.6g}; "
                            "returned the post-perturbation iterate"
                        )
                        return record
                    event = "episode_end"
                else:
                    record.episodes_succeeded += 1
                    event = "episode_end"

            log(n, f, gnorm, event, mu)
            if n == cfg.max_iters:
                break
            mu = _take_step(obj, mu, cfg, g)
            f = _finite_value(obj, mu)
            g = _finite_grad(obj, mu)
            gnorm = l2_norm(g)
            losses.append(f)
    except (FloatingPointError, np.linalg.LinAlgError,
            PerturbationBoundError) as exc:
        record.final = mu
        record.reason = f"aborted: {exc}"
        return record

    record.final = mu
    record.reason = "max_iters reached"
    return record


# ---------------------------------------------------------------------------
# parameter calculator


def theoretical_params(theory: TheoryConstants, beta: float, delta: float,
                       eps: float, hess_norm: float | None = None,
                       c_abs: float | None = None,
                       zeta_ep: float | None = None) -> dict:
    """Evaluate the escape-analysis parameter formulas.

    delta_tilde = delta / sqrt(delta^2 + beta)
    tau     = min(1, sqrt(beta) / C_H)
    kappa   = hess_norm sqrt(2 log(4 / zeta_ep))
    n_out   = 2 / log(1 + tau dt)
              * log(16 sqrt(2 C_H tau) kappa
                    / (sqrt(e beta) |c| log^(1/2)(1 + tau dt)))
    F0      = beta log^2(3/2)
              / (144 L_H^2 (1/(2 sqrt(beta)) + 2 C_H/(pi beta))^2 (tau n_out)^3)
    eta     = 2 F0 / (kappa (eps + sqrt(eps^2 + 2 C_H F0)))

    with dt = delta_tilde. The per-episode budget is
    zeta_ep = (4/3) zeta / ceil(F_min / F0) and the default
    |c| = sqrt(2 pi) delta zeta_ep / 4 is its lower bound. zeta_ep and F0
    depend on each other, so they are resolved by a fixed-point loop seeded
    with the single-episode value (4/3) zeta; the coupling is logarithmic and
    contracts in a handful of passes. n_out enters F0 as the integer ceiling
    the run loop actually uses. hess_norm defaults to C_H since the
    Hilbert-Schmidt kernel norm never exceeds the operator bound. Passing
    zeta_ep explicitly skips the fixed point.

    Also reports the trigger-admissibility flag
    eps (R_F / sqrt(beta) + 2 L_H / (pi beta)) <= delta_tilde^(3/2).
    """
    if beta <= 0 or delta <= 0 or eps < 0:
        raise ValueError("beta and delta must be positive, eps non-negative")
    if hess_norm is None:
        hess_norm = theory.C_H
    if hess_norm <= 0:
        raise ValueError("hess_norm must be positive")
    if zeta_ep is not None and not 0 < zeta_ep < 4:
        raise ValueError("zeta_ep must lie in (0, 4)")

    delta_tilde = delta / math.sqrt(delta * delta + beta)
    tau = min(1.0, math.sqrt(beta) / theory.C_H)
    log1p_td = math.log1p(tau * delta_tilde)

    f0_prefactor = (beta * math.log(1.5) ** 2) / (
        144.0 * theory.L_H**2
        * (1.0 / (2.0 * math.sqrt(beta)) + 2.0 * theory.C_H / (math.pi * beta)) ** 2
    )

    def evaluate(z_ep):
        kap = hess_norm * math.sqrt(2.0 * math.log(4.0 / z_ep))
        c_use = c_abs if c_abs is not None else (
            math.sqrt(2.0 * math.pi) * delta * z_ep / 4.0)
        arg = (16.0 * math.sqrt(2.0 * theory.C_H * tau) * kap
               / (math.sqrt(math.e * beta) * c_use * math.sqrt(log1p_td)))
        if arg <= 1.0:
            raise ValueError(
                "episode-length formula degenerates (its log argument is <= 1); "
                "the requested beta/delta regime lies outside the analysis")
        n_real = (2.0 / log1p_td) * math.log(arg)
        n_int = max(1, math.ceil(n_real))
        f0 = f0_prefactor / (tau * n_int) ** 3
        return kap, c_use, n_real, n_int, f0

    if zeta_ep is not None:
        z_ep = zeta_ep
        kappa, c_use, n_out_real, n_out, f0 = evaluate(z_ep)
    else:
        z_ep = (4.0 / 3.0) * theory.zeta  # optimistic seed: a single episode
        for _ in range(60):
            kappa, c_use, n_out_real, n_out, f0 = evaluate(z_ep)
            z_new = (4.0 / 3.0) * theory.zeta / math.ceil(theory.F_min / f0)
            if abs(z_new - z_ep) <= 1e-13 * z_ep:
                z_ep = z_new
                break
            z_ep = z_new
        kappa, c_use, n_out_real, n_out, f0 = evaluate(z_ep)

    eta = 2.0 * f0 / (kappa * (eps + math.sqrt(eps * eps + 2.0 * theory.C_H * f0)))
    admissible = (
        eps * (theory.R_F / math.sqrt(beta) + 2.0 * theory.L_H / (math.pi * beta))
        <= delta_tilde**1.5
    )
    return {
        "tau": tau,
        "kappa": kappa,
        "n_out": n_out,
        "n_out_real": n_out_real,
        "F0": f0,
        "eta": eta,
        "delta_tilde": delta_tilde,
        "zeta_ep": z_ep,
        "c_abs": c_use,
        "admissible": admissible,
    }


# ---------------------------------------------------------------------------
# trace serialization

CSV_COLUMNS = ("trial", "iter", "loss", "grad_norm", "event", "elapsed_ms")


def write_run_csv(path, records, include_timing: bool = False,
                  include_w2: bool | None = None) -> None:
    """Write merged trial traces as CSV, sorted by (trial, iter).

    `records` maps trial index to RunRecord. Floats are written with repr
    (shortest round-trip), so identical runs give byte-identical files.
    elapsed_ms cells stay empty unless include_timing is set: wall-clock
    values would break that byte identity. include_w2=None auto-detects.
    """
    items = sorted(records.items())
    if include_w2 is None:
        include_w2 = any(row.w2_to_target is not None
                         for _, rec in items for row in rec.rows)
    header = list(CSV_COLUMNS) + (["w2_to_target"] if include_w2 else [])
    lines = [",".join(header)]
    for trial, rec in items:
        for row in rec.rows:
            cells = [
                str(trial),
                str(row.iter),
                repr(row.loss),
                repr(row.grad_norm),
                row.event,
                repr(row.elapsed_ms) if include_timing else "",
            ]
            if include_w2:
                cells.append("" if row.w2_to_target is None else repr(row.w2_to_target))
            lines.append(",".join(cells))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_run_csv(path) -> dict:
    """Read a trace CSV back as {trial: {"iter": [...], "loss": [...],
    "grad_norm": [...], "event": [...], "w2_to_target": [...]}}."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    header = lines[0].split(",")
    for col in CSV_COLUMNS:
        if col not in header:
            raise ValueError(f"{path}: missing column {col!r}")
    idx = {name: header.index(name) for name in header}
    out: dict = {}
    for ln in lines[1:]:
        cells = ln.split(",")
        trial = int(cells[idx["trial"]])
        bucket = out.setdefault(trial, {
            "iter": [], "loss": [], "grad_norm": [], "event": [],
            "w2_to_target": [],
        })
        bucket["iter"].append(int(cells[idx["iter"]]))
        bucket["loss"].append(float(cells[idx["loss"]]))
        bucket["grad_norm"].append(float(cells[idx["grad_norm"]]))
        bucket["event"].append(cells[idx["event"]])
        if "w2_to_target" in idx:
            raw = cells[idx["w2_to_target"]]
            bucket["w2_to_target"].append(float(raw) if raw else math.nan)
    return out
