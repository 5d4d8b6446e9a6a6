"""Command-line entry point: `wsfn-lab run|verify|params`.

run    materializes a preset (or reads a config JSON), executes every
       method x trial in a thread pool, and writes per-method CSV traces,
       a metadata sidecar, and a loss-curve SVG.
verify wraps the property suite.
params prints the escape-analysis parameter table.

Exit codes — run: 0 ok, 2 bad config, 3 numeric failure (partial traces are
still written); verify: 0 pass, 1 fail; params: 2 on invalid constants.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click

from . import __version__
from .objectives import make_objective
from .optimize import read_run_csv, run, theoretical_params, write_run_csv, TheoryConstants
from .presets import (
    PRESET_NAMES,
    apply_scale,
    build_optimizer_config,
    init_ensemble,
    method_seed,
    preset_config,
    w2_reference_ensemble,
)
from .svgplot import render_loss_curves
from .verify import CHECK_NAMES, run_property_suite

_REQUIRED_SECTIONS = ("objective", "optimizers", "trials", "iters", "seed", "init", "output")


def _load_config(source: str) -> dict:
    if source in PRESET_NAMES:
        return preset_config(source)
    path = Path(source)
    if not path.exists():
        raise click.UsageError(
            f"{source!r} is neither a preset ({', '.join(PRESET_NAMES)}) "
            "nor a config file")
    try:
        with open(path, encoding="utf-8") as fh:
            config = json.load(fh)
    except json.JSONDecodeError as exc:
        raise click.UsageError(f"{source}: not valid JSON ({exc})")
    if not isinstance(config, dict):
        raise click.UsageError(f"{source}: config must be a JSON object")
    return config


def _validate_config(config: dict) -> None:
    for section in _REQUIRED_SECTIONS:
        if section not in config:
            raise click.UsageError(f"config is missing the {section!r} section")
    if not isinstance(config["optimizers"], list) or not config["optimizers"]:
        raise click.UsageError("config section 'optimizers' must be a non-empty list")
    for i, opt in enumerate(config["optimizers"]):
        if "method" not in opt:
            raise click.UsageError(f"optimizers[{i}] is missing the 'method' field")
    for key in ("count", "dim", "scale"):
        if key not in config["init"]:
            raise click.UsageError(f"config section 'init' is missing {key!r}")


def _resolve_jobs(flag_value: int | None, task_count: int) -> int:
    env = os.environ.get("WSFN_LAB_JOBS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise click.UsageError(f"WSFN_LAB_JOBS={env!r} is not an integer")
    if flag_value:
        return max(1, flag_value)
    return max(1, min(8, os.cpu_count() or 1, task_count))


@click.group()
@click.version_option(__version__, prog_name="wsfn-lab")
def main():
    """Particle-transport optimization lab: experiment runs, property
    verification, and theory parameter tables."""


@main.command("run")
@click.argument("config_source", metavar="CONFIG")
@click.option("--scale", type=float, default=1.0, show_default=True,
              help="Shrink particle counts and iterations by this factor "
                   "(floors: 20 particles, 50 iterations).")
@click.option("--trials", type=int, default=None, help="Override trial count.")
@click.option("--iters", type=int, default=None, help="Override iteration budget.")
@click.option("--methods", default=None,
              help="Comma-separated subset of the config's methods.")
@click.option("--output", type=click.Path(), default=None,
              help="Output directory (default: the config's 'output').")
@click.option("--seed", type=int, default=None, help="Override the base seed.")
@click.option("--jobs", type=int, default=None,
              help="Worker threads (env WSFN_LAB_JOBS wins over this flag).")
@click.option("--timing", is_flag=True,
              help="Fill the elapsed_ms CSV column (forfeits byte-identical CSVs).")
def cmd_run(config_source, scale, trials, iters, methods, output, seed, jobs, timing):
    """Run an experiment preset or config file and write traces."""
    config = _load_config(config_source)
    _validate_config(config)
    if scale != 1.0:
        try:
            config = apply_scale(config, scale)
        except ValueError as exc:
            raise click.UsageError(str(exc))
    if trials is not None:
        config["trials"] = trials
    if iters is not None:
        config["iters"] = iters
    if seed is not None:
        config["seed"] = seed
    if output is not None:
        config["output"] = str(output)
    if methods is not None:
        wanted = [m.strip() for m in methods.split(",") if m.strip()]
        if not wanted:
            raise click.UsageError("--methods was given but names no methods")
        known = [opt["method"] for opt in config["optimizers"]]
        unknown = [m for m in wanted if m not in known]
        if unknown:
            raise click.UsageError(
                f"--methods {unknown} not in this config (has: {', '.join(known)})")
        config["optimizers"] = [o for o in config["optimizers"]
                                if o["method"] in wanted]
    if config["trials"] < 1 or config["iters"] < 1:
        raise click.UsageError("'trials' and 'iters' must be >= 1")

    try:
        objective = make_objective(config["objective"])
    except (ValueError, KeyError) as exc:
        raise click.UsageError(f"objective section: {exc}")

    try:
        w2_ref = w2_reference_ensemble(config)
    except (ValueError, KeyError) as exc:
        raise click.UsageError(f"w2_reference section: {exc}")

    n_trials = int(config["trials"])
    n_iters = int(config["iters"])
    base_seed = int(config["seed"])
    opts = config["optimizers"]

    initials = []
    for trial in range(n_trials):
        mu0 = init_ensemble(config, trial)
        initials.append((mu0, objective.value(mu0)))

    tasks = []
    resolved = {}
    try:
        for mi, opt in enumerate(opts):
            mseed = method_seed(base_seed, mi)
            for trial in range(n_trials):
                mu0, f_init = initials[trial]
                cfg = build_optimizer_config(opt, n_iters, mseed, initial_loss=f_init)
                resolved.setdefault(opt["method"], {})[trial] = cfg
                tasks.append((opt["method"], trial, mu0, cfg))
    except (TypeError, ValueError) as exc:
        raise click.UsageError(f"optimizers section: {exc}")

    workers = _resolve_jobs(jobs, len(tasks))
    t_start = time.perf_counter()

    def execute(task):
        method, trial, mu0, cfg = task
        return method, trial, run(objective, mu0, cfg, trial=trial, w2_target=w2_ref)

    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(execute, tasks))

    by_method: dict = {}
    for method, trial, record in results:
        by_method.setdefault(method, {})[trial] = record

    outdir = Path(config["output"])
    outdir.mkdir(parents=True, exist_ok=True)

    for method, records in by_method.items():
        write_run_csv(outdir / f"{method}.csv", records, include_timing=timing,
                      include_w2=w2_ref is not None)

    meta = {
        "tool": {"name": "wsfn-lab", "version": __version__},
        "config": config,
        "timing_in_csv": bool(timing),
        "wall_seconds": round(time.perf_counter() - t_start, 3),
        "methods": {},
    }
    for mi, opt in enumerate(opts):
        method = opt["method"]
        per_trial = {}
        for trial, record in sorted(by_method[method].items()):
            cfg = resolved[method][trial]
            per_trial[str(trial)] = {
                "F0": cfg.F0,
                "initial_loss": initials[trial][1],
                "final_loss": record.rows[-1].loss,
                "rows": len(record.rows),
                "reason": record.reason,
                "perturbations": record.perturbations,
                "episodes_succeeded": record.episodes_succeeded,
                "episodes_failed": record.episodes_failed,
                "perturb_modes_used": record.perturb_modes_used,
                "elapsed_ms": round(record.rows[-1].elapsed_ms, 3),
            }
        cfg0 = dataclasses.asdict(resolved[method][0])
        meta["methods"][method] = {
            "optimizer": cfg0,
            "perturbation_seed": method_seed(base_seed, mi),
            "trials": per_trial,
        }
    with open(outdir / "metadata.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")

    # the plot is pure post-processing of the CSVs just written
    series = {}
    for method in by_method:
        parsed = read_run_csv(outdir / f"{method}.csv")
        series[method] = [parsed[t]["loss"] for t in sorted(parsed)]
    render_loss_curves(series, outdir / "loss_curves.svg",
                       title=str(config.get("name", config_source)))

    aborted = [(m, t) for m, recs in by_method.items()
               for t, r in recs.items() if r.reason.startswith("aborted")]
    for method, records in sorted(by_method.items()):
        finals = [records[t].rows[-1].loss for t in sorted(records)]
        click.echo(f"{method}: final losses {[f'{v:.6g}' for v in finals]}")
    click.echo(f"artifacts in {outdir}")
    if aborted:
        click.echo(f"numeric failure in {aborted}; partial traces written", err=True)
        sys.exit(3)


@main.command("verify")
@click.option("--select", default=None,
              help="Comma-separated check names (default: all).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--json", "json_out", type=click.Path(), default=None,
              help="Also write the report as JSON.")
@click.option("--jobs", type=int, default=None,
              help="Worker threads (env WSFN_LAB_JOBS wins over this flag).")
def cmd_verify(select, seed, json_out, jobs):
    """Run the property suite and report pass/fail per check."""
    selection = None
    if select is not None:
        selection = [s.strip() for s in select.split(",") if s.strip()]
        if not selection:
            raise click.UsageError("--select was given but names no checks")
    try:
        workers = _resolve_jobs(jobs, len(selection) if selection else len(CHECK_NAMES))
        report = run_property_suite(selection=selection, seed=seed, jobs=workers)
    except ValueError as exc:
        raise click.UsageError(str(exc))
    click.echo(report.to_table())
    if json_out:
        with open(json_out, "w", encoding="utf-8") as fh:
            fh.write(report.to_json() + "\n")
    if not report.overall_pass:
        sys.exit(1)


@main.command("params")
@click.option("--c-h", "c_h", type=float, required=True, help="Hessian bound C_H.")
@click.option("--l-h", "l_h", type=float, required=True, help="Hessian Lipschitz L_H.")
@click.option("--r-f", "r_f", type=float, required=True, help="Relative curvature R_F.")
@click.option("--zeta", type=float, required=True, help="Failure budget in (0,1).")
@click.option("--f-min", "f_min", type=float, required=True, help="Initial gap.")
@click.option("--beta", type=float, required=True, help="Preconditioner regularizer.")
@click.option("--delta", type=float, required=True, help="Curvature threshold.")
@click.option("--eps", type=float, required=True, help="Gradient-norm threshold.")
@click.option("--hess-norm", type=float, default=None,
              help="Hilbert-Schmidt norm for kappa (default: C_H).")
@click.option("--c-abs", "c_abs", type=float, default=None,
              help="Assumed |c| in the episode-length log (default: lower bound).")
@click.option("--zeta-ep", "zeta_ep", type=float, default=None,
              help="Fix the per-episode budget instead of solving for it.")
def cmd_params(c_h, l_h, r_f, zeta, f_min, beta, delta, eps, hess_norm, c_abs, zeta_ep):
    """Print the escape-analysis parameters for given constants."""
    try:
        theory = TheoryConstants(C_H=c_h, L_H=l_h, R_F=r_f, zeta=zeta, F_min=f_min)
        values = theoretical_params(theory, beta, delta, eps,
                                    hess_norm=hess_norm, c_abs=c_abs,
                                    zeta_ep=zeta_ep)
    except ValueError as exc:
        raise click.UsageError(str(exc))
    order = ("tau", "kappa", "n_out", "n_out_real", "F0", "eta",
             "delta_tilde", "zeta_ep", "c_abs")
    for key in order:
        v = values[key]
        click.echo(f"{key:12s} {v!r}" if isinstance(v, float) else f"{key:12s} {v}")
    click.echo(f"{'admissible':12s} {str(values['admissible']).lower()}")


if __name__ == "__main__":
    main()
