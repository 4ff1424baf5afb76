"""Command-line front end.

Subcommands:

* ``simulate``    emit one synthesized measurement batch as CSV
* ``solve``       run one estimator on a batch CSV, print key=value lines
* ``crlb``        print the theoretical error budgets for a scenario
* ``experiment``  run a named study sweep and write result CSVs

Batch CSV format: header ``bs_index,t,rho,sigma``; times in seconds,
distances in meters.  Exit status 0 when the requested work completed
(individual Monte Carlo trial failures are counted in the outputs, not
fatal); 1 on configuration or I/O errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import analysis
from .errors import ConfigError, SeqlocError
from .experiments import (
    EXPERIMENT_NAMES,
    default_scenario,
    default_spec,
    run_experiment,
    write_experiment,
)
from .config import load_config, scenario_from_config
from .model import MeasurementBatch, VelocityPrior
from .simulate import ESTIMATOR_KINDS, synthesize_batch, trial_rng
from .solvers import (
    solve_drift_only,
    solve_joint_velocity,
    solve_known_velocity,
    solve_prior_velocity,
)

BATCH_COLUMNS = "bs_index,t,rho,sigma"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seqloc",
        description="sequential-pseudorange localization toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, default=None,
                       help="JSON scenario/experiment config")
        p.add_argument("--seed", type=int, default=None,
                       help="override the RNG seed")

    p_sim = sub.add_parser("simulate", help="emit one batch as CSV")
    common(p_sim)
    p_sim.add_argument("--fix", type=int, default=0,
                       help="fix index along the TDMA schedule")
    p_sim.add_argument("--out", type=Path, default=None,
                       help="directory for batch.csv (default: stdout)")

    p_solve = sub.add_parser("solve", help="solve one batch")
    common(p_solve)
    p_solve.add_argument("--batch", type=Path, required=True,
                         help="batch CSV (bs_index,t,rho,sigma)")
    p_solve.add_argument("--estimator", choices=ESTIMATOR_KINDS,
                         required=True)
    p_solve.add_argument("--velocity", type=str, default=None,
                         help="known velocity 'vx,vy[,vz]' (kvd)")
    p_solve.add_argument("--prior-mean", type=str, default=None,
                         help="prior mean velocity 'vx,vy[,vz]' (pvd)")
    p_solve.add_argument("--prior-std", type=float, default=2.0,
                         help="per-axis prior std in m/s (pvd)")
    p_solve.add_argument("--epoch", type=float, default=None,
                         help="localization epoch (default: first time)")

    p_crlb = sub.add_parser("crlb", help="theoretical error budgets only")
    common(p_crlb)
    p_crlb.add_argument("--prior-std", type=float, default=2.0)

    p_exp = sub.add_parser("experiment", help="run a named study")
    p_exp.add_argument("name", choices=EXPERIMENT_NAMES)
    common(p_exp)
    p_exp.add_argument("--out", type=Path, default=Path("results"),
                       help="output directory (default: ./results)")
    p_exp.add_argument("--trials", type=int, default=None,
                       help="Monte Carlo trials per sweep point")
    p_exp.add_argument("--svg", action="store_true",
                       help="also write an SVG chart")
    p_exp.add_argument("--threads", type=int, default=1,
                       help="worker threads for the trials")
    return parser


def _scenario(args, experiment: str | None = None, trials: int | None = None):
    if args.config is not None:
        raw = load_config(args.config)
        return scenario_from_config(raw, experiment=experiment,
                                    seed=args.seed, trials=trials)
    cfg = default_scenario(experiment)
    if args.seed is not None:
        from .simulate import with_seed
        cfg = with_seed(cfg, args.seed)
    if trials is not None:
        from dataclasses import replace
        cfg = replace(cfg, n_trials=trials)
    spec = default_spec(experiment) if experiment is not None else None
    return cfg, spec


def _parse_vector(text: str, what: str) -> np.ndarray:
    try:
        vec = np.array([float(x) for x in text.split(",")])
    except ValueError as exc:
        raise ConfigError(f"cannot parse {what} {text!r}") from exc
    if vec.size not in (2, 3):
        raise ConfigError(f"{what} must have 2 or 3 components")
    return vec


def _batch_csv_lines(batch: MeasurementBatch):
    lines = [BATCH_COLUMNS]
    for i in range(batch.m):
        lines.append(f"{batch.bs_index[i]},{batch.t[i]:.17g},"
                     f"{batch.rho[i]:.17g},{batch.sigma[i]:.17g}")
    return lines


def _read_batch_csv(path: Path, epoch: float | None) -> MeasurementBatch:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read batch {path}: {exc}") from exc
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].strip() != BATCH_COLUMNS:
        raise ConfigError(f"batch CSV must start with '{BATCH_COLUMNS}'")
    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 4:
            raise ConfigError(f"malformed batch row: {ln!r}")
        rows.append((int(parts[0]), float(parts[1]), float(parts[2]),
                     float(parts[3])))
    if not rows:
        raise ConfigError("batch CSV has no measurements")
    t = np.array([r[1] for r in rows])
    return MeasurementBatch(
        bs_index=np.array([r[0] for r in rows], dtype=int),
        t=t,
        rho=np.array([r[2] for r in rows]),
        sigma=np.array([r[3] for r in rows]),
        t_l=float(t[0]) if epoch is None else float(epoch))


def _cmd_simulate(args) -> int:
    cfg, _ = _scenario(args)
    rng = trial_rng(cfg.seed, 0)
    traj = cfg.trajectory.realize(rng)
    batch, _ = synthesize_batch(cfg, args.fix, rng, trajectory=traj)
    lines = _batch_csv_lines(batch)
    if args.out is None:
        print("\n".join(lines))
    else:
        args.out.mkdir(parents=True, exist_ok=True)
        path = args.out / "batch.csv"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        print(f"wrote {path}")
    return 0


def _print_report(report, n_dim: int) -> None:
    params = report.params
    print(f"converged={str(report.converged).lower()}")
    print(f"iterations={report.iterations}")
    print(f"final_step_norm={report.final_step_norm:.9g}")
    axes = "xyz"[:n_dim]
    for axis, value in zip(axes, params.p):
        print(f"p{axis}={value:.9g}")
    print(f"clock_offset_m={params.b:.9g}")
    print(f"clock_drift_mps={params.d:.9g}")
    if hasattr(params, "v"):
        for axis, value in zip(axes, params.v):
            print(f"v{axis}={value:.9g}")
    pos_var = float(np.trace(report.covariance[:n_dim, :n_dim]))
    print(f"pos_std_m={np.sqrt(pos_var):.9g}")


def _cmd_solve(args) -> int:
    cfg, _ = _scenario(args)
    batch = _read_batch_csv(args.batch, args.epoch)
    n = cfg.bs.n_dim
    if args.estimator == "kvd":
        v = (np.zeros(n) if args.velocity is None
             else _parse_vector(args.velocity, "velocity"))
        report = solve_known_velocity(batch, cfg.bs, v)
    elif args.estimator == "d":
        report = solve_drift_only(batch, cfg.bs)
    elif args.estimator == "uvd":
        report = solve_joint_velocity(batch, cfg.bs)
    else:
        mean = (np.zeros(n) if args.prior_mean is None
                else _parse_vector(args.prior_mean, "prior mean"))
        prior = VelocityPrior.isotropic(mean, args.prior_std)
        report = solve_prior_velocity(batch, cfg.bs, prior)
    print(f"estimator={args.estimator}")
    _print_report(report, n)
    return 0


def _cmd_crlb(args) -> int:
    cfg, _ = _scenario(args)
    rng = trial_rng(cfg.seed, 0)
    traj = cfg.trajectory.realize(rng)
    batch, truth = synthesize_batch(cfg, 0, trajectory=traj, noiseless=True)
    prior = VelocityPrior.isotropic(truth.v, args.prior_std)
    budgets = {
        "kvd": analysis.theoretical_rmse("kvd", batch, cfg.bs, truth),
        "uvd": analysis.theoretical_rmse("uvd", batch, cfg.bs, truth),
        "pvd": analysis.theoretical_rmse("pvd", batch, cfg.bs, truth,
                                         prior=prior),
        "d": analysis.bias_drift_only(batch, cfg.bs, truth),
    }
    for kind in ("kvd", "pvd", "uvd", "d"):
        budget = budgets[kind]
        crlb_rmse = float(np.sqrt(np.trace(budget.variance)))
        print(f"{kind}_crlb_rmse_m={crlb_rmse:.9g}")
        print(f"{kind}_theoretical_rmse_m={budget.rmse:.9g}")
    return 0


def _cmd_experiment(args) -> int:
    cfg, spec = _scenario(args, experiment=args.name, trials=args.trials)
    result = run_experiment(spec, cfg, threads=args.threads)
    files = write_experiment(result, args.out, svg=args.svg)
    for row in result.rows:
        print(f"{row.estimator} @ {row.sweep_value:g}: "
              f"rmse {row.empirical_rmse:.6g} m "
              f"(theory {row.theoretical_rmse:.6g}, "
              f"crlb {row.crlb_rmse:.6g}, "
              f"{row.non_converged}/{row.trials} non-converged)")
    for path in files:
        print(f"wrote {path}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "simulate": _cmd_simulate,
        "solve": _cmd_solve,
        "crlb": _cmd_crlb,
        "experiment": _cmd_experiment,
    }
    try:
        return handlers[args.command](args)
    except (SeqlocError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
