"""Command line front end.

Four subcommands cover the workflows: `solve` runs one configuration
and writes monitors plus state snapshots, `converge` runs a truncation
ladder against a reference and writes error tables, `perturb` injects
seeded disturbances and writes decay envelopes, and `check-lemmas`
exercises the exponential-memory bound on its built-in suite.

Exit codes: 0 on success, 1 when a check fails, 2 on a configuration
problem.  Output lands under --out (or the config's output.directory),
optionally rooted at $SEMIGAL_OUT_ROOT.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .basis import build_basis
from .config import (
    ConfigError,
    build_solver_config,
    build_study_plan,
    parse_config,
)
from .csvio import RunManifest, write_csv, write_key_value_report
from .diagnostics import check_memory_bound, default_memory_suite
from .harness import fit_rate, run_study
from .perturb import (
    estimate_decay,
    eta_gradient_norm,
    make_perturbation,
    run_perturbed,
)
from .solver import solve
from .transform import write_grid_binary

OUT_ROOT_VAR = "SEMIGAL_OUT_ROOT"


def _resolve_out(requested, cfg) -> str:
    out = requested
    if out is None:
        out = cfg["output"]["directory"] if cfg is not None else "out"
    root = os.environ.get(OUT_ROOT_VAR)
    if root and not os.path.isabs(out):
        out = os.path.join(root, out)
    os.makedirs(out, exist_ok=True)
    return out


def _manifest(args, command: str, out: str) -> RunManifest:
    return RunManifest(
        command=command,
        seed=args.seed,
        config_path=getattr(args, "config", "") or "",
        out_dir=out,
    )


def _cmd_solve(args) -> int:
    cfg = parse_config(args.config)
    out = _resolve_out(args.out, cfg)
    manifest = _manifest(args, "solve", out)
    traj = solve(build_solver_config(cfg, seed=args.seed))

    rows = []
    names = sorted(traj.monitors)
    for k, t in enumerate(traj.monitor_times):
        for name in names:
            rows.append((t, name, traj.monitors[name][k]))
    write_csv(
        os.path.join(out, "monitors.csv"),
        ("t", "monitor", "value"),
        ("s", "-", "-"),
        rows,
        manifest,
    )

    rows = []
    for i, t in enumerate(traj.times):
        for j in range(traj.basis.size):
            rows.append((t, j, traj.coeffs[i, j]))
    write_csv(
        os.path.join(out, "velocity.csv"),
        ("t", "mode", "coefficient"),
        ("s", "-", "-"),
        rows,
        manifest,
    )

    index = []
    for i, t in enumerate(traj.times):
        name = f"density_{i:04d}.bin"
        write_grid_binary(traj.densities[i].values, os.path.join(out, name))
        index.append((i, t, name))
    write_csv(
        os.path.join(out, "snapshots.csv"),
        ("slot", "t", "file"),
        ("-", "s", "-"),
        index,
        manifest,
    )
    print(f"solve: {traj.size} states, {len(traj.monitor_times)} steps -> {out}")
    return 0


def _cmd_converge(args) -> int:
    cfg = parse_config(args.config)
    if "converge" not in cfg:
        raise ConfigError("converge", "missing required section")
    out = _resolve_out(args.out, cfg)
    manifest = _manifest(args, "converge", out)
    plan = build_study_plan(cfg, seed=args.seed)
    report = run_study(plan, threads=args.threads)

    rows = []
    for i, n in enumerate(report.n_list):
        for j, t in enumerate(report.checkpoints):
            for r in report.r_list:
                rows.append(
                    (
                        n,
                        report.lam_next[i],
                        t,
                        r,
                        report.velocity_errors[i, j],
                        report.density_errors[r][i, j],
                        report.normalized_velocity[i, j],
                    )
                )
    write_csv(
        os.path.join(out, "errors.csv"),
        ("n", "lambda_next", "t", "r", "E_v", "E_rho", "normalized"),
        ("-", "-", "s", "-", "-", "-", "-"),
        rows,
        manifest,
    )

    entries = []
    for flag in sorted(report.flags):
        entries.append((flag, "pass" if report.flags[flag] else "FAIL"))
    for j, t in enumerate(report.checkpoints):
        if (
            t <= 0
            or len(report.n_list) < 2
            or np.any(report.velocity_errors[:, j] <= 0)
        ):
            continue
        slope, constant = fit_rate(report.lam_next, report.velocity_errors[:, j])
        entries.append((f"velocity_slope_t{t:g}", slope))
        entries.append((f"velocity_constant_t{t:g}", constant))
    entries.append(("partial", report.partial))
    write_key_value_report(os.path.join(out, "summary.txt"), entries, manifest)

    ok = all(report.flags.values()) and not report.partial
    print(
        f"converge: ladder {report.n_list} vs reference {plan.n_ref}, "
        f"{'all checks pass' if ok else 'CHECK FAILED'} -> {out}"
    )
    print(f"converge: elapsed {report.elapsed:.1f}s", file=sys.stderr)
    return 0 if ok else 1


def _cmd_perturb(args) -> int:
    cfg = parse_config(args.config)
    if "perturb" not in cfg:
        raise ConfigError("perturb", "missing required section")
    section = cfg["perturb"]
    out = _resolve_out(args.out, cfg)
    manifest = _manifest(args, "perturb", out)
    basis = build_basis(cfg["basis_size"])
    base_config = build_solver_config(cfg, seed=args.seed)

    rows = []
    entries = []
    try:
        for seed in section["seeds"]:
            for t0 in section["t0"]:
                spec = make_perturbation(
                    basis,
                    cfg["grid_size"],
                    delta=section["gradient_bound"],
                    a_bound=section["roughness_bound"],
                    b_bound=section["density_bound"],
                    p_exponent=section["p_exponent"],
                    seed=seed,
                    t0=t0,
                    band=tuple(section["band"]) if "band" in section else None,
                )
                run = run_perturbed(base_config, spec, section["horizon"])
                eta_norms = eta_gradient_norm(run.eta_values, section["p_exponent"])
                est = estimate_decay(run.offsets, run.grad_norms(), eta_norms)
                for k, s in enumerate(run.offsets):
                    rows.append((seed, t0, s, est.envelope[k], eta_norms[k]))
                tag = f"seed{seed}_t{t0:g}"
                entries.append((f"{tag}.peak_ratio", est.peak_ratio))
                entries.append((f"{tag}.decayed", est.decayed))
                entries.append(
                    (f"{tag}.density_gradient_sup", est.density_gradient_sup)
                )
    except ValueError as exc:
        raise ConfigError("perturb", str(exc))

    write_csv(
        os.path.join(out, "perturb.csv"),
        ("seed", "t0", "s", "F_hat", "eta_grad_norm"),
        ("-", "s", "s", "-", "-"),
        rows,
        manifest,
    )
    write_key_value_report(os.path.join(out, "summary.txt"), entries, manifest)
    cases = len(section["seeds"]) * len(section["t0"])
    print(f"perturb: {cases} disturbance runs -> {out}")
    return 0


def _cmd_check_lemmas(args) -> int:
    cfg = parse_config(args.config) if args.config else None
    out = _resolve_out(args.out, cfg)
    manifest = _manifest(args, "check-lemmas", out)

    entries = []
    all_passed = True
    for name, times, values, a1, a2 in default_memory_suite(args.seed):
        result = check_memory_bound(times, values, a1, a2)
        entries.append((f"{name}.sup", result.sup_value))
        entries.append((f"{name}.bound", result.bound))
        entries.append((f"{name}.passed", result.passed))
        all_passed = all_passed and result.passed
    entries.append(("all_passed", all_passed))
    write_key_value_report(os.path.join(out, "memory_bound.txt"), entries, manifest)
    print(f"check-lemmas: {'pass' if all_passed else 'FAIL'} -> {out}")
    return 0 if all_passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semigal",
        description="Spectral solver and verification lab for "
        "variable-density incompressible flow on the periodic square",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument(
            "--config",
            required=config_required,
            help="YAML run description",
        )
        p.add_argument("--out", help="output directory (default from config)")
        p.add_argument("--seed", type=int, default=0, help="master seed")
        p.add_argument(
            "--threads", type=int, default=1, help="worker threads for ladder runs"
        )

    p = sub.add_parser("solve", help="run one configuration and store outputs")
    common(p)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("converge", help="truncation ladder against a reference")
    common(p)
    p.set_defaults(func=_cmd_converge)

    p = sub.add_parser("perturb", help="seeded disturbance decay study")
    common(p)
    p.set_defaults(func=_cmd_perturb)

    p = sub.add_parser("check-lemmas", help="run the built-in bound suite")
    common(p, config_required=False)
    p.set_defaults(func=_cmd_check_lemmas)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
