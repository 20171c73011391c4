"""Command-line front end: ``cqnls {groundstate,branch,evolve,experiment}``.

Exit status: 0 success, 2 invalid input (including a frequency outside
``(0, 3/16)``), 3 Newton or continuation failure, 4 energy-conservation
ceiling breached during evolution, 5 experiment verdict differs from
``--expect``.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, experiments, library
from .errors import (
    AccuracyLost,
    BranchGap,
    CQNLSError,
    NoConvergence,
    NoInteriorExtremum,
    OmegaOutOfRange,
)
from .evolution import EvolutionConfig, evolve
from .groundstate import (
    compute_branch,
    find_critical_omega,
    newton_solve,
    pohozaev_residuals,
    solve_ground_state,
    transfer_profile,
)
from .spectral import build_grid

log = logging.getLogger("cqnls")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NEWTON = 3
EXIT_ACCURACY = 4
EXIT_MISMATCH = 5


def _print_diagnostics(profile) -> None:
    diag = profile.diagnostics()
    r1, r2 = pohozaev_residuals(profile)
    print(f"d={profile.d} omega={profile.omega:.6f} N={profile.grid.N} s0={profile.grid.s0:g}")
    print(f"mass     = {diag.mass:.12g}")
    print(f"energy   = {diag.energy:.12g}")
    print(f"linf     = {diag.linf:.12g}")
    print(f"residual = {profile.residual_norm:.3e} ({profile.newton_iters} Newton iterations)")
    print(f"pohozaev = {r1:.3e} {r2:.3e}")


# -- subcommands -------------------------------------------------------------------


def cmd_groundstate(args) -> int:
    profile = solve_ground_state(
        args.d, args.omega, N=args.N, s0=args.s0, alpha_steps=args.alpha_steps, tol=args.tol
    )
    out = Path(args.out) if args.out else library.library_dir() / library.profile_filename(
        args.d, args.omega
    )
    library.save_profile(profile, out)
    _print_diagnostics(profile)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_branch(args) -> int:
    if args.points < 2:
        raise ValueError("--points must be at least 2")
    omegas = np.linspace(args.omega_min, args.omega_max, args.points)
    out_dir = Path(args.out_dir)
    status = EXIT_OK
    try:
        branch = compute_branch(args.d, omegas, N=args.N, s0=args.s0, seed_omega=args.seed_omega)
    except BranchGap as exc:
        branch = exc.branch
        print(f"branch gap: unreachable omegas {', '.join(f'{w:.6f}' for w in exc.missing)}",
              file=sys.stderr)
        status = EXIT_NEWTON
    csv_path = library.write_branch_csv(branch, out_dir / f"branch_d{args.d}.csv")
    if not args.no_profiles:
        for prof in branch.profiles.values():
            library.save_profile(prof, out_dir / "profiles" / library.profile_filename(prof.d, prof.omega))
    print(f"wrote {csv_path} ({len(branch)} points)")
    masses = branch.masses
    if len(branch) >= 2 and np.all(np.diff(masses) > 0):
        print("monotone")
    else:
        try:
            print(f"omega_crit = {find_critical_omega(branch):.6f}")
        except NoInteriorExtremum as exc:
            print(f"no interior mass minimum ({exc})")
    return status


def _load_initial_profile(args):
    profile = library.load_profile(args.init)
    if args.s0_override is None and args.N_override is None:
        return profile
    N = args.N_override or profile.grid.N
    s0 = args.s0_override or profile.grid.s0
    grid = build_grid(profile.d, N, s0)
    return newton_solve(grid, transfer_profile(profile, grid), profile.omega, profile.alpha)


def cmd_evolve(args) -> int:
    profile = _load_initial_profile(args)
    spec = experiments.PerturbationSpec.parse(args.perturb)
    u0 = experiments.build_initial(profile, spec)
    config = EvolutionConfig(
        t_final=args.tf,
        n_steps=args.nt,
        record_stride=args.record_stride,
        snapshot_times=tuple(args.snapshot or ()),
    )
    traj = evolve(u0, config)
    out_dir = Path(args.out_dir)
    csv_path = library.write_trajectory_csv(traj, out_dir / "trajectory.csv")
    library.save_field(traj.final_field, out_dir / "final_field.txt", omega=profile.omega)
    for snap in traj.snapshots:
        library.save_field(snap, out_dir / f"snapshot_t{snap.time:.6g}.txt", omega=profile.omega)
    exact = np.exp(1j * profile.omega * traj.final_field.time) * profile.values
    dev = float(np.max(np.abs(traj.final_field.values - exact)))
    mod_dev = float(np.max(np.abs(np.abs(traj.final_field.values) - profile.values)))
    print(f"wrote {csv_path}")
    print(f"final linf                     = {traj.linf_series[-1]:.12g}")
    print(f"max |u - exp(i omega t) Q|     = {dev:.3e}")
    print(f"max ||u| - Q|                  = {mod_dev:.3e}")
    print(f"max delta_E                    = {traj.max_delta_E:.3e}")
    print(f"relative mass drift            = {traj.relative_mass_drift:.3e}")
    return EXIT_OK


def _explicit_run(args) -> experiments.ScenarioRun:
    missing = [n for n in ("d", "omega", "perturb", "tf", "nt") if getattr(args, n) is None]
    if missing:
        raise ValueError("without --scenario, need --" + ", --".join(missing))
    return experiments.ScenarioRun(
        label=args.label or "custom",
        d=args.d,
        omega=args.omega,
        perturbation=experiments.PerturbationSpec.parse(args.perturb),
        t_final=args.tf,
        n_steps=args.nt,
        expect=(),
        N=args.N or 300,
        s0=args.s0 or 1e3,
        record_stride=args.record_stride or 10,
    )


def cmd_experiment(args) -> int:
    if args.scenario:
        if args.scenario not in experiments.SCENARIOS:
            raise ValueError(
                f"unknown scenario {args.scenario!r}; choose from {', '.join(experiments.SCENARIOS)}"
            )
        runs = experiments.SCENARIOS[args.scenario]
    else:
        runs = (_explicit_run(args),)

    out_dir = Path(args.out_dir)
    branches = {}
    status = EXIT_OK
    for run in runs:
        key = (run.d, run.N, run.s0)
        if key not in branches:
            log.info("computing matching branch d=%d N=%d s0=%g", *key)
            branches[key] = experiments.branch_for(run.d, run.N, run.s0, grid=build_grid(*key))
        report = experiments.run_registered(run, branches[key])
        csv_path = library.write_trajectory_csv(report.trajectory, out_dir / f"{run.label}.csv")
        field_path = library.save_field(
            report.trajectory.final_field, out_dir / f"{run.label}_final.txt", omega=run.omega
        )
        doc = report.as_dict()
        doc["files"] = {"trajectory_csv": csv_path.name, "final_field": field_path.name}
        expected = run.expect if args.expect == "auto" else ((args.expect,) if args.expect else ())
        doc["expected"] = list(expected)
        json_path = library.write_json(doc, out_dir / f"{run.label}.json")

        verdict = report.verdict.value
        line = f"{run.label}: {verdict}"
        if report.outcome.omega_hat is not None:
            line += (f" omega_hat={report.outcome.omega_hat:.4f}"
                     f" (linf match {report.outcome.omega_hat_linf:.4f},"
                     f" residual {report.outcome.match_residual:.3g})")
        line += f" mass_radiated={report.mass['mass_radiated']:.4g}"
        line += f" -> {json_path}"
        print(line)
        if expected and verdict not in expected:
            print(f"{run.label}: expected {'/'.join(expected)}, got {verdict}", file=sys.stderr)
            status = EXIT_MISMATCH
    return status


# -- parser --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cqnls", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("groundstate", help="compute one ground state and store it")
    p.add_argument("--d", type=int, choices=(2, 3), required=True)
    p.add_argument("--omega", type=float, required=True)
    p.add_argument("--N", type=int, default=400)
    p.add_argument("--s0", type=float, default=1e3)
    p.add_argument("--alpha-steps", type=int, default=11)
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--out", help="record path (default: $CQNLS_LIBRARY/Q_<ref>.txt)")
    p.set_defaults(func=cmd_groundstate)

    p = sub.add_parser("branch", help="sweep a ground-state branch")
    p.add_argument("--d", type=int, choices=(2, 3), required=True)
    p.add_argument("--omega-min", type=float, required=True)
    p.add_argument("--omega-max", type=float, required=True)
    p.add_argument("--points", type=int, required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--N", type=int, default=400)
    p.add_argument("--s0", type=float, default=1e3)
    p.add_argument("--seed-omega", type=float, default=0.1)
    p.add_argument("--no-profiles", action="store_true", help="write only the CSV")
    p.set_defaults(func=cmd_branch)

    p = sub.add_parser("evolve", help="evolve a perturbed ground state")
    p.add_argument("--init", required=True, help="ground-state record")
    p.add_argument("--perturb", default="mult:1",
                   help="mult:LAMBDA or gauss:SIGN:LAMBDA[:R0[:WIDTH]]")
    p.add_argument("--tf", type=float, required=True)
    p.add_argument("--nt", type=int, required=True)
    p.add_argument("--s0-override", type=float)
    p.add_argument("--N-override", type=int)
    p.add_argument("--record-stride", type=int, default=10)
    p.add_argument("--snapshot", type=float, action="append", help="store the field at this time")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("experiment", help="run a registered or explicit experiment")
    p.add_argument("--scenario", help=", ".join(experiments.SCENARIOS))
    p.add_argument("--expect", choices=[v.value for v in experiments.Verdict] + ["auto"])
    p.add_argument("--d", type=int, choices=(2, 3))
    p.add_argument("--omega", type=float)
    p.add_argument("--perturb")
    p.add_argument("--tf", type=float)
    p.add_argument("--nt", type=int)
    p.add_argument("--N", type=int)
    p.add_argument("--s0", type=float)
    p.add_argument("--record-stride", type=int)
    p.add_argument("--label")
    p.add_argument("--out-dir", default="experiments-out")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except OmegaOutOfRange as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NoConvergence as exc:
        print(f"error: {exc} [omega={exc.omega}, alpha={exc.alpha}]", file=sys.stderr)
        return EXIT_NEWTON
    except BranchGap as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NEWTON
    except AccuracyLost as exc:
        print(f"error: {exc} [t={exc.time}]", file=sys.stderr)
        return EXIT_ACCURACY
    except (CQNLSError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
