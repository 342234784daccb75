"""Command-line driver.

Subcommands: run (single trajectory plus monitors), sweep (penalty
continuation), mms (manufactured-solution convergence study), verify
(oracle and inequality suites), monitors (recompute monitors from saved
states).  Exit codes: 0 success, 1 solver failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, build_setup, load_config
from .forcing import ConstantForcing
from .mesh import build_mesh
from .monitors import compute_monitors, kappa_sweep
from .physics import make_params, thickness_from_u
from .snapshots import (
    read_run_metadata,
    read_states_csv,
    write_monitors_csv,
    write_run_metadata,
    write_snapshot,
    write_states_csv,
    write_sweep_csv,
)
from .solver import SolverError
from .timestep import MarchError, TimeGrid, Trajectory, run
from .verification import (
    MmsCase,
    brute_force_step_oracle,
    lemma_inequality_suite,
    mms_convergence,
)

__all__ = ["cli", "main"]


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shallowice",
        description="Penalized obstacle-problem solver for shallow ice sheets",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="integrate one trajectory and its monitors")
    p_run.add_argument("config", help="JSON configuration file")

    p_sweep = sub.add_parser("sweep", help="penalty continuation study")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--kappas", required=True,
                         help="comma-separated decreasing penalty values")

    p_mms = sub.add_parser("mms", help="manufactured-solution convergence study")
    p_mms.add_argument("config")
    p_mms.add_argument("--meshes", default="17,33,65")
    p_mms.add_argument("--steps", default=None,
                       help="comma-separated step counts (default: N,2N)")
    p_mms.add_argument("--spatial-steps", type=int, default=None)

    p_verify = sub.add_parser("verify", help="run oracle and inequality suites")
    p_verify.add_argument("--samples", type=int, default=100_000)

    p_mon = sub.add_parser("monitors", help="recompute monitors from saved states")
    p_mon.add_argument("trajectory_dir")
    return parser


def _write_run_outputs(setup, traj, outdir: Path):
    outdir.mkdir(parents=True, exist_ok=True)
    meta = traj.run_metadata
    write_run_metadata(meta, outdir / "run_metadata.json")
    write_states_csv(traj.states, outdir / "states.csv", metadata=meta)
    record = compute_monitors(traj, setup.kappa)
    write_monitors_csv(record, outdir / "monitors.csv", metadata=meta)

    stride = setup.output.get("stride", 1)
    formats = setup.output.get("formats", ["csv"])
    indices = sorted(set(range(0, traj.N + 1, stride)) | {traj.N})
    for n in indices:
        for fmt in formats:
            write_snapshot(traj.states[n], setup.mesh,
                           outdir / f"u_{n:06d}.{fmt}", fmt, name="u",
                           metadata=meta)
    # clip penalty-scale violations before the power transform
    H_final = thickness_from_u(np.maximum(traj.states[-1], 0.0), setup.params.p)
    for fmt in formats:
        write_snapshot(H_final, setup.mesh, outdir / f"H_final.{fmt}", fmt,
                       name="H", metadata=meta)
    return record


def _cmd_run(args) -> int:
    config = load_config(args.config)
    setup = build_setup(config, Path(args.config).parent)
    outdir = Path(setup.output["directory"])
    try:
        traj = run(setup.mesh, setup.params, setup.time_grid, setup.kappa,
                   setup.solver_config, delta=setup.delta, eps=setup.eps)
    except MarchError as err:
        print(f"run failed at step {err.step_index}: {err.cause}", file=sys.stderr)
        return 1
    traj.run_metadata["config"] = config.as_dict()
    record = _write_run_outputs(setup, traj, outdir)
    iters = sum(d.iterations for d in traj.step_diagnostics)
    print(f"completed {traj.N} steps ({iters} Newton iterations) -> {outdir}")
    for key, value in record.as_dict().items():
        print(f"  {key:16s} {value}")
    return 0


def _cmd_sweep(args) -> int:
    config = load_config(args.config)
    setup = build_setup(config, Path(args.config).parent)
    try:
        kappas = [float(k) for k in args.kappas.split(",") if k]
    except ValueError:
        print("--kappas must be comma-separated numbers", file=sys.stderr)
        return 2
    if not kappas or any(k <= 0 for k in kappas) or any(
        b >= a for a, b in zip(kappas, kappas[1:])
    ):
        print("--kappas must be strictly decreasing positives", file=sys.stderr)
        return 2

    result = kappa_sweep(setup.mesh, setup.params, setup.time_grid,
                         setup.solver_config, kappas,
                         delta=setup.delta, eps=setup.eps)
    outdir = Path(setup.output["directory"])
    outdir.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(result.table(), outdir / "sweep.csv",
                    metadata={"config": config.as_dict(), "kappas": kappas})
    formats = setup.output.get("formats", ["csv"])
    for row in result.rows:
        subdir = outdir / f"kappa_{row.kappa:g}"
        subdir.mkdir(parents=True, exist_ok=True)
        if row.error is not None:
            (subdir / "FAILED").write_text(row.error + "\n", encoding="utf-8")
            continue
        write_monitors_csv(row.record, subdir / "monitors.csv",
                           metadata=row.trajectory.run_metadata)
        for fmt in formats:
            write_snapshot(row.trajectory.states[-1], setup.mesh,
                           subdir / f"u_final.{fmt}", fmt, name="u")

    print(f"{'kappa':>10s} {'neg_norm':>12s} {'neg_norm/kappa':>14s} {'dist_final':>12s}")
    for row in result.rows:
        dist = "-" if row.dist_final is None else f"{row.dist_final:12.4e}"
        if row.error is not None:
            print(f"{row.kappa:10.3e}  FAILED: {row.error}")
        else:
            print(f"{row.kappa:10.3e} {row.neg_norm:12.4e} {row.sc2_proxy:14.4e} {dist:>12s}")
    print(f"neg_norm nonincreasing: {result.monotone_ok}")
    return 1 if any(row.error is not None for row in result.rows) else 0


def _cmd_mms(args) -> int:
    config = load_config(args.config)
    setup = build_setup(config, Path(args.config).parent)
    meshes = [int(s) for s in args.meshes.split(",") if s]
    if args.steps is None:
        steps = [setup.time_grid.N, 2 * setup.time_grid.N]
    else:
        steps = [int(s) for s in args.steps.split(",") if s]
    if setup.params.mu1 != setup.params.mu2:
        print("mms study requires a constant mu", file=sys.stderr)
        return 2
    case = MmsCase(Lx=setup.mesh.Lx, Ly=setup.mesh.Ly, T=setup.time_grid.T)
    table = mms_convergence(case, setup.params.p, setup.params.mu1, meshes,
                            steps, setup.kappa, setup.solver_config,
                            spatial_N=args.spatial_steps)
    outdir = Path(setup.output["directory"])
    outdir.mkdir(parents=True, exist_ok=True)
    rows = [{"study": "temporal", "nx": meshes[-1], "N": N, "error": err}
            for N, err in table.temporal]
    rows += [{"study": "spatial", "nx": nx,
              "N": args.spatial_steps or steps[-1], "error": err}
             for nx, err in table.spatial]
    write_sweep_csv(rows, outdir / "mms.csv",
                    metadata={"config": config.as_dict()})
    print(table.format())
    return 0


def _cmd_verify(args) -> int:
    failures = 0

    report = lemma_inequality_suite(args.samples, seed=0)
    print("pointwise inequality suites:")
    print(report.format())
    if not report.all_passed:
        failures += 1

    print("mesh mass sweep 3..33:")
    worst = 0.0
    for n in range(3, 34):
        mesh = build_mesh(n, n, 1.0, 1.0)
        worst = max(worst, abs(mesh.lumped_mass.sum() - 1.0))
    print(f"  max |sum(m) - area| = {worst:.3e}")
    if worst > 1e-12:
        failures += 1

    print("step-solver vs brute-force oracle:")
    from .operators import StepProblem
    from .solver import SolverConfig, solve_step

    rng = np.random.default_rng(7)
    worst = 0.0
    cases = 0
    for p in (2.0, 2.8, 3.0, 5.0):
        for kappa in (1e-1, 1e-3):
            nx, ny = rng.integers(3, 6, size=2)
            mesh = build_mesh(int(nx), int(ny), 1.0, 1.0)
            u_prev = rng.uniform(0.0, 2.0, mesh.n_nodes)
            u_prev[mesh.boundary_mask] = 0.0
            a_bar = rng.uniform(-2.0, 2.0, mesh.n_nodes)
            params = make_params(mesh, p, ConstantForcing(0.0), u0=u_prev,
                                 mu=rng.uniform(0.5, 2.0))
            problem = StepProblem(mesh=mesh, params=params, u_prev=u_prev,
                                  a_bar=a_bar, ell=0.1, kappa=kappa)
            expected = brute_force_step_oracle(problem)
            got = solve_step(problem, SolverConfig()).u_next
            worst = max(worst, float(np.max(np.abs(expected - got))))
            cases += 1
    print(f"  {cases} cases, max state distance = {worst:.3e}")
    if worst > 1e-9:
        failures += 1

    print("all suites passed" if failures == 0 else f"{failures} suite(s) FAILED")
    return 0 if failures == 0 else 1


def _cmd_monitors(args) -> int:
    outdir = Path(args.trajectory_dir)
    meta_path = outdir / "run_metadata.json"
    states_path = outdir / "states.csv"
    if not meta_path.exists() or not states_path.exists():
        print(f"{outdir} lacks run_metadata.json/states.csv", file=sys.stderr)
        return 2
    meta = read_run_metadata(meta_path)
    states = read_states_csv(states_path)
    dom = meta["domain"]
    mesh = build_mesh(dom["nx"], dom["ny"], dom["Lx"], dom["Ly"])
    grid = TimeGrid(meta["time"]["T"], meta["time"]["N"])
    # monitors are independent of the forcing and of mu; rebuild placeholders
    params = make_params(mesh, meta["physics"]["p"], ConstantForcing(0.0),
                         u0=states[0], mu=meta["physics"]["mu1"])
    from .solver import SolverConfig

    traj = Trajectory(
        states=states, step_diagnostics=[], time_grid=grid, mesh=mesh,
        params=params, kappa=meta["penalty"]["kappa"],
        delta=meta["penalty"]["delta"], eps=meta["penalty"]["eps"],
        solver_config=SolverConfig(**meta["solver"]), run_metadata=meta,
    )
    record = compute_monitors(traj, traj.kappa)
    write_monitors_csv(record, outdir / "monitors_recomputed.csv", metadata=meta)
    for key, value in record.as_dict().items():
        print(f"  {key:16s} {value}")
    return 0


def cli(argv=None) -> int:
    args = _parser().parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "sweep": _cmd_sweep,
        "mms": _cmd_mms,
        "verify": _cmd_verify,
        "monitors": _cmd_monitors,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 2
    except (SolverError, MarchError) as err:
        print(f"solver failure: {err}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli())


if __name__ == "__main__":
    main()
