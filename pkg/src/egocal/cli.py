"""Command-line interface: calibrate, simulate, experiment, certify.

Exit codes: 0 success (certified where applicable), 2 completed but not
certified, 1 error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import geom, qcqp, sdp, sim, solver
from .errors import CalibrationError
from .geom import Transform
from .problem import (
    check_observability,
    dump_measurements,
    dump_trajectory,
    load_measurements,
    relative_motions_from_trajectories,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CERTIFIED = 2


def _add_common_tolerances(p):
    p.add_argument("--tol-gap", type=float, default=1e-9, help="SDP duality-gap tolerance")
    p.add_argument("--tol-feas", type=float, default=1e-9, help="SDP feasibility tolerance")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="egocal",
        description="Certifiably globally optimal extrinsic calibration from egomotion pairs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    cal = sub.add_parser("calibrate", help="calibrate from a JSON-lines measurement file")
    cal.add_argument("--input", required=True, help="measurement JSON-lines file")
    cal.add_argument("--output", default=None, help="where to write the JSON report (default stdout)")
    cal.add_argument(
        "--constraint-set",
        default="r+c+h",
        choices=list(qcqp.CONSTRAINT_KINDS),
        help="SO(3) constraint set for the dual",
    )
    cal.add_argument("--strict-observability", action="store_true")
    _add_common_tolerances(cal)

    simp = sub.add_parser("simulate", help="generate synthetic measurements from a terrain path")
    simp.add_argument("--output", required=True, help="output prefix (writes <prefix>.jsonl etc.)")
    simp.add_argument("--seed", type=int, required=True)
    simp.add_argument("--n-motions", type=int, default=50)
    simp.add_argument("--radius", type=float, default=10.0)
    simp.add_argument("--amplitude", type=float, default=1.0)
    simp.add_argument("--sigma-r", type=float, default=0.0)
    simp.add_argument("--sigma-t", type=float, default=0.0)

    exp = sub.add_parser("experiment", help="run one of the benchmark protocols")
    exp.add_argument("kind", choices=["ablation", "noise-sweep", "heatmap", "runtime"])
    exp.add_argument("--output", required=True, help="output prefix for CSV + JSON summary")
    exp.add_argument("--seed", type=int, required=True)
    exp.add_argument("--jobs", type=int, default=1)
    exp.add_argument("--n-trials", type=int, default=100)
    exp.add_argument("--n-motions", type=int, default=50)
    exp.add_argument("--n-axes", type=int, default=100)
    exp.add_argument("--translation-variant", action="store_true",
                     help="ablation only: perturb a translation at fixed pi/2 rotation error")
    exp.add_argument("--n-list", type=int, nargs="+", default=[10, 100, 1000])
    exp.add_argument("--n-runs", type=int, default=20)
    exp.add_argument("--n-inits", type=int, default=64)
    exp.add_argument("--sigma-r", type=float, nargs="+", default=[0.01, 0.05, 0.1])
    exp.add_argument("--sigma-t", type=float, nargs="+", default=[0.01, 0.05, 0.1])

    cert = sub.add_parser("certify", help="certify a candidate extrinsic against measurements")
    cert.add_argument("--input", required=True, help="measurement JSON-lines file")
    cert.add_argument("--theta", required=True, help="candidate extrinsic JSON file")
    cert.add_argument("--output", default=None)
    cert.add_argument(
        "--constraint-set", default="r+c+h", choices=list(qcqp.CONSTRAINT_KINDS)
    )
    _add_common_tolerances(cert)

    return parser


def _write_report(report: dict, output) -> None:
    text = json.dumps(report, indent=2) + "\n"
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_calibrate(args) -> int:
    with open(args.input, "r", encoding="utf-8") as fp:
        measurements = load_measurements(fp)
    result = solver.calibrate(
        measurements,
        constraint_set=args.constraint_set,
        strict_observability=args.strict_observability,
        tol_feas=args.tol_feas,
        tol_gap=args.tol_gap,
    )
    _write_report(result.to_dict(), args.output)
    return EXIT_OK if result.certificate.certified else EXIT_NOT_CERTIFIED


def cmd_simulate(args) -> int:
    prefix = args.output
    rng = np.random.default_rng(args.seed)
    path = sim.generate_path(
        n_steps=args.n_motions + 1,
        radius=args.radius,
        amplitude=args.amplitude,
        seed=int(rng.integers(2**31)),
    )
    theta = geom.random_transform(rng, translation_scale=0.5)
    poses_a, poses_b = sim.sensor_trajectories(path, theta)
    clean = relative_motions_from_trajectories(poses_a, poses_b)
    noisy = sim.corrupt(
        clean, sim.NoiseModel(args.sigma_r, args.sigma_t, seed=int(rng.integers(2**31)))
    )
    report = check_observability(clean)

    with open(f"{prefix}.jsonl", "w", encoding="utf-8") as fp:
        dump_measurements(noisy, fp)
    truth = {
        "schema_version": 1,
        "theta": {"R": theta.rotation.m.tolist(), "t": theta.translation.tolist()},
        "noise": {"sigma_r": args.sigma_r, "sigma_t": args.sigma_t},
        "path_params": path.params,
        "observability": report.to_dict(),
    }
    Path(f"{prefix}_truth.json").write_text(json.dumps(truth, indent=2) + "\n")
    with open(f"{prefix}_path.csv", "w", encoding="utf-8", newline="") as fp:
        fp.write("step,x,y,z\n")
        for i, pose in enumerate(path.waypoints):
            x, y, z = pose.translation
            fp.write(f"{i},{x},{y},{z}\n")
    with open(f"{prefix}_trajectory_b.jsonl", "w", encoding="utf-8") as fp:
        dump_trajectory(poses_b, fp)
    return EXIT_OK


def cmd_experiment(args) -> int:
    if args.kind == "ablation":
        if args.translation_variant:
            rows, summary = sim.ablation_experiment(
                translation_magnitudes=[0.1, 1.0, 10.0],
                jobs=args.jobs,
            )
        else:
            rows, summary = sim.ablation_experiment(n_axes=args.n_axes, jobs=args.jobs)
    elif args.kind == "noise-sweep":
        rows, summary = sim.noise_sweep(
            sigmas_r=tuple(args.sigma_r),
            sigmas_t=tuple(args.sigma_t),
            n_trials=args.n_trials,
            n_motions=args.n_motions,
            seed=args.seed,
            jobs=args.jobs,
        )
    elif args.kind == "heatmap":
        rows, summary = sim.init_heatmap(
            n_inits=args.n_inits,
            n_motions=args.n_motions,
            seed=args.seed,
            jobs=args.jobs,
        )
    else:
        rows, summary = sim.runtime_bench(
            n_list=tuple(args.n_list), n_runs=args.n_runs, seed=args.seed
        )
    with open(f"{args.output}.csv", "w", encoding="utf-8", newline="") as fp:
        sim.write_rows_csv(rows, fp)
    with open(f"{args.output}.json", "w", encoding="utf-8") as fp:
        sim.write_summary_json(summary, fp)
    return EXIT_OK


def _load_theta(path) -> Transform:
    obj = json.loads(Path(path).read_text())
    theta = obj.get("theta", obj)
    return Transform(
        geom.project_to_so3(np.asarray(theta["R"], dtype=float)),
        np.asarray(theta["t"], dtype=float),
    )


def cmd_certify(args) -> int:
    with open(args.input, "r", encoding="utf-8") as fp:
        measurements = load_measurements(fp)
    candidate = _load_theta(args.theta)

    dm = qcqp.assemble(measurements)
    constraints = qcqp.constraint_catalog(args.constraint_set)
    problem, scale = solver.build_sdp_problem(dm, constraints)
    solution = sdp.solve(problem, tol_feas=args.tol_feas, tol_gap=args.tol_gap)
    gamma = solution.dual_obj * scale
    cost = solver.evaluate_cost(measurements, candidate)
    gap = cost - gamma
    certified = solution.status == sdp.STATUS_OPTIMAL and gap <= solver.GAP_TOL * (
        1.0 + abs(cost)
    )
    report = {
        "schema_version": 1,
        "candidate_cost": cost,
        "dual_lower_bound": gamma,
        "gap": gap,
        "certified": bool(certified),
        "sdp_status": solution.status,
    }
    _write_report(report, args.output)
    return EXIT_OK if certified else EXIT_NOT_CERTIFIED


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "calibrate": cmd_calibrate,
        "simulate": cmd_simulate,
        "experiment": cmd_experiment,
        "certify": cmd_certify,
    }
    try:
        return handlers[args.command](args)
    except CalibrationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
