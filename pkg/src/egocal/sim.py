"""Synthetic data generation and the four experiment protocols.

Paths are circles in the x-y plane over a terrain built from random sinusoids;
the vehicle (sensor b) follows the path with its nose along the velocity
direction, so a non-flat terrain produces rotations about two distinct axes
and the calibration is observable by construction.

All experiments derive per-trial RNG streams from (master seed, trial index),
so serial and parallel executions produce identical output.
"""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import geom, qcqp, sdp, solver
from .errors import CalibrationError
from .geom import AxisAngle, RotationMatrix, Transform
from .problem import MeasurementSet, RelativeMotionPair, relative_motions_from_trajectories
from .qcqp import CONSTRAINT_KINDS

DEFAULT_THETA = Transform(
    geom.rotation_from_axis_angle(AxisAngle(np.array([1.0, 1.0, 1.0]) / np.sqrt(3.0), np.pi / 4)),
    np.array([0.1, 0.2, 0.3]),
)


@dataclass(frozen=True)
class NoiseModel:
    """Isotropic Gaussian noise on intrinsic X-Y-Z Euler angles and translations."""

    sigma_r: float = 0.0
    sigma_t: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.sigma_r < 0 or self.sigma_t < 0:
            raise ValueError("noise standard deviations must be nonnegative")


@dataclass(frozen=True)
class TerrainPath:
    waypoints: tuple
    params: dict = field(default_factory=dict)


def _euler_xyz(angles) -> RotationMatrix:
    """Intrinsic X-Y-Z Euler rotation."""
    ax, ay, az = angles
    cx, sx = np.cos(ax), np.sin(ax)
    cy, sy = np.cos(ay), np.sin(ay)
    cz, sz = np.cos(az), np.sin(az)
    rx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    rz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    return RotationMatrix(rx @ ry @ rz)


def generate_path(
    n_steps: int = 51,
    radius: float = 10.0,
    amplitude: float = 1.0,
    n_sinusoids: int = 3,
    seed: int = 0,
) -> TerrainPath:
    """Circular route over a random sinusoidal landscape.

    z(x, y) is a sum of `n_sinusoids` sinusoids in each of x and y with random
    amplitudes (scaled by `amplitude`), frequencies, and phases. Orientation
    follows the velocity direction with pitch from the terrain slope. With
    amplitude 0 the path is a planar circle (pure yaw, unobservable).
    """
    if n_steps < 3:
        raise ValueError("n_steps must be at least 3")
    if radius <= 0:
        raise ValueError("radius must be positive")
    rng = np.random.default_rng(seed)
    amps = amplitude * rng.uniform(0.3, 1.0, size=(2, n_sinusoids))
    freqs = rng.uniform(0.2, 0.8, size=(2, n_sinusoids))
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(2, n_sinusoids))

    def height(x, y):
        return float(
            np.sum(amps[0] * np.sin(freqs[0] * x + phases[0]))
            + np.sum(amps[1] * np.sin(freqs[1] * y + phases[1]))
        )

    def position(phi):
        x = radius * np.cos(phi)
        y = radius * np.sin(phi)
        return np.array([x, y, height(x, y)])

    phis = np.linspace(0.0, 2.0 * np.pi, n_steps)
    dphi = 1e-5
    waypoints = []
    for phi in phis:
        p = position(phi)
        forward = position(phi + dphi) - position(phi - dphi)
        forward /= np.linalg.norm(forward)
        left = np.cross(np.array([0.0, 0.0, 1.0]), forward)
        left /= np.linalg.norm(left)
        up = np.cross(forward, left)
        r = geom.project_to_so3(np.column_stack([forward, left, up]))
        waypoints.append(Transform(r, p))
    params = {
        "n_steps": n_steps,
        "radius": radius,
        "amplitude": amplitude,
        "n_sinusoids": n_sinusoids,
        "seed": seed,
    }
    return TerrainPath(waypoints=tuple(waypoints), params=params)


def sensor_trajectories(path: TerrainPath, theta: Transform):
    """World poses of both sensors: sensor b rides the path, a is offset by theta."""
    poses_b = list(path.waypoints)
    poses_a = [pose.compose(theta) for pose in poses_b]
    return poses_a, poses_b


def corrupt(m: MeasurementSet, noise: NoiseModel) -> MeasurementSet:
    """Compose each rotation with Euler-angle noise; add Gaussian translation noise."""
    rng = np.random.default_rng(noise.seed)
    pairs = []
    for pair in m:
        perturbed = []
        for tf in (pair.v_a, pair.v_b):
            angles = rng.normal(scale=noise.sigma_r, size=3) if noise.sigma_r > 0 else np.zeros(3)
            shift = rng.normal(scale=noise.sigma_t, size=3) if noise.sigma_t > 0 else np.zeros(3)
            r = RotationMatrix(tf.rotation.m @ _euler_xyz(angles).m)
            perturbed.append(Transform(r, tf.translation + shift))
        pairs.append(RelativeMotionPair(perturbed[0], perturbed[1], pair.kappa, pair.tau))
    return MeasurementSet(tuple(pairs))


def fibonacci_sphere(n: int) -> np.ndarray:
    """n deterministic, roughly uniform unit vectors."""
    i = np.arange(n) + 0.5
    phi = np.arccos(1.0 - 2.0 * i / n)
    golden = np.pi * (1.0 + np.sqrt(5.0))
    theta = golden * i
    return np.column_stack(
        [np.sin(phi) * np.cos(theta), np.sin(phi) * np.sin(theta), np.cos(phi)]
    )


def two_motion_instance(theta: Transform = DEFAULT_THETA) -> MeasurementSet:
    """The minimal observable instance: quarter-turn + 1 m about x, then about y."""
    vb1 = Transform(
        geom.rotation_from_axis_angle(AxisAngle(np.array([1.0, 0.0, 0.0]), np.pi / 2)),
        np.array([1.0, 0.0, 0.0]),
    )
    vb2 = Transform(
        geom.rotation_from_axis_angle(AxisAngle(np.array([0.0, 1.0, 0.0]), np.pi / 2)),
        np.array([0.0, 1.0, 0.0]),
    )
    inv_theta = theta.invert()
    pairs = tuple(
        RelativeMotionPair(inv_theta.compose(vb).compose(theta), vb) for vb in (vb1, vb2)
    )
    return MeasurementSet(pairs)


def _perturb_instance(m, rot_axis, rot_magnitude, trans_dir=None, trans_magnitude=0.0):
    """Perturb the first measurement's sensor-b rotation (and optionally translation)."""
    pairs = list(m.pairs)
    first = pairs[0]
    delta = geom.rotation_from_axis_angle(AxisAngle(rot_axis, rot_magnitude))
    new_t = np.array(first.v_b.translation)
    if trans_dir is not None:
        new_t = new_t + trans_magnitude * trans_dir
    pairs[0] = RelativeMotionPair(
        first.v_a,
        Transform(RotationMatrix(delta.m @ first.v_b.rotation.m), new_t),
        first.kappa,
        first.tau,
    )
    return MeasurementSet(tuple(pairs))


def _certified(m, constraint_set) -> bool:
    try:
        result = solver.calibrate(m, constraint_set=constraint_set)
    except CalibrationError:
        return False
    return result.certificate.certified


def ablation_experiment(
    perturb_magnitudes=None,
    n_axes: int = 100,
    constraint_sets=CONSTRAINT_KINDS,
    translation_magnitudes=None,
    theta: Transform = DEFAULT_THETA,
    jobs: int = 1,
):
    """Certified-percentage sweep over constraint sets on the two-motion instance.

    Rotation variant: one rotation measurement is perturbed by each magnitude
    about n_axes sampled axes. Translation variant (translation_magnitudes
    given): rotation perturbation fixed at pi/2 and one translation perturbed
    over 256 trials (16 rotation axes x 16 translation directions) per
    magnitude.
    """
    if perturb_magnitudes is None:
        perturb_magnitudes = [k * np.pi / 16 for k in range(1, 9)]
    base = two_motion_instance(theta)
    rows = []
    tasks = []
    if translation_magnitudes is None:
        axes = fibonacci_sphere(n_axes)
        for magnitude in perturb_magnitudes:
            for kind in constraint_sets:
                trials = [
                    _perturb_instance(base, axis, magnitude) for axis in axes
                ]
                tasks.append((magnitude, 0.0, kind, trials))
    else:
        rot_axes = fibonacci_sphere(16)
        trans_dirs = fibonacci_sphere(16)
        for t_mag in translation_magnitudes:
            for kind in constraint_sets:
                trials = [
                    _perturb_instance(base, axis, np.pi / 2, direction, t_mag)
                    for axis in rot_axes
                    for direction in trans_dirs
                ]
                tasks.append((np.pi / 2, t_mag, kind, trials))

    for magnitude, t_mag, kind, trials in tasks:
        flags = _map_jobs(_certified, [(m, kind) for m in trials], jobs)
        rows.append(
            {
                "rotation_magnitude": magnitude,
                "translation_magnitude": t_mag,
                "constraint_set": kind,
                "n_trials": len(trials),
                "certified_fraction": float(np.mean(flags)),
            }
        )
    summary = {
        "experiment": "ablation",
        "theta": {"R": theta.rotation.m.tolist(), "t": theta.translation.tolist()},
        "rows": rows,
    }
    return rows, summary


def _map_jobs(fn, arg_tuples, jobs):
    if jobs <= 1:
        return [fn(*args) for args in arg_tuples]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_star_apply, [(fn, args) for args in arg_tuples]))


def _star_apply(packed):
    fn, args = packed
    return fn(*args)


def _errors(theta_est: Transform, theta_true: Transform):
    rot = float(np.linalg.norm(theta_est.rotation.m - theta_true.rotation.m))
    trans = float(np.linalg.norm(theta_est.translation - theta_true.translation))
    return rot, trans


def _sweep_trial(sigma_r, sigma_t, n_motions, master_seed, trial):
    rng = np.random.default_rng([master_seed, trial])
    path_seed = int(rng.integers(2**31))
    path = generate_path(n_steps=n_motions + 1, seed=path_seed)
    theta = geom.random_transform(rng, translation_scale=0.5)
    poses_a, poses_b = sensor_trajectories(path, theta)
    clean = relative_motions_from_trajectories(poses_a, poses_b)
    noisy = corrupt(clean, NoiseModel(sigma_r, sigma_t, seed=int(rng.integers(2**31))))

    out = []
    convex = solver.calibrate(noisy)
    rot_err, trans_err = _errors(convex.extrinsic, theta)
    out.append(
        {
            "sigma_r": sigma_r,
            "sigma_t": sigma_t,
            "trial": trial,
            "n": n_motions,
            "method": "convex",
            "constraint_set": "r+c+h",
            "rotation_error": rot_err,
            "translation_error": trans_err,
            "cost": convex.cost,
            "certified": convex.certificate.certified,
            "wall_time_seconds": convex.solve_stats["wall_time_seconds"],
        }
    )
    local = solver.local_solve(noisy)
    rot_err, trans_err = _errors(local.extrinsic, theta)
    out.append(
        {
            "sigma_r": sigma_r,
            "sigma_t": sigma_t,
            "trial": trial,
            "n": n_motions,
            "method": "local",
            "constraint_set": "",
            "rotation_error": rot_err,
            "translation_error": trans_err,
            "cost": local.cost,
            "certified": False,
            "wall_time_seconds": local.solve_stats["wall_time_seconds"],
        }
    )
    return out


def noise_sweep(
    sigmas_r=(0.01, 0.05, 0.1),
    sigmas_t=(0.01, 0.05, 0.1),
    n_trials: int = 100,
    n_motions: int = 50,
    seed: int = 0,
    jobs: int = 1,
):
    """Accuracy comparison of the convex solver vs the local baseline over a noise grid."""
    args = [
        (sr, st, n_motions, seed, trial)
        for sr in sigmas_r
        for st in sigmas_t
        for trial in range(n_trials)
    ]
    nested = _map_jobs(_sweep_trial, args, jobs)
    rows = [row for pair in nested for row in pair]
    summary = {"experiment": "noise_sweep", "grid": {}}
    for sr in sigmas_r:
        for st in sigmas_t:
            cell = {}
            for method in ("convex", "local"):
                sel = [
                    r
                    for r in rows
                    if r["method"] == method and r["sigma_r"] == sr and r["sigma_t"] == st
                ]
                cell[method] = {
                    "median_rotation_error": float(np.median([r["rotation_error"] for r in sel])),
                    "median_translation_error": float(
                        np.median([r["translation_error"] for r in sel])
                    ),
                    "q1_rotation_error": float(
                        np.quantile([r["rotation_error"] for r in sel], 0.25)
                    ),
                    "q3_rotation_error": float(
                        np.quantile([r["rotation_error"] for r in sel], 0.75)
                    ),
                    "certified_fraction": float(np.mean([r["certified"] for r in sel])),
                }
            summary["grid"][f"{sr},{st}"] = cell
    return rows, summary


def init_heatmap(
    angle_grid=(0.0, np.pi / 4, np.pi / 2, 3 * np.pi / 4, np.pi),
    dist_grid=(0.0, 0.5, 1.0, 2.0, 4.0),
    n_inits: int = 64,
    sigma_r: float = 0.01,
    sigma_t: float = 0.01,
    n_motions: int = 50,
    seed: int = 0,
    jobs: int = 1,
):
    """Max (local - convex) error over initializations at each offset magnitude.

    One random path, calibration, and noise realization is shared by the whole
    heatmap; each cell seeds the local solver with n_inits initial guesses
    offset from the truth by the cell's rotation angle and translation distance.
    """
    rng = np.random.default_rng([seed, 0])
    path = generate_path(n_steps=n_motions + 1, seed=int(rng.integers(2**31)))
    theta = geom.random_transform(rng, translation_scale=0.5)
    poses_a, poses_b = sensor_trajectories(path, theta)
    noisy = corrupt(
        relative_motions_from_trajectories(poses_a, poses_b),
        NoiseModel(sigma_r, sigma_t, seed=int(rng.integers(2**31))),
    )
    convex = solver.calibrate(noisy)
    convex_rot_err, convex_trans_err = _errors(convex.extrinsic, theta)

    axes = fibonacci_sphere(n_inits)
    dirs = fibonacci_sphere(n_inits)
    rows = []
    for angle in angle_grid:
        for dist in dist_grid:
            max_rot_diff = -np.inf
            max_trans_diff = -np.inf
            for k in range(n_inits):
                if angle > 0:
                    offset_r = geom.rotation_from_axis_angle(AxisAngle(axes[k], angle))
                else:
                    offset_r = RotationMatrix.identity()
                init = Transform(
                    RotationMatrix(theta.rotation.m @ offset_r.m),
                    theta.translation + dist * dirs[k],
                )
                local = solver.local_solve(noisy, init=init)
                rot_err, trans_err = _errors(local.extrinsic, theta)
                max_rot_diff = max(max_rot_diff, rot_err - convex_rot_err)
                max_trans_diff = max(max_trans_diff, trans_err - convex_trans_err)
            rows.append(
                {
                    "init_angle": float(angle),
                    "init_distance": float(dist),
                    "n_inits": n_inits,
                    "max_rotation_error_diff": float(max_rot_diff),
                    "max_translation_error_diff": float(max_trans_diff),
                }
            )
    summary = {
        "experiment": "init_heatmap",
        "convex_rotation_error": convex_rot_err,
        "convex_translation_error": convex_trans_err,
        "rows": rows,
    }
    return rows, summary


def runtime_bench(
    n_list=(10, 100, 1000),
    n_runs: int = 20,
    sigma_r: float = 0.01,
    sigma_t: float = 0.01,
    seed: int = 0,
    include_local: bool = True,
):
    """Solver-only wall time of the convex SDP (and optionally the local LM) vs n."""
    rows = []
    for n in n_list:
        for run in range(n_runs):
            rng = np.random.default_rng([seed, n, run])
            path = generate_path(n_steps=n + 1, seed=int(rng.integers(2**31)))
            theta = geom.random_transform(rng, translation_scale=0.5)
            poses_a, poses_b = sensor_trajectories(path, theta)
            noisy = corrupt(
                relative_motions_from_trajectories(poses_a, poses_b),
                NoiseModel(sigma_r, sigma_t, seed=int(rng.integers(2**31))),
            )
            dm = qcqp.assemble(noisy)
            problem, _ = solver.build_sdp_problem(dm, qcqp.constraint_catalog("r+c+h"))
            start = time.perf_counter()
            sdp.solve(problem)
            convex_seconds = time.perf_counter() - start
            rows.append({"n": n, "run": run, "method": "convex", "solve_seconds": convex_seconds})
            if include_local:
                start = time.perf_counter()
                solver.local_solve(noisy)
                rows.append(
                    {
                        "n": n,
                        "run": run,
                        "method": "local",
                        "solve_seconds": time.perf_counter() - start,
                    }
                )
    summary = {"experiment": "runtime", "means": {}}
    for n in n_list:
        for method in ("convex", "local") if include_local else ("convex",):
            times = [r["solve_seconds"] for r in rows if r["n"] == n and r["method"] == method]
            if times:
                summary["means"][f"{method},{n}"] = {
                    "mean": float(np.mean(times)),
                    "q1": float(np.quantile(times, 0.25)),
                    "q3": float(np.quantile(times, 0.75)),
                }
    return rows, summary


def write_rows_csv(rows, fp) -> None:
    if not rows:
        return
    fieldnames = list(rows[0].keys())
    writer = csv.DictWriter(fp, fieldnames=fieldnames)
    writer.writeheader()
    writer.writerows(rows)


def write_summary_json(summary, fp) -> None:
    json.dump(summary, fp, indent=2)
    fp.write("\n")
