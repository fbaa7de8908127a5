"""Measurement data model, JSON-lines ingestion, and the two-axis observability test.

File formats (one JSON object per line):

measurements::

    {"t": 0, "a": {"R": [[...],[...],[...]], "t": [x, y, z]},
              "b": {"R": ..., "t": ...}, "kappa": 1.0, "tau": 1.0}

trajectories (one file per sensor)::

    {"t": 0, "pose": {"R": [[...],[...],[...]], "t": [x, y, z]}}

Rotations are row-major 3x3, translations in meters. kappa/tau default to 1.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass

import numpy as np

from . import geom
from .errors import (
    EmptyInput,
    InvalidRotation,
    LengthMismatch,
    ParseError,
    TooShort,
)
from .geom import Transform

INGEST_ROTATION_TOL = 1e-6


@dataclass(frozen=True)
class RelativeMotionPair:
    """One timestep's egomotion estimate from each sensor, with scalar weights."""

    v_a: Transform
    v_b: Transform
    kappa: float = 1.0
    tau: float = 1.0

    def __post_init__(self):
        if self.kappa <= 0 or self.tau <= 0:
            raise ValueError("weights kappa and tau must be positive")


@dataclass(frozen=True)
class MeasurementSet:
    pairs: tuple

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(self.pairs))

    @property
    def n(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def __len__(self):
        return len(self.pairs)


@dataclass(frozen=True)
class ObservabilityReport:
    distinct_axis_count: int
    max_axis_angle_between: float
    rotation_magnitudes: tuple
    observable: bool
    condition_estimate: float

    def to_dict(self) -> dict:
        return {
            "distinct_axis_count": self.distinct_axis_count,
            "max_axis_angle_between": self.max_axis_angle_between,
            "rotation_magnitudes": list(self.rotation_magnitudes),
            "observable": self.observable,
            "condition_estimate": self.condition_estimate,
        }


def _transform_from_record(obj, line_no, rot_key="R", trans_key="t"):
    try:
        r = np.asarray(obj[rot_key], dtype=float)
        t = np.asarray(obj[trans_key], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad pose object: {exc}", line=line_no) from None
    if r.shape != (3, 3) or t.shape != (3,):
        raise ParseError("pose must have a 3x3 'R' and 3-vector 't'", line=line_no)
    if np.linalg.norm(r.T @ r - np.eye(3)) > INGEST_ROTATION_TOL or np.linalg.det(r) < 0:
        raise InvalidRotation(f"line {line_no}: rotation is not in SO(3)")
    # Re-orthonormalize so downstream invariants (1e-9) hold for inputs that
    # pass the looser ingestion tolerance.
    return Transform(geom.project_to_so3(r), t)


def _lines(source):
    if isinstance(source, (str, bytes)):
        text = source.decode("utf-8") if isinstance(source, bytes) else source
        return io.StringIO(text)
    return source


def load_measurements(source) -> MeasurementSet:
    """Parse JSON-lines relative-motion records (see module docstring).

    `source` may be an open text file, a string, or bytes. Raises ParseError
    (with line number), InvalidRotation, or EmptyInput.
    """
    pairs = []
    for line_no, raw in enumerate(_lines(source), start=1):
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8")
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc}", line=line_no) from None
        if "a" not in obj or "b" not in obj:
            raise ParseError("record must contain 'a' and 'b' poses", line=line_no)
        v_a = _transform_from_record(obj["a"], line_no)
        v_b = _transform_from_record(obj["b"], line_no)
        kappa = float(obj.get("kappa", 1.0))
        tau = float(obj.get("tau", 1.0))
        pairs.append(RelativeMotionPair(v_a, v_b, kappa, tau))
    if not pairs:
        raise EmptyInput("measurement source contained no records")
    return MeasurementSet(tuple(pairs))


def load_trajectory(source) -> list:
    """Parse a JSON-lines trajectory file (one world-frame pose per line)."""
    poses = []
    for line_no, raw in enumerate(_lines(source), start=1):
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8")
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc}", line=line_no) from None
        if "pose" not in obj:
            raise ParseError("record must contain a 'pose' object", line=line_no)
        poses.append(_transform_from_record(obj["pose"], line_no))
    if not poses:
        raise EmptyInput("trajectory source contained no records")
    return poses


def _pose_dict(tf: Transform) -> dict:
    return {"R": tf.rotation.m.tolist(), "t": tf.translation.tolist()}


def measurement_record(index: int, pair: RelativeMotionPair) -> dict:
    return {
        "t": index,
        "a": _pose_dict(pair.v_a),
        "b": _pose_dict(pair.v_b),
        "kappa": pair.kappa,
        "tau": pair.tau,
    }


def dump_measurements(m: MeasurementSet, fp) -> None:
    for i, pair in enumerate(m):
        fp.write(json.dumps(measurement_record(i, pair)) + "\n")


def dump_trajectory(poses, fp) -> None:
    for i, pose in enumerate(poses):
        fp.write(json.dumps({"t": i, "pose": _pose_dict(pose)}) + "\n")


def relative_motions_from_trajectories(poses_a, poses_b, kappa=1.0, tau=1.0) -> MeasurementSet:
    """Difference world-frame pose sequences into per-step relative motions.

    Pair t carries v_s = poses_s[t-1]^-1 * poses_s[t] for s in {a, b}.
    """
    if len(poses_a) != len(poses_b):
        raise LengthMismatch(f"trajectory lengths differ: {len(poses_a)} vs {len(poses_b)}")
    if len(poses_a) < 2:
        raise TooShort("need at least two poses to derive a relative motion")
    pairs = []
    for t in range(1, len(poses_a)):
        v_a = poses_a[t - 1].invert().compose(poses_a[t])
        v_b = poses_b[t - 1].invert().compose(poses_b[t])
        pairs.append(RelativeMotionPair(v_a, v_b, kappa, tau))
    return MeasurementSet(tuple(pairs))


def translation_gram(m: MeasurementSet) -> np.ndarray:
    """The 3x3 translation block sum_i tau_i (I - R_b_i)^T (I - R_b_i)."""
    g = np.zeros((3, 3))
    for pair in m:
        d = np.eye(3) - pair.v_b.rotation.m
        g += pair.tau * (d.T @ d)
    return g


def check_observability(
    m: MeasurementSet, angle_tol: float = 1e-3, axis_tol: float = 1e-2
) -> ObservabilityReport:
    """Two-unique-axes necessary condition for a well-posed calibration.

    Axes are compared modulo sign; rotations with angle <= angle_tol are
    treated as absent. Also reports the condition number of the translation
    block as a numeric corroboration (it blows up exactly in the single-axis
    failure mode).
    """
    axes = []
    magnitudes = []
    for pair in m:
        aa = geom.axis_angle_from_rotation(pair.v_a.rotation)
        magnitudes.append(aa.angle)
        if aa.angle > angle_tol:
            axes.append(aa.axis)

    representatives = []
    for axis in axes:
        if all(_axis_separation(axis, rep) > axis_tol for rep in representatives):
            representatives.append(axis)

    max_sep = 0.0
    for i in range(len(representatives)):
        for j in range(i + 1, len(representatives)):
            max_sep = max(max_sep, _axis_separation(representatives[i], representatives[j]))

    g = translation_gram(m)
    eigs = np.linalg.eigvalsh(g)
    cond = float("inf") if eigs[0] <= 0 else float(eigs[-1] / eigs[0])

    count = len(representatives)
    return ObservabilityReport(
        distinct_axis_count=count,
        max_axis_angle_between=max_sep,
        rotation_magnitudes=tuple(magnitudes),
        observable=count >= 2,
        condition_estimate=cond,
    )


def _axis_separation(a, b) -> float:
    """Angle between two unit axes modulo antipodality."""
    return float(np.arccos(np.clip(abs(np.dot(a, b)), 0.0, 1.0)))
