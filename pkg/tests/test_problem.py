import io
import json

import numpy as np
import pytest

from conftest import random_instance
from egocal import geom
from egocal.errors import (
    EmptyInput,
    InvalidRotation,
    LengthMismatch,
    ParseError,
    TooShort,
)
from egocal.geom import AxisAngle, RotationMatrix, Transform
from egocal.problem import (
    MeasurementSet,
    RelativeMotionPair,
    check_observability,
    dump_measurements,
    load_measurements,
    load_trajectory,
    relative_motions_from_trajectories,
)


def _record(r_a=None, r_b=None, **extra):
    rec = {
        "t": 0,
        "a": {"R": (r_a if r_a is not None else np.eye(3)).tolist(), "t": [0.0, 0.0, 0.0]},
        "b": {"R": (r_b if r_b is not None else np.eye(3)).tolist(), "t": [0.0, 0.0, 0.0]},
    }
    rec.update(extra)
    return json.dumps(rec)


def test_load_two_lines():
    src = _record() + "\n" + _record() + "\n"
    m = load_measurements(src)
    assert m.n == 2


def test_load_defaults_weights_to_one():
    m = load_measurements(_record())
    assert m.pairs[0].kappa == 1.0
    assert m.pairs[0].tau == 1.0


def test_load_explicit_weights():
    m = load_measurements(_record(kappa=2.5, tau=0.5))
    assert m.pairs[0].kappa == 2.5
    assert m.pairs[0].tau == 0.5


def test_load_rejects_reflection():
    with pytest.raises(InvalidRotation):
        load_measurements(_record(r_a=np.diag([1.0, 1.0, -1.0])))


def test_load_rejects_drifted_rotation():
    bad = np.eye(3)
    bad = bad + 1e-3  # orthonormality off by ~1e-3 > ingestion tolerance
    with pytest.raises(InvalidRotation):
        load_measurements(_record(r_a=bad))


def test_load_reorthonormalizes_slightly_off_input():
    r = geom.random_rotation(1).m + 1e-8 * np.ones((3, 3))
    m = load_measurements(_record(r_a=r))
    got = m.pairs[0].v_a.rotation.m
    assert np.linalg.norm(got.T @ got - np.eye(3)) < 1e-12


def test_load_parse_error_carries_line_number():
    src = _record() + "\n{not json\n"
    with pytest.raises(ParseError) as exc:
        load_measurements(src)
    assert exc.value.line == 2
    assert "2" in str(exc.value)


def test_load_missing_pose_key():
    with pytest.raises(ParseError):
        load_measurements('{"t": 0, "a": {"R": [[1,0,0],[0,1,0],[0,0,1]], "t": [0,0,0]}}')


def test_load_empty_input():
    with pytest.raises(EmptyInput):
        load_measurements("\n\n")


def test_dump_load_round_trip():
    m, _ = random_instance(21, n_motions=5)
    buf = io.StringIO()
    dump_measurements(m, buf)
    back = load_measurements(buf.getvalue())
    assert back.n == m.n
    for p, q in zip(m, back):
        assert np.linalg.norm(p.v_a.matrix() - q.v_a.matrix()) < 1e-12
        assert np.linalg.norm(p.v_b.matrix() - q.v_b.matrix()) < 1e-12


def test_load_trajectory():
    lines = []
    poses = [geom.random_transform(i) for i in range(3)]
    for i, pose in enumerate(poses):
        lines.append(
            json.dumps({"t": i, "pose": {"R": pose.rotation.m.tolist(), "t": pose.translation.tolist()}})
        )
    back = load_trajectory("\n".join(lines))
    assert len(back) == 3
    for p, q in zip(poses, back):
        assert np.linalg.norm(p.matrix() - q.matrix()) < 1e-9


def test_pair_rejects_nonpositive_weights():
    with pytest.raises(ValueError):
        RelativeMotionPair(Transform.identity(), Transform.identity(), kappa=0.0)
    with pytest.raises(ValueError):
        RelativeMotionPair(Transform.identity(), Transform.identity(), tau=-1.0)


def test_relative_motions_constant_trajectory():
    pose = geom.random_transform(5)
    m = relative_motions_from_trajectories([pose] * 4, [pose] * 4)
    assert m.n == 3
    for pair in m:
        assert np.linalg.norm(pair.v_a.matrix() - np.eye(4)) < 1e-12
        assert np.linalg.norm(pair.v_b.matrix() - np.eye(4)) < 1e-12


def test_relative_motions_two_pose_definition():
    x = geom.random_transform(6)
    m = relative_motions_from_trajectories([Transform.identity(), x], [Transform.identity(), x])
    assert m.n == 1
    assert np.linalg.norm(m.pairs[0].v_a.matrix() - x.matrix()) < 1e-12


def test_relative_motions_length_checks():
    poses = [Transform.identity()] * 3
    with pytest.raises(LengthMismatch):
        relative_motions_from_trajectories(poses, poses[:2])
    with pytest.raises(TooShort):
        relative_motions_from_trajectories(poses[:1], poses[:1])


def test_relative_motions_satisfy_conjugation():
    # trajectories built from a known extrinsic must satisfy theta v_a = v_b theta
    m, theta = random_instance(7, n_motions=10)
    for pair in m:
        lhs = theta.compose(pair.v_a).matrix()
        rhs = pair.v_b.compose(theta).matrix()
        assert np.linalg.norm(lhs - rhs) < 1e-12


def test_relative_motions_reintegrate():
    rng = np.random.default_rng(8)
    poses = [Transform.identity()]
    for _ in range(9):
        poses.append(poses[-1].compose(geom.random_transform(rng, translation_scale=0.3)))
    m = relative_motions_from_trajectories(poses, poses)
    current = poses[0]
    for i, pair in enumerate(m, start=1):
        current = current.compose(pair.v_a)
        assert np.linalg.norm(current.matrix() - poses[i].matrix()) < 1e-10


def _pure_rotation_pairs(axes_angles):
    pairs = []
    for axis, angle in axes_angles:
        r = geom.rotation_from_axis_angle(AxisAngle(np.asarray(axis, dtype=float), angle))
        v = Transform(r, np.zeros(3))
        pairs.append(RelativeMotionPair(v, v))
    return MeasurementSet(tuple(pairs))


def test_observability_single_axis():
    m = _pure_rotation_pairs([((0, 0, 1), 0.3), ((0, 0, 1), 0.9), ((0, 0, 1), 1.4)])
    report = check_observability(m)
    assert report.distinct_axis_count == 1
    assert not report.observable


def test_observability_antipodal_axes_count_once():
    m = _pure_rotation_pairs([((0, 0, 1), 0.5), ((0, 0, -1), 0.5)])
    assert check_observability(m).distinct_axis_count == 1


def test_observability_two_axes():
    m = _pure_rotation_pairs([((1, 0, 0), np.pi / 2), ((0, 1, 0), np.pi / 2)])
    report = check_observability(m)
    assert report.observable
    assert report.distinct_axis_count == 2
    assert abs(report.max_axis_angle_between - np.pi / 2) < 1e-9


def test_observability_identity_rotations():
    m = _pure_rotation_pairs([((0, 0, 1), 0.0), ((0, 0, 1), 0.0)])
    report = check_observability(m)
    assert report.distinct_axis_count == 0
    assert not report.observable


def test_observability_small_angles_ignored():
    m = _pure_rotation_pairs([((1, 0, 0), 1e-5), ((0, 1, 0), 0.8)])
    assert check_observability(m).distinct_axis_count == 1


def test_observability_order_invariant():
    pairs = [((1, 0, 0), 0.5), ((0, 1, 0), 0.7), ((0, 0, 1), 0.9)]
    a = check_observability(_pure_rotation_pairs(pairs))
    b = check_observability(_pure_rotation_pairs(pairs[::-1]))
    assert a.distinct_axis_count == b.distinct_axis_count


def test_observability_conjugation_invariant():
    pairs = [((1, 0, 0), 0.5), ((0, 1, 0), 0.7)]
    m = _pure_rotation_pairs(pairs)
    q = geom.random_rotation(9)
    conj = MeasurementSet(
        tuple(
            RelativeMotionPair(
                Transform(RotationMatrix(q.m @ p.v_a.rotation.m @ q.m.T), np.zeros(3)),
                p.v_b,
            )
            for p in m
        )
    )
    assert check_observability(conj).distinct_axis_count == check_observability(m).distinct_axis_count


def test_observability_condition_estimate_blows_up_single_axis():
    single = _pure_rotation_pairs([((0, 0, 1), 0.5), ((0, 0, 1), 1.1)])
    two = _pure_rotation_pairs([((1, 0, 0), np.pi / 2), ((0, 1, 0), np.pi / 2)])
    assert check_observability(single).condition_estimate > 1e12
    assert check_observability(two).condition_estimate < 1e3


def test_report_serializes():
    m = _pure_rotation_pairs([((1, 0, 0), 0.5), ((0, 1, 0), 0.7)])
    d = check_observability(m).to_dict()
    json.dumps(d)  # must be JSON-serializable
    assert d["observable"] is True
