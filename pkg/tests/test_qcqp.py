import numpy as np
import pytest

from conftest import random_instance
from egocal import geom, qcqp
from egocal.errors import SingularQtt, TooShort
from egocal.geom import AxisAngle, Transform
from egocal.problem import MeasurementSet, RelativeMotionPair


def _identity_pair():
    return RelativeMotionPair(Transform.identity(), Transform.identity())


def _random_pair(rng):
    return RelativeMotionPair(
        geom.random_transform(rng, translation_scale=0.7),
        geom.random_transform(rng, translation_scale=0.7),
    )


def test_rotation_block_identity_pair_is_zero():
    assert np.allclose(qcqp.rotation_block(_identity_pair()), 0.0)


def test_rotation_block_annihilates_identity_calibration():
    # R_a = R_b means the identity calibration has zero rotation residual
    rng = np.random.default_rng(1)
    r = geom.random_rotation(rng)
    v = Transform(r, np.zeros(3))
    block = qcqp.rotation_block(RelativeMotionPair(v, v))
    assert np.linalg.norm(block @ np.eye(3).reshape(9, order="F")) < 1e-12


def test_rotation_block_vec_identity():
    # vec(R R_a - R_b R) = M_r vec(R), the defining property of the block
    rng = np.random.default_rng(2)
    pair = _random_pair(rng)
    block = qcqp.rotation_block(pair)
    for _ in range(100):
        r = geom.random_rotation(rng).m
        direct = (r @ pair.v_a.rotation.m - pair.v_b.rotation.m @ r).reshape(9, order="F")
        assert np.linalg.norm(block @ r.reshape(9, order="F") - direct) < 1e-12


def test_translation_block_identity_pair_is_zero():
    assert np.allclose(qcqp.translation_block(_identity_pair()), 0.0)


def test_translation_block_residual_identity():
    rng = np.random.default_rng(3)
    for _ in range(50):
        pair = _random_pair(rng)
        theta = geom.random_transform(rng)
        x = qcqp.full_vector(theta.translation, theta.rotation, 1.0)
        direct = (
            theta.rotation.m @ pair.v_a.translation
            + theta.translation
            - pair.v_b.rotation.m @ theta.translation
            - pair.v_b.translation
        )
        assert np.linalg.norm(qcqp.translation_block(pair) @ x - direct) < 1e-12


def test_assemble_requires_two_motions():
    rng = np.random.default_rng(4)
    with pytest.raises(TooShort):
        qcqp.assemble(MeasurementSet((_random_pair(rng),)))


def test_assemble_identity_measurements_singular():
    m = MeasurementSet((_identity_pair(), _identity_pair()))
    with pytest.raises(SingularQtt):
        qcqp.assemble(m)


def test_assemble_single_axis_singular():
    # all sensor-b rotations about z leaves I - R_b singular along z
    pairs = []
    for angle in (0.4, 0.9, 1.3):
        r = geom.rotation_from_axis_angle(AxisAngle(np.array([0.0, 0.0, 1.0]), angle))
        v = Transform(r, np.array([1.0, 0.0, 0.0]))
        pairs.append(RelativeMotionPair(v, v))
    with pytest.raises(SingularQtt):
        qcqp.assemble(MeasurementSet(tuple(pairs)))


def test_assemble_noise_free_optimum_has_zero_cost():
    m, theta = random_instance(5, n_motions=20)
    dm = qcqp.assemble(m)
    x = qcqp.full_vector(theta.translation, theta.rotation, 1.0)
    assert float(x @ dm.q @ x) < 1e-18


def test_assemble_psd_and_symmetric():
    m, _ = random_instance(6, n_motions=20, sigma_r=0.05, sigma_t=0.05)
    dm = qcqp.assemble(m)
    assert np.linalg.norm(dm.q - dm.q.T) < 1e-12
    assert np.linalg.norm(dm.q_tilde - dm.q_tilde.T) < 1e-12
    assert np.linalg.eigvalsh(dm.q)[0] > -1e-9 * np.linalg.norm(dm.q)
    assert np.linalg.eigvalsh(dm.q_tilde)[0] > -1e-9 * np.linalg.norm(dm.q_tilde)


def test_assemble_additive_over_concatenation():
    m1, _ = random_instance(7, n_motions=5, sigma_r=0.02, sigma_t=0.02)
    m2, _ = random_instance(8, n_motions=5, sigma_r=0.02, sigma_t=0.02)
    joint = MeasurementSet(m1.pairs + m2.pairs)
    lhs = qcqp.assemble(joint).q
    rhs = qcqp.assemble(m1).q + qcqp.assemble(m2).q
    assert np.linalg.norm(lhs - rhs) < 1e-10 * (1 + np.linalg.norm(lhs))


def test_assemble_weight_scaling():
    m, _ = random_instance(9, n_motions=5, sigma_r=0.02, sigma_t=0.02)
    scaled = MeasurementSet(
        tuple(
            RelativeMotionPair(p.v_a, p.v_b, 3.0 * p.kappa, 3.0 * p.tau) for p in m
        )
    )
    assert np.allclose(qcqp.assemble(scaled).q, 3.0 * qcqp.assemble(m).q)


def test_schur_complement_is_partial_minimum_over_t():
    # r_tilde^T q_tilde r_tilde must equal min over t of x^T q x (normal equations)
    m, _ = random_instance(10, n_motions=15, sigma_r=0.05, sigma_t=0.05)
    dm = qcqp.assemble(m)
    rng = np.random.default_rng(11)
    for _ in range(20):
        r = geom.random_rotation(rng)
        r_tilde = qcqp.reduced_vector(r, 1.0)
        reduced = float(r_tilde @ dm.q_tilde @ r_tilde)
        t_star = np.linalg.solve(dm.q_tt, -dm.q_t_rtilde @ r_tilde)
        x = np.concatenate([t_star, r_tilde])
        full = float(x @ dm.q @ x)
        assert abs(reduced - full) < 1e-10 * (1 + abs(full))
        # any other t is worse
        x_other = np.concatenate([t_star + rng.normal(size=3), r_tilde])
        assert float(x_other @ dm.q @ x_other) >= full - 1e-12


def test_reduced_vector_layout():
    r = geom.random_rotation(12)
    v = qcqp.reduced_vector(r, -1.0)
    assert v.shape == (10,)
    assert v[qcqp.Y_INDEX] == -1.0
    assert np.allclose(v[:9].reshape(3, 3, order="F"), r.m)


def test_constraint_counts():
    expected = {"r": 6, "r+c": 12, "r+h": 15, "r+c+h": 21}
    for kind, count in expected.items():
        cs = qcqp.constraint_catalog(kind)
        assert len(cs.matrices) == count
        assert cs.kind == kind


def test_constraint_catalog_rejects_unknown_kind():
    with pytest.raises(ValueError):
        qcqp.constraint_catalog("r+x")


def test_constraints_vanish_on_rotations():
    cs = qcqp.constraint_catalog("r+c+h")
    rng = np.random.default_rng(13)
    for _ in range(1000):
        y = 1.0 if rng.random() < 0.5 else -1.0
        r = geom.random_rotation(rng)
        v = qcqp.reduced_vector(r, 1.0) * y  # y = -1 flips the whole vector
        for a in cs.matrices:
            assert abs(v @ a @ v) < 1e-12
        assert abs(v @ cs.homogenizer @ v - 1.0) < 1e-12


def test_constraints_symmetric():
    cs = qcqp.constraint_catalog("r+c+h")
    for a in cs.matrices:
        assert np.linalg.norm(a - a.T) < 1e-15


def test_handedness_detects_reflection():
    # orthonormal rows with det = -1 pass all orthogonality constraints but
    # violate at least one handedness constraint
    reflection = np.diag([1.0, 1.0, -1.0])
    v = np.empty(10)
    v[:9] = reflection.reshape(9, order="F")
    v[9] = 1.0
    ortho = qcqp.constraint_catalog("r+c")
    for a in ortho.matrices:
        assert abs(v @ a @ v) < 1e-12
    handed = qcqp.constraint_catalog("r+c+h")
    violations = [abs(v @ a @ v) for a in handed.matrices[12:]]
    assert max(violations) > 0.5


def test_orthogonality_gram_rank():
    # The 12 row+column orthogonality matrices span an 11-dimensional space:
    # the sums of the two diagonal triples are the same matrix (both equal
    # sum_ij R_ij^2 - 3 y^2), which is the single linear dependency.
    cs = qcqp.constraint_catalog("r+c")
    flat = np.stack([a.ravel() for a in cs.matrices])
    assert np.linalg.matrix_rank(flat, tol=1e-10) == 11
    diag_rows = flat[0] + flat[3] + flat[5]       # (0,0), (1,1), (2,2) of R R^T
    diag_cols = flat[6] + flat[9] + flat[11]      # (0,0), (1,1), (2,2) of R^T R
    assert np.linalg.norm(diag_rows - diag_cols) < 1e-14
    # removing one diagonal matrix leaves an independent set
    keep = [i for i in range(12) if i != 11]
    assert np.linalg.matrix_rank(flat[keep], tol=1e-10) == 11


def test_full_catalog_gram_rank():
    cs = qcqp.constraint_catalog("r+c+h")
    flat = np.stack([a.ravel() for a in cs.matrices])
    assert np.linalg.matrix_rank(flat, tol=1e-10) == 20
