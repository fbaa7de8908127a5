"""Quadratic-form assembly and the SO(3) constraint catalog.

The homogenized decision vector is x = [t (3), r = vec(R) column-major (9),
y (1)], so the data matrix is 13x13. After analytically minimizing over the
unconstrained translation, the reduced problem acts on r_tilde = [r, y] with a
10x10 Schur complement.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import SingularQtt, TooShort
from .geom import RotationMatrix
from .problem import MeasurementSet, RelativeMotionPair

DIM_FULL = 13
DIM_REDUCED = 10
Y_INDEX = 9  # index of the homogenizing variable inside r_tilde
SINGULAR_QTT_CONDITION = 1e12

CONSTRAINT_KINDS = ("r", "r+c", "r+h", "r+c+h")

_I3 = np.eye(3)


def rotation_block(pair: RelativeMotionPair) -> np.ndarray:
    """9x9 coefficient block mapping vec(R) to vec(R R_a - R_b R)."""
    return np.kron(pair.v_a.rotation.m.T, _I3) - np.kron(_I3, pair.v_b.rotation.m)


def translation_block(pair: RelativeMotionPair) -> np.ndarray:
    """3x13 coefficient block mapping x to R t_a + t - R_b t - y t_b."""
    block = np.zeros((3, DIM_FULL))
    block[:, :3] = _I3 - pair.v_b.rotation.m
    block[:, 3:12] = np.kron(pair.v_a.translation[None, :], _I3)
    block[:, 12] = -pair.v_b.translation
    return block


@dataclass(frozen=True)
class DataMatrix:
    """The assembled 13x13 quadratic form and its translation-reduced pieces."""

    q: np.ndarray            # 13x13, ordering [t, vec(R), y]
    q_tt: np.ndarray         # 3x3 translation block
    q_t_rtilde: np.ndarray   # 3x10 coupling block
    q_tilde: np.ndarray      # 10x10 Schur complement q / q_tt


def assemble(m: MeasurementSet) -> DataMatrix:
    """Sum per-measurement Gram contributions and Schur-reduce over translation.

    Raises SingularQtt when the translation block is numerically singular
    (condition number above 1e12), the signature of single-axis data.
    """
    if m.n < 2:
        raise TooShort("calibration requires at least two relative motions")
    q = np.zeros((DIM_FULL, DIM_FULL))
    for pair in m:
        mr = rotation_block(pair)
        q[3:12, 3:12] += pair.kappa * (mr.T @ mr)
        mt = translation_block(pair)
        q += pair.tau * (mt.T @ mt)
    q = 0.5 * (q + q.T)

    q_tt = q[:3, :3]
    q_t_rtilde = q[:3, 3:]
    eigs = np.linalg.eigvalsh(q_tt)
    if eigs[0] <= 0 or eigs[-1] / eigs[0] > SINGULAR_QTT_CONDITION:
        raise SingularQtt(
            "translation block of the data matrix is singular; "
            "measured rotations likely share a single axis"
        )
    # Schur complement through a Cholesky factor keeps q_tilde symmetric to
    # machine precision.
    chol = scipy.linalg.cholesky(q_tt, lower=True)
    half = scipy.linalg.solve_triangular(chol, q_t_rtilde, lower=True)
    q_tilde = q[3:, 3:] - half.T @ half
    q_tilde = 0.5 * (q_tilde + q_tilde.T)
    return DataMatrix(q=q, q_tt=q_tt, q_t_rtilde=q_t_rtilde, q_tilde=q_tilde)


def reduced_vector(rotation: RotationMatrix, y: float = 1.0) -> np.ndarray:
    """r_tilde = [vec(R) (column-major), y]."""
    out = np.empty(DIM_REDUCED)
    out[:9] = rotation.m.reshape(9, order="F")
    out[9] = y
    return out


def full_vector(translation, rotation: RotationMatrix, y: float = 1.0) -> np.ndarray:
    """x = [t, vec(R), y]."""
    out = np.empty(DIM_FULL)
    out[:3] = np.asarray(translation, dtype=float)
    out[3:] = reduced_vector(rotation, y)
    return out


def _rc(i: int, j: int) -> int:
    """Index of R[i, j] inside the column-major vec(R)."""
    return 3 * j + i


def _sym_add(a: np.ndarray, i: int, j: int, value: float) -> None:
    a[i, j] += 0.5 * value
    a[j, i] += 0.5 * value


def _row_orthogonality() -> list:
    """(R R^T)_{ij} = y^2 delta_{ij} over the upper triangle, 6 matrices."""
    mats = []
    for i, j in [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]:
        a = np.zeros((DIM_REDUCED, DIM_REDUCED))
        for k in range(3):
            _sym_add(a, _rc(i, k), _rc(j, k), 1.0)
        if i == j:
            a[Y_INDEX, Y_INDEX] -= 1.0
        mats.append(a)
    return mats


def _column_orthogonality() -> list:
    """(R^T R)_{ij} = y^2 delta_{ij} over the upper triangle, 6 matrices."""
    mats = []
    for i, j in [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]:
        a = np.zeros((DIM_REDUCED, DIM_REDUCED))
        for k in range(3):
            _sym_add(a, _rc(k, i), _rc(k, j), 1.0)
        if i == j:
            a[Y_INDEX, Y_INDEX] -= 1.0
        mats.append(a)
    return mats


def _handedness() -> list:
    """Column cross products R_i x R_j = y R_k, cyclic (i,j,k): 9 matrices."""
    mats = []
    for i, j, k in [(0, 1, 2), (1, 2, 0), (2, 0, 1)]:
        for m, p, q in [(0, 1, 2), (1, 2, 0), (2, 0, 1)]:
            # component m of column_i x column_j minus y * R[m, k]
            a = np.zeros((DIM_REDUCED, DIM_REDUCED))
            _sym_add(a, _rc(p, i), _rc(q, j), 1.0)
            _sym_add(a, _rc(q, i), _rc(p, j), -1.0)
            _sym_add(a, _rc(m, k), Y_INDEX, -1.0)
            mats.append(a)
    return mats


def homogenizer() -> np.ndarray:
    """E = e_y e_y^T, encoding y^2 = 1 via tr(E X) = 1."""
    e = np.zeros((DIM_REDUCED, DIM_REDUCED))
    e[Y_INDEX, Y_INDEX] = 1.0
    return e


@dataclass(frozen=True)
class ConstraintSet:
    """Catalog of quadratic-form matrices vanishing on every lifted rotation."""

    kind: str
    matrices: tuple          # of 10x10 symmetric ndarrays
    homogenizer: np.ndarray  # 10x10, r_tilde^T E r_tilde = 1


def constraint_catalog(kind: str = "r+c+h") -> ConstraintSet:
    """Build the constraint matrices for one of the four ablation sets.

    'r' is row orthogonality (6 matrices); '+c' adds the redundant column
    orthogonality (6 more); '+h' adds the right-handedness cross products (9).
    """
    kind = kind.lower()
    if kind not in CONSTRAINT_KINDS:
        raise ValueError(f"unknown constraint set {kind!r}; expected one of {CONSTRAINT_KINDS}")
    mats = _row_orthogonality()
    if "c" in kind:
        mats += _column_orthogonality()
    if "h" in kind:
        mats += _handedness()
    return ConstraintSet(kind=kind, matrices=tuple(mats), homogenizer=homogenizer())
