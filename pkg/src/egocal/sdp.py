"""Dense primal-dual interior-point solver for small equality-constrained SDPs.

Solves

    minimize    <C, X>
    subject to  <A_i, X> = b_i,  i = 1..m
                X >= 0 (PSD)

together with its dual

    maximize    b^T y
    subject to  S = C - sum_i y_i A_i >= 0,

using an infeasible-start path-following method with Nesterov-Todd scaling.
The centering weight is chosen adaptively from a Mehrotra-style affine
predictor step. The problems arising in this package have
dimension <= 13 and at most 22 constraints, so everything is dense and the
Schur system is solved via an SVD-based least-squares (the calibration
constraint sets contain one exact linear dependency).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import InfeasibleDetected, NumericalFailure

STATUS_OPTIMAL = "optimal"
STATUS_MAX_ITER = "max_iter"
STATUS_NUMERICAL_FAILURE = "numerical_failure"
STATUS_INFEASIBLE = "infeasible"

_STEP_FRACTION = 0.98


@dataclass(frozen=True)
class SdpProblem:
    cost: np.ndarray          # s x s symmetric
    constraints: np.ndarray   # m x s x s, each symmetric
    rhs: np.ndarray           # m

    def __post_init__(self):
        cost = np.asarray(self.cost, dtype=float)
        a = np.asarray(self.constraints, dtype=float)
        b = np.asarray(self.rhs, dtype=float)
        if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
            raise ValueError("cost must be square")
        if a.ndim != 3 or a.shape[1:] != cost.shape:
            raise ValueError("constraints must be (m, s, s) matching the cost")
        if b.shape != (a.shape[0],) or a.shape[0] == 0:
            raise ValueError("rhs must have one entry per constraint")
        for mat, name in [(cost, "cost")] + [(a[i], f"constraint {i}") for i in range(a.shape[0])]:
            if np.max(np.abs(mat - mat.T)) > 1e-12 * (1.0 + np.max(np.abs(mat))):
                raise ValueError(f"{name} matrix is not symmetric")
        object.__setattr__(self, "cost", cost)
        object.__setattr__(self, "constraints", a)
        object.__setattr__(self, "rhs", b)

    @property
    def dim(self) -> int:
        return self.cost.shape[0]


@dataclass
class SdpSolution:
    x_primal: np.ndarray
    multipliers: np.ndarray    # dual vector y: slack S = cost - sum_i y_i A_i
    primal_obj: float
    dual_obj: float
    kkt: dict                  # primal_residual, dual_residual, complementarity
    status: str
    iterations: int
    iterate_log: list = field(default_factory=list)


def _constraint_values(a: np.ndarray, x: np.ndarray) -> np.ndarray:
    return np.einsum("kij,ij->k", a, x)


def _nt_scaling(x: np.ndarray, s: np.ndarray):
    """W with W S W = X, via the Cholesky/SVD construction."""
    lx = scipy.linalg.cholesky(x, lower=True)
    ls = scipy.linalg.cholesky(s, lower=True)
    u, sv, vt = np.linalg.svd(ls.T @ lx)
    g = lx @ vt.T / np.sqrt(sv)
    return g @ g.T


def _max_step(x: np.ndarray, dx: np.ndarray) -> float:
    """Largest alpha <= 1 with x + alpha*dx staying PSD, with a safety fraction."""
    lx = scipy.linalg.cholesky(x, lower=True)
    inv_lx = scipy.linalg.solve_triangular(lx, np.eye(x.shape[0]), lower=True)
    m = inv_lx @ dx @ inv_lx.T
    lam = np.linalg.eigvalsh(0.5 * (m + m.T))[0]
    if lam >= 0:
        return 1.0
    return min(1.0, -_STEP_FRACTION / lam)


def solve(
    p: SdpProblem,
    tol_feas: float = 1e-9,
    tol_gap: float = 1e-9,
    max_iter: int = 100,
) -> SdpSolution:
    """Run the predictor-corrector iteration from the scaled-identity start."""
    s_dim = p.dim
    a = p.constraints
    b = p.rhs
    c = p.cost
    m = a.shape[0]

    scale = max(1.0, float(np.linalg.norm(c)) / np.sqrt(s_dim))
    x = np.eye(s_dim)
    s = np.eye(s_dim) * scale
    y = np.zeros(m)

    norm_b = 1.0 + np.linalg.norm(b)
    norm_c = 1.0 + np.linalg.norm(c)

    log = []
    status = STATUS_MAX_ITER
    it = 0
    try:
        for it in range(1, max_iter + 1):
            rp = b - _constraint_values(a, x)
            rd = c - np.einsum("k,kij->ij", y, a) - s
            gap = float(np.sum(x * s))
            mu = gap / s_dim
            pobj = float(np.sum(c * x))
            dobj = float(b @ y)
            pres = float(np.linalg.norm(rp)) / norm_b
            dres = float(np.linalg.norm(rd)) / norm_c
            log.append(
                {
                    "iter": it,
                    "primal_obj": pobj,
                    "dual_obj": dobj,
                    "primal_residual": pres,
                    "dual_residual": dres,
                    "complementarity": gap,
                    "mu": mu,
                    "x_norm": float(np.linalg.norm(x)),
                }
            )
            if (
                pres < tol_feas
                and dres < tol_feas
                and gap < tol_gap * (1.0 + abs(pobj) + abs(dobj))
            ):
                status = STATUS_OPTIMAL
                break
            # Crude divergence check: multipliers exploding while residuals stall.
            if np.linalg.norm(y) > 1e12 or np.max(np.abs(x)) > 1e14:
                raise InfeasibleDetected("iterates diverged; problem may be infeasible")

            w = _nt_scaling(x, s)
            s_inv = _inverse_psd(s)
            wa = np.einsum("ij,kjl,lm->kim", w, a, w)  # W A_k W
            schur = np.einsum("kij,lij->kl", a, wa)
            schur = 0.5 * (schur + schur.T)

            def direction(target):
                rhs_vec = rp - _constraint_values(a, target) + _constraint_values(a, w @ rd @ w)
                dy, *_ = np.linalg.lstsq(schur, rhs_vec, rcond=1e-13)
                ds = rd - np.einsum("k,kij->ij", dy, a)
                dx = target - w @ ds @ w
                return 0.5 * (dx + dx.T), dy, 0.5 * (ds + ds.T)

            # Predictor (affine scaling) chooses the centering weight.
            dx_a, dy_a, ds_a = direction(-x)
            ap = _max_step(x, dx_a)
            ad = _max_step(s, ds_a)
            mu_aff = float(np.sum((x + ap * dx_a) * (s + ad * ds_a))) / s_dim
            sigma = min(1.0, max(mu_aff / mu, 0.0) ** 3)
            sigma = max(sigma, 1e-4)
            # Recenter instead of stalling when the affine step is blocked.
            if min(ap, ad) < 0.05:
                sigma = max(sigma, 0.5)

            dx, dy, ds = direction(sigma * mu * s_inv - x)
            ap = _max_step(x, dx)
            ad = _max_step(s, ds)
            x = 0.5 * ((x + ap * dx) + (x + ap * dx).T)
            y = y + ad * dy
            s = 0.5 * ((s + ad * ds) + (s + ad * ds).T)
    except scipy.linalg.LinAlgError as exc:
        raise NumericalFailure(f"factorization failed at iteration {it}: {exc}") from exc
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"linear algebra failed at iteration {it}: {exc}") from exc

    rp = b - _constraint_values(a, x)
    rd = c - np.einsum("k,kij->ij", y, a) - s
    kkt = {
        "primal_residual": float(np.linalg.norm(rp)) / norm_b,
        "dual_residual": float(np.linalg.norm(rd)) / norm_c,
        "complementarity": float(np.sum(x * s)),
    }
    return SdpSolution(
        x_primal=x,
        multipliers=y,
        primal_obj=float(np.sum(c * x)),
        dual_obj=float(b @ y),
        kkt=kkt,
        status=status,
        iterations=it,
        iterate_log=log,
    )


def _inverse_psd(s: np.ndarray) -> np.ndarray:
    ls = scipy.linalg.cholesky(s, lower=True)
    inv_ls = scipy.linalg.solve_triangular(ls, np.eye(s.shape[0]), lower=True)
    return inv_ls.T @ inv_ls


def certify_lmi(cost, constraints, multipliers, tol_feas: float = 1e-9) -> dict:
    """Rebuild the dual slack H = cost - sum_i y_i A_i and test it for PSD.

    Independent of solver internals: only the multipliers are consumed. Returns
    the minimum eigenvalue and a scale-relative PSD verdict.
    """
    cost = np.asarray(cost, dtype=float)
    constraints = np.asarray(constraints, dtype=float)
    multipliers = np.asarray(multipliers, dtype=float)
    if constraints.shape[0] != multipliers.shape[0]:
        raise ValueError("need one multiplier per constraint")
    h = cost - np.einsum("k,kij->ij", multipliers, constraints)
    h = 0.5 * (h + h.T)
    min_eig = float(np.linalg.eigvalsh(h)[0])
    norm_h = float(np.linalg.norm(h, 2))
    return {
        "h": h,
        "min_eig": min_eig,
        "psd": min_eig > -tol_feas * (1.0 + norm_h),
    }
