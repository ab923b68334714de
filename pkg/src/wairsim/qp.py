"""Dense convex quadratic programming for small control problems.

Problems are stated in one canonical inequality form,

    minimize    0.5 * u' P u + q' u
    subject to  G u <= h

with P symmetric positive semidefinite.  Two independent routes are
provided:

* :func:`solve` -- a primal-dual interior-point method with Mehrotra
  predictor-corrector steps, an infeasible start from the regularized
  unconstrained minimizer, a fixed fraction-to-boundary of 0.99, and an
  optional active-set polish of the converged iterate.
* :func:`active_set_oracle` -- brute-force enumeration of candidate
  active sets for small strictly convex instances; slow but definitional,
  intended as ground truth when validating the interior-point path.

Everything is deterministic: identical inputs produce identical outputs.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.linalg

__all__ = [
    "QpProblem",
    "QpSolution",
    "SolverConfig",
    "SolveStatus",
    "solve",
    "active_set_oracle",
    "kkt_residuals",
]

_FRACTION_TO_BOUNDARY = 0.99
_SINGULAR_EIG_CUTOFF = 1e-12  # regularization engages below this eigenvalue


class SolveStatus(Enum):
    OPTIMAL = "optimal"
    MAX_ITERATIONS = "max_iterations"
    INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class SolverConfig:
    tolerance: float = 1e-8
    max_iterations: int = 50
    regularization: float = 1e-10  # added to diag(P) when P is (near-)singular
    polish: bool = True            # refine the converged iterate on its active set

    def __post_init__(self):
        if self.tolerance <= 0.0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.regularization < 0.0:
            raise ValueError("regularization must be nonnegative")


@dataclass(frozen=True)
class QpProblem:
    """Dense QP data.  Validates symmetry, PSD-ness and dimensions."""

    p_matrix: np.ndarray
    q_vector: np.ndarray
    g_matrix: np.ndarray
    h_vector: np.ndarray

    def __post_init__(self):
        p = np.atleast_2d(np.asarray(self.p_matrix, dtype=float))
        q = np.atleast_1d(np.asarray(self.q_vector, dtype=float))
        g = np.asarray(self.g_matrix, dtype=float)
        h = np.atleast_1d(np.asarray(self.h_vector, dtype=float))
        if g.size == 0:
            g = g.reshape(0, p.shape[0])
            h = h.reshape(0)
        g = np.atleast_2d(g)
        object.__setattr__(self, "p_matrix", p)
        object.__setattr__(self, "q_vector", q)
        object.__setattr__(self, "g_matrix", g)
        object.__setattr__(self, "h_vector", h)
        n = p.shape[0]
        if p.shape != (n, n):
            raise ValueError(f"P must be square, got {p.shape}")
        if q.shape != (n,):
            raise ValueError(f"q must have length {n}, got {q.shape}")
        if g.shape[1] != n:
            raise ValueError(f"G must have {n} columns, got {g.shape}")
        if h.shape != (g.shape[0],):
            raise ValueError(f"h must have length {g.shape[0]}, got {h.shape}")
        if not (np.isfinite(p).all() and np.isfinite(q).all()
                and np.isfinite(g).all() and np.isfinite(h).all()):
            raise ValueError("QP data must be finite")
        p_scale = np.abs(p).max() if p.size else 0.0
        if p_scale > 0.0 and np.abs(p - p.T).max() > 1e-10 * p_scale:
            raise ValueError("P must be symmetric to 1e-10 relative tolerance")
        if n > 0:
            min_eig = float(scipy.linalg.eigvalsh(p, subset_by_index=(0, 0))[0])
            if min_eig < -1e-9 * max(p_scale, 1.0):
                raise ValueError(f"P must be positive semidefinite, min eigenvalue {min_eig}")
            object.__setattr__(self, "_min_eig", min_eig)

    @property
    def n(self) -> int:
        return self.p_matrix.shape[0]

    @property
    def m(self) -> int:
        return self.g_matrix.shape[0]

    def objective(self, u: np.ndarray) -> float:
        u = np.asarray(u, dtype=float)
        return float(0.5 * u @ self.p_matrix @ u + self.q_vector @ u)


@dataclass
class QpSolution:
    u_star: np.ndarray
    status: SolveStatus
    iterations: int
    primal_residual: float
    dual_residual: float
    duality_gap: float
    solve_time: float
    multipliers: np.ndarray = field(default_factory=lambda: np.zeros(0))
    gap_trace: np.ndarray = field(default_factory=lambda: np.zeros(0))


def kkt_residuals(problem: QpProblem, u: np.ndarray,
                  multipliers: np.ndarray) -> tuple[float, float, float]:
    """Raw KKT residual norms (stationarity, primal violation, complementarity)."""
    u = np.asarray(u, dtype=float)
    z = np.asarray(multipliers, dtype=float)
    if u.shape != (problem.n,) or z.shape != (problem.m,):
        raise ValueError("dimension mismatch in kkt_residuals")
    stationarity = float(np.abs(problem.p_matrix @ u + problem.q_vector
                                + problem.g_matrix.T @ z).max(initial=0.0))
    if problem.m == 0:
        return stationarity, 0.0, 0.0
    slack = problem.h_vector - problem.g_matrix @ u
    primal = float(np.maximum(-slack, 0.0).max(initial=0.0))
    complementarity = float(np.abs(z * slack).max(initial=0.0))
    return stationarity, primal, complementarity


def _regularized_p(problem: QpProblem, config: SolverConfig) -> np.ndarray:
    p = problem.p_matrix
    min_eig = getattr(problem, "_min_eig", 0.0)
    if min_eig < _SINGULAR_EIG_CUTOFF and config.regularization > 0.0:
        return p + config.regularization * np.eye(problem.n)
    return p


def _chol_solve_factory(m_matrix: np.ndarray):
    """Cholesky factor with escalating jitter; returns a solve closure."""
    scale = max(np.abs(m_matrix).max(), 1.0)
    jitter = 0.0
    for _ in range(8):
        try:
            factor = scipy.linalg.cho_factor(
                m_matrix + jitter * np.eye(m_matrix.shape[0]) if jitter else m_matrix,
                lower=True, check_finite=False)
            return lambda rhs: scipy.linalg.cho_solve(factor, rhs, check_finite=False)
        except scipy.linalg.LinAlgError:
            jitter = max(jitter * 100.0, 1e-14 * scale)
    raise scipy.linalg.LinAlgError("KKT matrix could not be factorized")


def _max_step(v: np.ndarray, dv: np.ndarray) -> float:
    """Largest alpha in [0, 1] keeping v + alpha * dv nonnegative."""
    neg = dv < 0.0
    if not neg.any():
        return 1.0
    return float(min(1.0, np.min(-v[neg] / dv[neg])))


def _farkas_certificate(problem: QpProblem, z: np.ndarray) -> bool:
    """True when the normalized multipliers certify primal infeasibility."""
    total = z.sum()
    if total <= 0.0:
        return False
    y = z / total
    g_scale = max(np.abs(problem.g_matrix).max(initial=0.0), 1.0)
    h_scale = 1.0 + np.abs(problem.h_vector).max(initial=0.0)
    return (np.abs(problem.g_matrix.T @ y).max(initial=0.0) <= 1e-7 * g_scale
            and problem.h_vector @ y <= -1e-7 * h_scale)


def _polish(problem: QpProblem, p_reg: np.ndarray, u: np.ndarray, s: np.ndarray,
            z: np.ndarray, tol: float):
    """Solve the equality KKT system on the active set guessed from z > s.

    Returns refined (u, z) or None when the refinement is rejected (wrong
    active-set guess, singularity, or degraded residuals).
    """
    active = z > s
    n = problem.n
    h_scale = 1.0 + np.abs(problem.h_vector).max(initial=0.0)
    try:
        if active.any():
            g_act = problem.g_matrix[active]
            k = g_act.shape[0]
            kkt = np.zeros((n + k, n + k))
            kkt[:n, :n] = p_reg
            kkt[:n, n:] = g_act.T
            kkt[n:, :n] = g_act
            rhs = np.concatenate([-problem.q_vector, problem.h_vector[active]])
            try:
                sol = np.linalg.solve(kkt, rhs)
            except np.linalg.LinAlgError:
                sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
            u_new = sol[:n]
            nu = sol[n:]
        else:
            u_new = np.linalg.solve(p_reg, -problem.q_vector)
            nu = np.zeros(0)
    except np.linalg.LinAlgError:
        return None
    if not np.isfinite(u_new).all() or not np.isfinite(nu).all():
        return None
    z_new = np.zeros(problem.m)
    z_new[active] = nu
    slack_new = problem.h_vector - problem.g_matrix @ u_new
    viol_new = np.maximum(-slack_new, 0.0).max(initial=0.0)
    if viol_new > 10.0 * tol * h_scale:
        return None
    if nu.size and nu.min() < -10.0 * tol * (1.0 + np.abs(nu).max()):
        return None
    stat_new = np.abs(p_reg @ u_new + problem.q_vector
                      + problem.g_matrix.T @ z_new).max(initial=0.0)
    stat_old = np.abs(p_reg @ u + problem.q_vector
                      + problem.g_matrix.T @ z).max(initial=0.0)
    if stat_new > max(stat_old, tol * (1.0 + np.abs(problem.q_vector).max(initial=0.0))):
        return None
    return u_new, z_new


def solve(problem: QpProblem, config: SolverConfig = SolverConfig()) -> QpSolution:
    """Primal-dual interior-point solve of the inequality-constrained QP.

    An Optimal status certifies, to the configured tolerance, stationarity
    scaled by (1 + |q|), primal feasibility scaled by (1 + |h|), and a
    complementarity gap scaled by (1 + |objective|).  When regularization
    engages (rank-deficient P), residuals refer to the regularized problem.
    The recorded per-iteration gap trace is non-increasing by construction:
    steps are backtracked, falling back to a centering direction if needed,
    until the total complementarity s'z does not grow.
    """
    t_start = time.perf_counter()
    n, m = problem.n, problem.m
    p_reg = _regularized_p(problem, config)
    q, g, h = problem.q_vector, problem.g_matrix, problem.h_vector
    gt = g.T
    tol = config.tolerance
    q_scale = 1.0 + np.abs(q).max(initial=0.0)
    h_scale = 1.0 + np.abs(h).max(initial=0.0)

    # Start from the regularized unconstrained minimizer, pushed strictly
    # inside the nonnegative orthant for slacks and multipliers.
    try:
        u = np.linalg.solve(p_reg, -q)
    except np.linalg.LinAlgError:
        u = np.linalg.lstsq(p_reg, -q, rcond=None)[0]

    if m == 0:
        stat = float(np.abs(p_reg @ u + q).max(initial=0.0))
        return QpSolution(u, SolveStatus.OPTIMAL, 0, 0.0, stat, 0.0,
                          time.perf_counter() - t_start, np.zeros(0), np.zeros(0))

    r = h - g @ u
    shift = max(0.0, -1.5 * float(r.min()))
    s = np.maximum(r + shift, 1e-2 * h_scale)
    z = np.ones(m)

    gap_trace = []
    status = SolveStatus.MAX_ITERATIONS
    iterations = 0
    stat_norm = viol = gap = np.inf

    for it in range(config.max_iterations):
        iterations = it
        r_d = p_reg @ u + q + gt @ z
        gu = g @ u
        r_p = gu + s - h
        gap = float(s @ z)
        gap_trace.append(gap)
        stat_norm = float(np.abs(r_d).max())
        viol = float(np.maximum(gu - h, 0.0).max(initial=0.0))
        pobj = 0.5 * float(u @ (p_reg @ u)) + float(q @ u)
        if (stat_norm <= tol * q_scale and viol <= tol * h_scale
                and gap <= tol * (1.0 + abs(pobj))):
            status = SolveStatus.OPTIMAL
            break
        if z.sum() > 1e4 * m and _farkas_certificate(problem, z):
            status = SolveStatus.INFEASIBLE
            break

        d = z / s
        kkt_solve = _chol_solve_factory(p_reg + (gt * d) @ g)

        # Predictor (affine scaling) direction.
        rhs_aff = -r_d - gt @ (d * r_p - z)
        du_aff = kkt_solve(rhs_aff)
        ds_aff = -r_p - g @ du_aff
        dz_aff = d * (g @ du_aff + r_p) - z
        alpha_p_aff = _max_step(s, ds_aff)
        alpha_d_aff = _max_step(z, dz_aff)
        mu = gap / m
        mu_aff = float((s + alpha_p_aff * ds_aff) @ (z + alpha_d_aff * dz_aff)) / m
        sigma = min(max(mu_aff / mu, 0.0) ** 3, 0.99)

        def combined_direction(sigma_c, corrector):
            r_c = s * z - sigma_c * mu
            if corrector is not None:
                r_c = r_c + corrector
            rhs = -r_d - gt @ (d * r_p - r_c / s)
            du = kkt_solve(rhs)
            ds = -r_p - g @ du
            dz = d * (g @ du + r_p) - r_c / s
            return du, ds, dz

        du, ds, dz = combined_direction(sigma, ds_aff * dz_aff)
        alpha_p = _FRACTION_TO_BOUNDARY * _max_step(s, ds)
        alpha_d = _FRACTION_TO_BOUNDARY * _max_step(z, dz)

        # Monotone-gap safeguard: backtrack, then fall back to a pure
        # centering direction whose initial gap derivative is negative.
        accepted = False
        for attempt in range(2):
            ap, ad = alpha_p, alpha_d
            for _ in range(40):
                gap_new = float((s + ap * ds) @ (z + ad * dz))
                if gap_new <= gap:
                    accepted = True
                    break
                ap *= 0.5
                ad *= 0.5
            if accepted:
                break
            du, ds, dz = combined_direction(0.8, None)
            alpha_p = _FRACTION_TO_BOUNDARY * _max_step(s, ds)
            alpha_d = _FRACTION_TO_BOUNDARY * _max_step(z, dz)
        if not accepted:
            ap = ad = 0.0  # stall; next residual check or budget ends the solve
        u = u + ap * du
        s = s + ap * ds
        z = z + ad * dz
        iterations = it + 1

    if status is SolveStatus.MAX_ITERATIONS:
        # Budget exhausted: report the residuals of the final iterate.
        stat_norm = float(np.abs(p_reg @ u + q + gt @ z).max(initial=0.0))
        viol = float(np.maximum(g @ u - h, 0.0).max(initial=0.0))
        gap = float(s @ z)

    if status is SolveStatus.OPTIMAL and config.polish:
        polished = _polish(problem, p_reg, u, s, z, tol)
        if polished is not None:
            u, z = polished
            s = np.maximum(h - g @ u, 0.0)
            r_d = p_reg @ u + q + gt @ z
            stat_norm = float(np.abs(r_d).max(initial=0.0))
            viol = float(np.maximum(g @ u - h, 0.0).max(initial=0.0))
            gap_new = float(np.abs(z * (h - g @ u)).sum())
            if gap_trace and gap_new <= gap_trace[-1]:
                gap_trace.append(gap_new)
            gap = gap_new

    return QpSolution(
        u_star=u,
        status=status,
        iterations=iterations,
        primal_residual=viol,
        dual_residual=stat_norm,
        duality_gap=gap,
        solve_time=time.perf_counter() - t_start,
        multipliers=z,
        gap_trace=np.asarray(gap_trace),
    )


_ORACLE_MAX_N = 12
_ORACLE_MAX_M = 24
_ORACLE_CHUNK = 16384


def active_set_oracle(problem: QpProblem) -> QpSolution:
    """Exhaustive active-set enumeration for small strictly convex QPs.

    Every candidate active set (all subsets up to size n; larger sets are
    either inconsistent or dominated by a rank-equivalent subset) is solved
    as an equality-constrained QP; among the primal-feasible candidates the
    one with the smallest objective is returned.  Exact up to linear-solve
    conditioning, and deliberately independent of the interior-point path.
    """
    t_start = time.perf_counter()
    n, m = problem.n, problem.m
    if n > _ORACLE_MAX_N or m > _ORACLE_MAX_M:
        raise ValueError(
            f"oracle enumeration bound exceeded: n={n} (max {_ORACLE_MAX_N}), "
            f"m={m} (max {_ORACLE_MAX_M})")
    min_eig = getattr(problem, "_min_eig", 0.0)
    p_scale = max(np.abs(problem.p_matrix).max(initial=0.0), 1.0)
    if min_eig <= 1e-12 * p_scale:
        raise ValueError("oracle requires a strictly positive definite P")

    p, q, g, h = problem.p_matrix, problem.q_vector, problem.g_matrix, problem.h_vector
    factor = scipy.linalg.cho_factor(p, lower=True, check_finite=False)
    pinv_q = scipy.linalg.cho_solve(factor, q, check_finite=False)
    u_free = -pinv_q
    feas_tol = 1e-9 * (1.0 + np.abs(h).max(initial=0.0))

    best_obj = np.inf
    best_u = None
    best_idx: tuple = ()
    best_nu = np.zeros(0)
    best_dual_min = -np.inf
    obj_tie_tol = 1e-9
    systems_solved = 0

    def consider(u, idx, nu, obj):
        nonlocal best_obj, best_u, best_idx, best_nu, best_dual_min
        dual_min = float(nu.min()) if nu.size else 0.0
        better = obj < best_obj - obj_tie_tol * (1.0 + abs(obj))
        tied = abs(obj - best_obj) <= obj_tie_tol * (1.0 + abs(obj))
        if better or (tied and dual_min > best_dual_min + 1e-12):
            best_obj = obj
            best_u = np.array(u)
            best_idx = tuple(idx)
            best_nu = np.array(nu)
            best_dual_min = dual_min

    if m == 0 or (g @ u_free - h).max(initial=-np.inf) <= feas_tol:
        consider(u_free, (), np.zeros(0), problem.objective(u_free))
    systems_solved += 1

    if m > 0:
        pinv_gt = scipy.linalg.cho_solve(factor, g.T, check_finite=False)  # (n, m)
        m_schur = g @ pinv_gt                                              # (m, m)
        r0 = h + g @ pinv_q

        for k in range(1, min(n, m) + 1):
            combos_iter = itertools.combinations(range(m), k)
            while True:
                chunk = list(itertools.islice(combos_iter, _ORACLE_CHUNK))
                if not chunk:
                    break
                idx = np.array(chunk)                                   # (C, k)
                m_sub = m_schur[idx[:, :, None], idx[:, None, :]]       # (C, k, k)
                rhs = -r0[idx]                                          # (C, k)
                try:
                    nus = np.linalg.solve(m_sub, rhs[..., None])[..., 0]
                except np.linalg.LinAlgError:
                    nus = np.empty_like(rhs)
                    for row in range(idx.shape[0]):
                        try:
                            nus[row] = np.linalg.solve(m_sub[row], rhs[row])
                        except np.linalg.LinAlgError:
                            nus[row] = np.linalg.lstsq(m_sub[row], rhs[row],
                                                       rcond=None)[0]
                us = -pinv_q[None, :] - np.einsum("nck,ck->cn", pinv_gt[:, idx], nus)
                systems_solved += idx.shape[0]
                finite = np.isfinite(us).all(axis=1) & np.isfinite(nus).all(axis=1)
                viol = (us @ g.T - h).max(axis=1)
                feasible = finite & (viol <= feas_tol)
                if not feasible.any():
                    continue
                objs = 0.5 * np.einsum("ci,ci->c", us @ p, us) + us @ q
                for row in np.flatnonzero(feasible):
                    consider(us[row], idx[row], nus[row], float(objs[row]))

    solve_time = time.perf_counter() - t_start
    if best_u is None:
        return QpSolution(u_free, SolveStatus.INFEASIBLE, systems_solved,
                          float(np.maximum(g @ u_free - h, 0.0).max(initial=0.0)),
                          np.inf, np.inf, solve_time, np.zeros(m), np.zeros(0))
    z_full = np.zeros(m)
    if best_idx:
        z_full[list(best_idx)] = best_nu
    stat, primal, comp = kkt_residuals(problem, best_u, z_full)
    return QpSolution(best_u, SolveStatus.OPTIMAL, systems_solved,
                      primal, stat, comp, solve_time, z_full, np.zeros(0))
