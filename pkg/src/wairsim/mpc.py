"""Receding-horizon force controller built on a condensed prediction model.

The continuous model from :mod:`wairsim.vlip` is discretized by forward
Euler (F = I + A dt, G = B dt), stacked over the horizon into condensed
prediction matrices Z = H U + W x0 (+ affine rollout), and turned into a
quadratic tracking cost J(U) = U' R U + b' U + c equal to the weighted
squared error against the stacked reference.  The decision variables are
the per-step ground reaction forces; feasibility is a normal-force floor,
a friction-cone face, and box bounds, all as linear inequality rows.

Each control step solves the resulting QP and applies the first input
block.  The tracking Hessian is rank-deficient (the force pair enters the
dynamics through a single scalar combination per step), so the solver's
diagonal regularization both makes the solve well-posed and tie-breaks
the leftover force freedom toward the smallest feasible forces; the
normal component therefore settles on its lower bound in steady state.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .qp import QpProblem, QpSolution, SolverConfig, solve
from .vlip import GroundReaction, LtiModel, VlipState

__all__ = [
    "FrictionMode",
    "MpcConfig",
    "PredictionMatrices",
    "ReferenceTrajectory",
    "discretize",
    "condense",
    "build_cost",
    "build_constraints",
    "mpc_step",
    "MPC_STEP_SOLVER",
]

# Elevated regularization versus the solver default: it resolves the
# tracking-null force directions toward minimum-magnitude forces without
# measurably perturbing the tracked trajectory.
MPC_STEP_SOLVER = SolverConfig(tolerance=1e-8, max_iterations=50,
                               regularization=1e-6, polish=True)


class FrictionMode(Enum):
    # ONE_SIDED keeps only the up-slope cone face lambda_x <= mu * lambda_y.
    # TWO_SIDED adds the braking face -lambda_x <= mu * lambda_y, which is
    # only a valid linearization of |lambda_x| <= mu * |lambda_y| when the
    # normal force is kept strictly positive.
    ONE_SIDED = "one_sided"
    TWO_SIDED = "two_sided"


@dataclass(frozen=True)
class MpcConfig:
    horizon_nh: int = 5
    dt: float = 0.01  # s, prediction time step
    q_weight: tuple[float, float] = (100.0, 10.0)   # (position, velocity) per step
    u_min: tuple[float, float] = (-200.0, -200.0)   # N, (lambda_x, lambda_y)
    u_max: tuple[float, float] = (200.0, 200.0)     # N
    mu_s: float = 0.5
    lambda_min_n: float = 10.0  # N, smallest admissible normal force
    friction_mode: FrictionMode = FrictionMode.ONE_SIDED

    def __post_init__(self):
        if self.horizon_nh < 1:
            raise ValueError("horizon_nh must be at least 1")
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.mu_s <= 0.0:
            raise ValueError("mu_s must be positive")
        if self.lambda_min_n < 0.0:
            raise ValueError("lambda_min_n must be nonnegative")
        if min(self.q_weight) < 0.0:
            raise ValueError("q_weight entries must be nonnegative")
        if any(lo > hi for lo, hi in zip(self.u_min, self.u_max)):
            raise ValueError("u_min must not exceed u_max")


@dataclass(frozen=True)
class PredictionMatrices:
    """Condensed horizon model: Z = H U + W x0 + affine_rollout."""

    f_matrix: np.ndarray       # 2x2 discrete state matrix
    g_matrix: np.ndarray       # 2x2 discrete input matrix
    h_matrix: np.ndarray       # (2 nh) x (2 nh), block (i, j) = F^(i-j) G for i >= j
    w_matrix: np.ndarray       # (2 nh) x 2, block i = F^(i+1)
    affine_rollout: np.ndarray  # (2 nh), cumulative per-step affine contribution

    @property
    def horizon(self) -> int:
        return self.w_matrix.shape[0] // 2


@dataclass(frozen=True)
class ReferenceTrajectory:
    """Sampled slope-frame reference: position and velocity over time."""

    times: np.ndarray
    x: np.ndarray
    xdot: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        x = np.asarray(self.x, dtype=float)
        xdot = np.asarray(self.xdot, dtype=float)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "xdot", xdot)
        if times.ndim != 1 or times.size < 2:
            raise ValueError("reference needs at least two samples")
        if x.shape != times.shape or xdot.shape != times.shape:
            raise ValueError("reference arrays must share one shape")
        if not (np.isfinite(times).all() and np.isfinite(x).all()
                and np.isfinite(xdot).all()):
            raise ValueError("reference samples must be finite")
        if (np.diff(times) <= 0.0).any():
            raise ValueError("reference timestamps must strictly increase")

    def at(self, t: float) -> tuple[float, float]:
        """Position (linear interpolation) and velocity (previous-sample hold)."""
        x_ref = float(np.interp(t, self.times, self.x))
        idx = int(np.searchsorted(self.times, t, side="right")) - 1
        idx = min(max(idx, 0), self.times.size - 1)
        return x_ref, float(self.xdot[idx])

    def stacked(self, t0: float, dt: float, horizon: int) -> np.ndarray:
        """Reference states at t0 + dt, ..., t0 + horizon * dt, stacked."""
        out = np.empty(2 * horizon)
        for k in range(horizon):
            out[2 * k], out[2 * k + 1] = self.at(t0 + (k + 1) * dt)
        return out


def discretize(model: LtiModel, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Forward-Euler discretization: F = I + A dt, G = B dt."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    f = np.eye(2) + model.a_matrix * dt
    g = model.b_matrix * dt
    return f, g


def condense(f_matrix: np.ndarray, g_matrix: np.ndarray, horizon_nh: int,
             affine_offset: np.ndarray | None = None) -> PredictionMatrices:
    """Stack the one-step model over the horizon.

    ``affine_offset`` is the per-step constant of the discrete recursion
    x[k+1] = F x[k] + G u[k] + offset; pass None (or zeros) without it.
    """
    if horizon_nh < 1:
        raise ValueError("horizon_nh must be at least 1")
    f = np.asarray(f_matrix, dtype=float)
    g = np.asarray(g_matrix, dtype=float)
    nh = horizon_nh
    offset = np.zeros(2) if affine_offset is None else np.asarray(affine_offset, float)

    # f_powers[p] = F^p for p = 0..nh
    f_powers = [np.eye(2)]
    for _ in range(nh):
        f_powers.append(f @ f_powers[-1])

    h = np.zeros((2 * nh, 2 * nh))
    w = np.zeros((2 * nh, 2))
    affine = np.zeros(2 * nh)
    running = np.zeros(2)
    for i in range(nh):
        w[2 * i:2 * i + 2] = f_powers[i + 1]
        running = f @ running + offset
        affine[2 * i:2 * i + 2] = running
        for j in range(i + 1):
            h[2 * i:2 * i + 2, 2 * j:2 * j + 2] = f_powers[i - j] @ g
    return PredictionMatrices(f, g, h, w, affine)


def build_cost(pred: PredictionMatrices, x0: VlipState, z_ref: np.ndarray,
               q_weight: tuple[float, float]) -> tuple[np.ndarray, np.ndarray, float]:
    """Expand J(U) = || Z(U) - Z_ref ||^2_Qbar into (R, b, c).

    R = H' Qbar H, b = 2 H' Qbar e, c = e' Qbar e with
    e = W x0 + affine_rollout - z_ref and Qbar the per-step weights
    repeated along the horizon.  The identity J(U) = U' R U + b' U + c
    holds for every U.
    """
    nh = pred.horizon
    z_ref = np.asarray(z_ref, dtype=float)
    if z_ref.shape != (2 * nh,):
        raise ValueError(f"z_ref must have length {2 * nh}, got {z_ref.shape}")
    qbar = np.tile(np.asarray(q_weight, dtype=float), nh)
    e = pred.w_matrix @ x0.as_array() + pred.affine_rollout - z_ref
    hq = pred.h_matrix.T * qbar  # rows of H' scaled: H' Qbar
    r = hq @ pred.h_matrix
    b = 2.0 * (hq @ e)
    c = float(e @ (qbar * e))
    return r, b, c


def build_constraints(config: MpcConfig,
                      horizon_nh: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Inequality rows G_ineq U <= h_ineq over the whole horizon.

    Per step: normal-force floor, friction-cone face(s), then the four box
    rows.  The cone rows use lambda_y directly in place of |lambda_y|,
    which is valid because the floor keeps lambda_y positive.
    """
    nh = config.horizon_nh if horizon_nh is None else horizon_nh
    if nh < 1:
        raise ValueError("horizon_nh must be at least 1")
    two_sided = config.friction_mode is FrictionMode.TWO_SIDED
    if two_sided and config.lambda_min_n <= 0.0:
        raise ValueError(
            "two-sided friction cone requires lambda_min_n > 0; the linear "
            "cone rows are invalid when the normal force may reach zero")
    rows_per_step = 7 if two_sided else 6
    g = np.zeros((rows_per_step * nh, 2 * nh))
    h = np.zeros(rows_per_step * nh)
    for k in range(nh):
        ix, iy = 2 * k, 2 * k + 1
        r = rows_per_step * k
        # normal-force floor: -lambda_y <= -lambda_min_n
        g[r, iy] = -1.0
        h[r] = -config.lambda_min_n
        # cone face: lambda_x - mu * lambda_y <= 0
        g[r + 1, ix] = 1.0
        g[r + 1, iy] = -config.mu_s
        h[r + 1] = 0.0
        r += 2
        if two_sided:
            g[r, ix] = -1.0
            g[r, iy] = -config.mu_s
            h[r] = 0.0
            r += 1
        # box bounds
        g[r, ix] = 1.0
        h[r] = config.u_max[0]
        g[r + 1, ix] = -1.0
        h[r + 1] = -config.u_min[0]
        g[r + 2, iy] = 1.0
        h[r + 2] = config.u_max[1]
        g[r + 3, iy] = -1.0
        h[r + 3] = -config.u_min[1]
    return g, h


def mpc_step(config: MpcConfig, model: LtiModel, x0: VlipState,
             reference: ReferenceTrajectory, t: float,
             solver_config: SolverConfig = MPC_STEP_SOLVER,
             ) -> tuple[GroundReaction, QpSolution]:
    """One receding-horizon solve; returns the first input block and diagnostics.

    The caller owns the linearization policy: pass a model linearized at
    the current state (full-Taylor relinearization) or a fixed-point model.
    Infeasible or iteration-capped solves are surfaced in the returned
    diagnostics; the returned force is only meaningful for OPTIMAL status.
    """
    nh = config.horizon_nh
    f, g = discretize(model, config.dt)
    offset = model.absolute_offset() * config.dt
    pred = condense(f, g, nh, offset if offset.any() else None)
    z_ref = reference.stacked(t, config.dt, nh)
    r, b, _ = build_cost(pred, x0, z_ref, config.q_weight)
    g_ineq, h_ineq = build_constraints(config)
    p = r + r.T  # 2R, symmetrized
    problem = QpProblem(p, b, g_ineq, h_ineq)
    solution = solve(problem, solver_config)
    ux, uy = float(solution.u_star[0]), float(solution.u_star[1])
    if not (np.isfinite(ux) and np.isfinite(uy)):
        ux = uy = 0.0  # non-Optimal status carries the diagnosis
    u0 = GroundReaction(ux, uy)
    return u0, solution
