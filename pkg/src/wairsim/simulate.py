"""Closed-loop climbing simulation.

The loop marches the nonlinear pendulum dynamics with a fixed-step
classical Runge-Kutta integrator while the force controller runs at a
slower period with zero-order hold between solves.  Footholds are fixed
points on the slope: the commanded center of pressure jumps forward by
one stride whenever the body has moved half a stride past it, which makes
the body motion symmetric about each foothold.  The slope-frame reference
is a velocity ramp with a single velocity step partway through the run.

Thruster forces never feed back into the planar dynamics; they are
recovered from the force balance at every step and logged, together with
the world-frame body position obtained by rotating the slope frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .mpc import MpcConfig, ReferenceTrajectory, mpc_step
from .qp import SolveStatus
from .vlip import (
    GroundReaction,
    LinearizationMode,
    LinearizationPoint,
    VlipParams,
    VlipState,
    cop_acceleration,
    linearize,
    recover_thruster_forces,
    slope_to_world,
)

__all__ = [
    "CopUpdateRule",
    "ReferenceSpec",
    "SimConfig",
    "SimLog",
    "rk4_step",
    "generate_reference",
    "update_cop",
    "run",
    "default_sim_config",
]

_DEFAULT_ALPHA = math.radians(40.0)


class CopUpdateRule(Enum):
    SYMMETRIC_ABOUT_COP = "symmetric_about_cop"


@dataclass(frozen=True)
class ReferenceSpec:
    cruise_speed: float = 0.2    # m/s before the step
    step_time: float = 5.0       # s
    step_velocity: float = 0.4   # m/s after the step

    def __post_init__(self):
        for v in (self.cruise_speed, self.step_time, self.step_velocity):
            if not math.isfinite(v):
                raise ValueError("reference spec values must be finite")
        if self.step_time < 0.0:
            raise ValueError("step_time must be nonnegative")


@dataclass(frozen=True)
class SimConfig:
    duration: float = 10.0
    sim_dt: float = 0.001
    mpc_period: float = 0.01
    slope_alpha: float = _DEFAULT_ALPHA
    cop_stride: float = 0.1
    cop_update_rule: CopUpdateRule = CopUpdateRule.SYMMETRIC_ABOUT_COP
    reference_spec: ReferenceSpec = ReferenceSpec()
    initial_state: VlipState = VlipState(0.0, 0.0)
    vlip: VlipParams = VlipParams(mass=8.0, y0=0.45, gravity=9.81,
                                  slope_alpha=_DEFAULT_ALPHA)
    mpc: MpcConfig = MpcConfig()
    linearization_mode: LinearizationMode = LinearizationMode.FULL_TAYLOR
    initial_x_cop: float | None = None       # None: start under the COM
    initial_lambda_y: float | None = None    # None: m * g * cos(alpha)

    def __post_init__(self):
        if self.duration < 0.0:
            raise ValueError("duration must be nonnegative")
        if self.sim_dt <= 0.0:
            raise ValueError("sim_dt must be positive")
        if self.mpc_period < self.sim_dt:
            raise ValueError("mpc_period must be at least sim_dt")
        ratio = self.mpc_period / self.sim_dt
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("mpc_period must be an integer multiple of sim_dt")
        if self.cop_stride <= 0.0:
            raise ValueError("cop_stride must be positive")
        if abs(self.vlip.slope_alpha - self.slope_alpha) > 1e-12:
            raise ValueError("vlip.slope_alpha must match slope_alpha")

    @property
    def steps_per_mpc(self) -> int:
        return int(round(self.mpc_period / self.sim_dt))


@dataclass
class SimLog:
    """Per-step record arrays of one run, slope frame unless noted."""

    t: np.ndarray
    x_com: np.ndarray
    xdot_com: np.ndarray
    x_cop: np.ndarray
    lambda_x: np.ndarray
    lambda_y: np.ndarray
    f_x: np.ndarray
    f_y: np.ndarray
    x_ref: np.ndarray
    xdot_ref: np.ndarray
    world_x: np.ndarray
    world_y: np.ndarray
    qp_iterations: np.ndarray
    qp_solve_time: np.ndarray  # seconds
    qp_status: list[str] = field(default_factory=list)
    termination: str = "completed"

    def __len__(self) -> int:
        return self.t.size


def rk4_step(params: VlipParams, state: VlipState, x_cop: float,
             grf: GroundReaction, dt: float) -> VlipState:
    """Classical fourth-order Runge-Kutta step with the force held constant."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")

    def deriv(x, v):
        return v, cop_acceleration(params, VlipState(x, v), x_cop, grf)

    x, v = state.x_com, state.xdot_com
    k1x, k1v = deriv(x, v)
    k2x, k2v = deriv(x + 0.5 * dt * k1x, v + 0.5 * dt * k1v)
    k3x, k3v = deriv(x + 0.5 * dt * k2x, v + 0.5 * dt * k2v)
    k4x, k4v = deriv(x + dt * k3x, v + dt * k3v)
    x_new = x + dt * (k1x + 2.0 * k2x + 2.0 * k3x + k4x) / 6.0
    v_new = v + dt * (k1v + 2.0 * k2v + 2.0 * k3v + k4v) / 6.0
    if not (math.isfinite(x_new) and math.isfinite(v_new)):
        raise FloatingPointError(
            f"state diverged during integration: x={x_new}, xdot={v_new}")
    return VlipState(x_new, v_new)


def generate_reference(spec: ReferenceSpec, slope_alpha: float, duration: float,
                       dt: float) -> ReferenceTrajectory:
    """Slope-frame velocity ramp with one step change.

    v(t) is ``cruise_speed`` before ``step_time`` and ``step_velocity``
    from then on; x(t) is its exact integral.  World-frame positions, when
    needed, come from rotating the slope frame by ``slope_alpha`` (the
    samples themselves are slope-frame).
    """
    if dt <= 0.0 or duration < 0.0:
        raise ValueError("need dt > 0 and duration >= 0")
    n = max(int(round(duration / dt)), 1)
    times = np.arange(n + 1) * dt
    v1, v2, t_step = spec.cruise_speed, spec.step_velocity, spec.step_time
    x = v1 * np.minimum(times, t_step) + v2 * np.maximum(times - t_step, 0.0)
    xdot = np.where(times < t_step, v1, v2)
    return ReferenceTrajectory(times, x, xdot)


def update_cop(state: VlipState, x_cop: float, cop_stride: float) -> float:
    """Advance the foothold one stride once the body passes it by half a stride."""
    if cop_stride <= 0.0:
        raise ValueError("cop_stride must be positive")
    if state.x_com - x_cop > 0.5 * cop_stride:
        return x_cop + cop_stride
    return x_cop


def run(config: SimConfig) -> SimLog:
    """Execute the closed loop and return the full per-step log.

    The controller relinearizes every control period at the current state,
    current foothold and previous normal-force solution (full-Taylor mode)
    or keeps the single model built at the initial point (simplified
    mode).  An infeasible QP terminates the run cleanly with the partial
    log and termination set to ``"infeasible"``.
    """
    params = config.vlip
    alpha = config.slope_alpha
    state = config.initial_state
    x_cop = config.initial_x_cop if config.initial_x_cop is not None else state.x_com
    lambda_y_lin = (config.initial_lambda_y if config.initial_lambda_y is not None
                    else params.mass * params.gravity * math.cos(alpha))

    n_steps = int(round(config.duration / config.sim_dt))
    horizon_span = config.mpc.horizon_nh * config.mpc.dt
    reference = generate_reference(
        config.reference_spec, alpha,
        config.duration + horizon_span + config.mpc_period, config.sim_dt)

    model = linearize(params, LinearizationPoint(state.x_com, x_cop, lambda_y_lin),
                      config.linearization_mode)

    rec_t, rec_x, rec_v, rec_cop = [], [], [], []
    rec_lx, rec_ly, rec_fx, rec_fy = [], [], [], []
    rec_xr, rec_vr, rec_wx, rec_wy = [], [], [], []
    rec_it, rec_st = [], []
    statuses: list[str] = []
    termination = "completed"

    grf = GroundReaction(0.0, 0.0)
    qp_iters, qp_time, qp_status = 0, 0.0, SolveStatus.OPTIMAL.value
    per_mpc = config.steps_per_mpc

    for k in range(n_steps):
        t = k * config.sim_dt
        if k % per_mpc == 0:
            if config.linearization_mode is LinearizationMode.FULL_TAYLOR:
                model = linearize(
                    params,
                    LinearizationPoint(state.x_com, x_cop, lambda_y_lin),
                    LinearizationMode.FULL_TAYLOR)
            grf_cmd, diag = mpc_step(config.mpc, model, state, reference, t)
            if diag.status is SolveStatus.INFEASIBLE:
                termination = "infeasible"
                break
            grf = grf_cmd
            lambda_y_lin = grf.lambda_y
            qp_iters = diag.iterations
            qp_time = diag.solve_time
            qp_status = diag.status.value

        accel = cop_acceleration(params, state, x_cop, grf)
        thruster = recover_thruster_forces(params, accel, grf)
        x_ref, v_ref = reference.at(t)
        wx, wy = slope_to_world(state.x_com, params.y0, alpha)

        rec_t.append(t)
        rec_x.append(state.x_com)
        rec_v.append(state.xdot_com)
        rec_cop.append(x_cop)
        rec_lx.append(grf.lambda_x)
        rec_ly.append(grf.lambda_y)
        rec_fx.append(thruster.f_x)
        rec_fy.append(thruster.f_y)
        rec_xr.append(x_ref)
        rec_vr.append(v_ref)
        rec_wx.append(wx)
        rec_wy.append(wy)
        rec_it.append(qp_iters)
        rec_st.append(qp_time)
        statuses.append(qp_status)

        state = rk4_step(params, state, x_cop, grf, config.sim_dt)
        x_cop = update_cop(state, x_cop, config.cop_stride)

    return SimLog(
        t=np.asarray(rec_t), x_com=np.asarray(rec_x), xdot_com=np.asarray(rec_v),
        x_cop=np.asarray(rec_cop), lambda_x=np.asarray(rec_lx),
        lambda_y=np.asarray(rec_ly), f_x=np.asarray(rec_fx), f_y=np.asarray(rec_fy),
        x_ref=np.asarray(rec_xr), xdot_ref=np.asarray(rec_vr),
        world_x=np.asarray(rec_wx), world_y=np.asarray(rec_wy),
        qp_iterations=np.asarray(rec_it, dtype=int),
        qp_solve_time=np.asarray(rec_st), qp_status=statuses,
        termination=termination,
    )


def default_sim_config(slope_alpha: float = _DEFAULT_ALPHA, mass: float = 8.0,
                       y0: float = 0.45, gravity: float = 9.81,
                       **overrides) -> SimConfig:
    """Build a SimConfig with the pendulum parameters kept consistent."""
    params = VlipParams(mass=mass, y0=y0, gravity=gravity, slope_alpha=slope_alpha)
    return SimConfig(slope_alpha=slope_alpha, vlip=params, **overrides)
