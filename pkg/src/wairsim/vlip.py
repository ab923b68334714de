"""Planar inverted-pendulum climbing model with collocated thruster forces.

The body is a point mass riding at a constant perpendicular height ``y0``
above an inclined plane.  Coordinates live in the slope-aligned frame:
``x`` along the incline, positive up-slope; ``y`` perpendicular outward.
A ground reaction force ``(lambda_x, lambda_y)`` acts at the center of
pressure, and a thruster force pair ``(f_x, f_y)`` acts at the mass.

Requiring a zero net moment about the center of mass with ``ydd = 0``
reduces the motion to a single equation,

    xdd = -(x_cop - x_com) * lambda_y / (m * y0) - lambda_x / m

which notably does not involve the slope angle.  The slope enters only
when thruster forces are recovered from the full planar force balance

    m * xdd = -lambda_x - m * g * sin(alpha) + f_x
    m * ydd =  lambda_y - m * g * cos(alpha) + f_y    (held at zero).

Sign convention: the tangential reaction enters the x equation with a
minus sign, so propulsive traction up the slope corresponds to negative
``lambda_x``.  The controller treats ``lambda_x`` as a signed decision
variable throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np

__all__ = [
    "VlipParams",
    "VlipState",
    "GroundReaction",
    "ThrusterForce",
    "LinearizationMode",
    "LinearizationPoint",
    "LtiModel",
    "cop_acceleration",
    "recover_thruster_forces",
    "zmp_residual",
    "linearize",
    "slope_to_world",
]


def _require_finite(name, *values):
    for v in values:
        if not math.isfinite(v):
            raise ValueError(f"{name} must be finite, got {v!r}")


@dataclass(frozen=True)
class VlipParams:
    """Physical constants of the pendulum-on-slope model."""

    mass: float            # kg
    y0: float              # m, perpendicular COM height above the slope plane
    gravity: float = 9.81  # m/s^2
    slope_alpha: float = 0.0  # rad, incline angle

    def __post_init__(self):
        _require_finite("VlipParams", self.mass, self.y0, self.gravity, self.slope_alpha)
        if self.mass <= 0.0:
            raise ValueError(f"mass must be positive, got {self.mass}")
        if self.y0 <= 0.0:
            raise ValueError(f"y0 must be positive, got {self.y0}")
        if self.gravity <= 0.0:
            raise ValueError(f"gravity must be positive, got {self.gravity}")
        if abs(self.slope_alpha) >= math.pi / 2:
            raise ValueError(f"|slope_alpha| must be below pi/2, got {self.slope_alpha}")


@dataclass(frozen=True)
class VlipState:
    """COM position and velocity along the slope direction."""

    x_com: float     # m, slope frame
    xdot_com: float  # m/s

    def __post_init__(self):
        _require_finite("VlipState", self.x_com, self.xdot_com)

    def as_array(self) -> np.ndarray:
        return np.array([self.x_com, self.xdot_com])


@dataclass(frozen=True)
class GroundReaction:
    """Planar contact force: tangential lambda_x, normal lambda_y."""

    lambda_x: float  # N, positive opposes up-slope acceleration
    lambda_y: float  # N, normal to the slope

    def __post_init__(self):
        _require_finite("GroundReaction", self.lambda_x, self.lambda_y)

    def as_array(self) -> np.ndarray:
        return np.array([self.lambda_x, self.lambda_y])


@dataclass(frozen=True)
class ThrusterForce:
    """Thruster force pair collocated at the COM, slope frame."""

    f_x: float  # N, along slope
    f_y: float  # N, normal to slope

    def __post_init__(self):
        _require_finite("ThrusterForce", self.f_x, self.f_y)


class LinearizationMode(Enum):
    # SIMPLIFIED keeps the compact LTI form: no affine offset and a
    # negative restoring coefficient on position (stable-oscillator form).
    # FULL_TAYLOR is the complete first-order expansion of the nonlinear
    # acceleration, affine offset included; its position coefficient is
    # positive (the physical inverted-pendulum divergence).
    SIMPLIFIED = "simplified"
    FULL_TAYLOR = "full_taylor"


class LinearizationPoint(NamedTuple):
    x_com0: float     # m
    x_cop0: float     # m
    lambda_y0: float  # N


@dataclass(frozen=True)
class LtiModel:
    """Linear(ized) continuous model  xdot = A x + B u  (+ affine part).

    In SIMPLIFIED mode the matrices are used literally in absolute
    coordinates and ``affine_offset`` is zero.  In FULL_TAYLOR mode the
    model is the expansion about ``linearization_point``:

        xdot = A (x - x_lin) + B (u - u_lin) + affine_offset

    with x_lin = (x_com0, 0) and u_lin = (0, lambda_y0), and
    ``affine_offset[1]`` carrying the acceleration at the expansion point,
    (x_com0 - x_cop0) * lambda_y0 / (m * y0).  Use :meth:`absolute_offset`
    for the equivalent absolute-coordinate form xdot = A x + B u + e.
    """

    a_matrix: np.ndarray
    b_matrix: np.ndarray
    affine_offset: np.ndarray
    linearization_point: LinearizationPoint
    mode: LinearizationMode

    def absolute_offset(self) -> np.ndarray:
        """Constant term e of the absolute-coordinate form xdot = A x + B u + e."""
        if self.mode is LinearizationMode.SIMPLIFIED:
            return np.zeros(2)
        x_lin = np.array([self.linearization_point.x_com0, 0.0])
        u_lin = np.array([0.0, self.linearization_point.lambda_y0])
        return self.affine_offset - self.a_matrix @ x_lin - self.b_matrix @ u_lin


def cop_acceleration(params: VlipParams, state: VlipState, x_cop: float,
                     grf: GroundReaction) -> float:
    """COM acceleration along the slope for a given contact force and COP.

    Evaluates  xdd = -(x_cop - x_com) * lambda_y / (m * y0) - lambda_x / m.
    The result is independent of the slope angle.
    """
    _require_finite("cop_acceleration inputs", x_cop, grf.lambda_x, grf.lambda_y,
                    state.x_com, state.xdot_com)
    lever = x_cop - state.x_com
    return -lever * grf.lambda_y / (params.mass * params.y0) - grf.lambda_x / params.mass


def recover_thruster_forces(params: VlipParams, xddot_com: float,
                            grf: GroundReaction) -> ThrusterForce:
    """Thruster forces that close the planar force balance at ydd = 0.

        f_x = m * xdd + lambda_x + m * g * sin(alpha)
        f_y = m * g * cos(alpha) - lambda_y
    """
    m, g, alpha = params.mass, params.gravity, params.slope_alpha
    f_x = m * xddot_com + grf.lambda_x + m * g * math.sin(alpha)
    f_y = m * g * math.cos(alpha) - grf.lambda_y
    return ThrusterForce(f_x, f_y)


def zmp_residual(params: VlipParams, state: VlipState, x_cop: float,
                 grf: GroundReaction, xddot: float, yddot: float) -> float:
    """Moment-balance residual about the COM; zero iff the ZMP condition holds.

    Returns (xdd + lambda_x/m) * y0 - (ydd - lambda_y/m) * (x_cop - x_com).
    """
    m = params.mass
    lhs = (xddot + grf.lambda_x / m) * params.y0
    rhs = (yddot - grf.lambda_y / m) * (x_cop - state.x_com)
    return lhs - rhs


def linearize(params: VlipParams, point: LinearizationPoint | tuple,
              mode: LinearizationMode) -> LtiModel:
    """Build the continuous LTI model about ``point = (x_com0, x_cop0, lambda_y0)``.

    Both modes share  B = [[0, 0], [-1/m, -(x_cop0 - x_com0)/(m*y0)]].
    SIMPLIFIED uses A[1][0] = -lambda_y0/(m*y0) and no affine term;
    FULL_TAYLOR uses the true partial A[1][0] = +lambda_y0/(m*y0) plus the
    affine offset holding the acceleration at the expansion point.
    """
    point = LinearizationPoint(*point)
    _require_finite("linearization point", *point)
    m, y0 = params.mass, params.y0
    lever0 = point.x_cop0 - point.x_com0
    stiffness = point.lambda_y0 / (m * y0)
    b_matrix = np.array([[0.0, 0.0],
                         [-1.0 / m, -lever0 / (m * y0)]])
    if mode is LinearizationMode.SIMPLIFIED:
        a_matrix = np.array([[0.0, 1.0],
                             [-stiffness, 0.0]])
        offset = np.zeros(2)
    else:
        a_matrix = np.array([[0.0, 1.0],
                             [stiffness, 0.0]])
        offset = np.array([0.0, -lever0 * point.lambda_y0 / (m * y0)])
    return LtiModel(a_matrix, b_matrix, offset, point, mode)


def slope_to_world(x: float, y: float, alpha: float) -> tuple[float, float]:
    """Rotate slope-frame coordinates (x up-slope, y outward) into the world frame."""
    c, s = math.cos(alpha), math.sin(alpha)
    return (c * x - s * y, s * x + c * y)
