"""Rigid-body and leg kinematics for the quadruped reduced-order model.

One rigid torso with four massless three-joint legs (hip frontal angle,
hip sagittal angle, prismatic length) and rigidly mounted thrusters.  All
rotations route through a single convention: intrinsic roll-pitch-yaw
about body x, y, z, composed as R = Rx(roll) @ Ry(pitch) @ Rz(yaw), which
maps body-frame vectors into the inertial frame.

The contact-force distribution places the planar model's single ground
reaction at a commanded center of pressure by splitting it between the
front and hind stance feet with the lever rule; the tangential component
is split in the same proportion as the normal one, which preserves each
foot's tangential-to-normal ratio and hence friction-cone feasibility.

Note on the leg chain: the first leg rotation is taken about the body y
axis and the second about x, applied to the straight-down leg vector
[0, 0, -l]; the joint names (frontal, sagittal) are kept with that axis
order as given, even though the frontal label sits on the y rotation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .vlip import GroundReaction

__all__ = [
    "LegId",
    "HromBodyState",
    "LegJoints",
    "ContactPair",
    "rot_x",
    "rot_y",
    "rot_z",
    "rotation_matrix",
    "foot_position",
    "thruster_position",
    "euler_rate_matrix",
    "distribute_contact_forces",
]

_GIMBAL_MARGIN = 1e-6  # rad, minimum distance of pitch from +-pi/2

# Default hip mount points in the body frame (x forward, y left, z up),
# sized to a torso roughly 0.3 m long and 0.2 m wide.
_DEFAULT_HIP_OFFSETS = {
    "FR": np.array([0.15, -0.10, 0.0]),
    "HR": np.array([-0.15, -0.10, 0.0]),
    "FL": np.array([0.15, 0.10, 0.0]),
    "HL": np.array([-0.15, 0.10, 0.0]),
}


class LegId(Enum):
    FR = "FR"
    HR = "HR"
    FL = "FL"
    HL = "HL"


def rot_x(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rotation_matrix(phi_body: np.ndarray) -> np.ndarray:
    """Body-to-inertial rotation for intrinsic roll-pitch-yaw angles."""
    roll, pitch, yaw = np.asarray(phi_body, dtype=float)
    return rot_x(roll) @ rot_y(pitch) @ rot_z(yaw)


@dataclass(frozen=True)
class HromBodyState:
    """Torso pose: inertial position and roll-pitch-yaw Euler angles."""

    p_body: np.ndarray
    phi_body: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p_body, dtype=float)
        phi = np.asarray(self.phi_body, dtype=float)
        object.__setattr__(self, "p_body", p)
        object.__setattr__(self, "phi_body", phi)
        if p.shape != (3,) or phi.shape != (3,):
            raise ValueError("p_body and phi_body must be 3-vectors")
        if not (np.isfinite(p).all() and np.isfinite(phi).all()):
            raise ValueError("body state must be finite")
        if (phi <= -math.pi).any() or (phi > math.pi).any():
            raise ValueError("Euler angles must lie in (-pi, pi]")
        if abs(phi[1]) >= math.pi / 2:
            raise ValueError("pitch must stay inside (-pi/2, pi/2)")

    def rotation(self) -> np.ndarray:
        return rotation_matrix(self.phi_body)


@dataclass(frozen=True)
class LegJoints:
    """Joint state of one leg: two hip angles and the prismatic length."""

    phi: float            # rad, first hip rotation (about body y)
    gamma: float          # rad, second hip rotation (about x)
    length: float         # m
    hip_offset: np.ndarray | None = None  # body frame; None -> per-leg default
    l_min: float = 0.05
    l_max: float = 0.80

    def __post_init__(self):
        if self.l_min <= 0.0 or self.l_max <= 0.0 or self.l_min > self.l_max:
            raise ValueError("need 0 < l_min <= l_max")
        if not (self.l_min <= self.length <= self.l_max):
            raise ValueError(
                f"leg length {self.length} outside [{self.l_min}, {self.l_max}]")
        if not (math.isfinite(self.phi) and math.isfinite(self.gamma)):
            raise ValueError("joint angles must be finite")
        if self.hip_offset is not None:
            off = np.asarray(self.hip_offset, dtype=float)
            if off.shape != (3,) or not np.isfinite(off).all():
                raise ValueError("hip_offset must be a finite 3-vector")
            object.__setattr__(self, "hip_offset", off)


@dataclass(frozen=True)
class ContactPair:
    """Two stance feet on the slope line with a total force and commanded COP."""

    foot_front: float          # m, slope-frame x of the front foot
    foot_hind: float           # m
    lambda_total: GroundReaction
    x_cop: float               # m, must lie inside the support segment

    def __post_init__(self):
        for v in (self.foot_front, self.foot_hind, self.x_cop):
            if not math.isfinite(v):
                raise ValueError("contact geometry must be finite")
        if not self.foot_hind < self.foot_front:
            raise ValueError("foot_hind must be strictly behind foot_front")
        if not (self.foot_hind <= self.x_cop <= self.foot_front):
            raise ValueError(
                f"x_cop {self.x_cop} outside support segment "
                f"[{self.foot_hind}, {self.foot_front}]; realizing it would "
                "need tensile contact")


def foot_position(body: HromBodyState, leg: LegJoints, leg_id: LegId) -> np.ndarray:
    """Inertial foot position: hip mount plus the rotated leg vector.

    p_foot = p_body + R (hip_offset + Ry(phi) Rx(gamma) [0, 0, -length]).
    """
    offset = leg.hip_offset
    if offset is None:
        offset = _DEFAULT_HIP_OFFSETS[LegId(leg_id).value]
    leg_vec = rot_y(leg.phi) @ rot_x(leg.gamma) @ np.array([0.0, 0.0, -leg.length])
    r = body.rotation()
    return body.p_body + r @ offset + r @ leg_vec


def thruster_position(body: HromBodyState, mount_offset: np.ndarray) -> np.ndarray:
    """Inertial position of a torso-mounted thruster."""
    offset = np.asarray(mount_offset, dtype=float)
    if offset.shape != (3,) or not np.isfinite(offset).all():
        raise ValueError("mount_offset must be a finite 3-vector")
    return body.p_body + body.rotation() @ offset


def euler_rate_matrix(phi_body: np.ndarray) -> np.ndarray:
    """Matrix E mapping roll-pitch-yaw rates to body-frame angular velocity.

    For R = Rx(roll) Ry(pitch) Rz(yaw) the body angular velocity is
    omega = E(phi) @ phidot with columns [Rz' Ry' ex, Rz' ey, ez]:

        E = [[cos(pitch) cos(yaw),  sin(yaw), 0],
             [-cos(pitch) sin(yaw), cos(yaw), 0],
             [sin(pitch),           0,        1]]

    det(E) = cos(pitch), so the map degenerates at pitch = +-pi/2.
    """
    phi = np.asarray(phi_body, dtype=float)
    if phi.shape != (3,) or not np.isfinite(phi).all():
        raise ValueError("phi_body must be a finite 3-vector")
    pitch, yaw = phi[1], phi[2]
    if abs(abs(pitch) - math.pi / 2) < _GIMBAL_MARGIN:
        raise ValueError(
            f"pitch {pitch} within {_GIMBAL_MARGIN} rad of gimbal lock")
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    return np.array([
        [cp * cy, sy, 0.0],
        [-cp * sy, cy, 0.0],
        [sp, 0.0, 1.0],
    ])


def distribute_contact_forces(pair: ContactPair) -> tuple[GroundReaction, GroundReaction]:
    """Split the total contact force between the stance feet by the lever rule.

    The front foot takes the fraction (x_cop - foot_hind) / segment length
    of the normal force, so the normal-force moments about the COP cancel;
    the tangential force is split in the same proportion.  Returns
    (front, hind).
    """
    span = pair.foot_front - pair.foot_hind
    w_front = (pair.x_cop - pair.foot_hind) / span
    w_hind = 1.0 - w_front
    total = pair.lambda_total
    front = GroundReaction(w_front * total.lambda_x, w_front * total.lambda_y)
    hind = GroundReaction(w_hind * total.lambda_x, w_hind * total.lambda_y)
    return front, hind
