"""Thruster-assisted slope climbing on a planar reduced-order robot model.

The package couples a constant-height inverted pendulum on an incline
(driven by center-of-pressure ground reaction forces, with thruster
forces recovered from the planar force balance) to a condensed
receding-horizon force controller solved by a dense primal-dual
interior-point QP method, plus the leg/thruster kinematics needed to
realize the commanded center of pressure on two stance feet.
"""

from .vlip import (
    GroundReaction,
    LinearizationMode,
    LinearizationPoint,
    LtiModel,
    ThrusterForce,
    VlipParams,
    VlipState,
    cop_acceleration,
    linearize,
    recover_thruster_forces,
    slope_to_world,
    zmp_residual,
)
from .qp import (
    QpProblem,
    QpSolution,
    SolveStatus,
    SolverConfig,
    active_set_oracle,
    kkt_residuals,
    solve,
)
from .mpc import (
    FrictionMode,
    MpcConfig,
    PredictionMatrices,
    ReferenceTrajectory,
    build_constraints,
    build_cost,
    condense,
    discretize,
    mpc_step,
)
from .simulate import (
    CopUpdateRule,
    ReferenceSpec,
    SimConfig,
    SimLog,
    default_sim_config,
    generate_reference,
    rk4_step,
    run,
    update_cop,
)
from .hrom import (
    ContactPair,
    HromBodyState,
    LegId,
    LegJoints,
    distribute_contact_forces,
    euler_rate_matrix,
    foot_position,
    rotation_matrix,
    thruster_position,
)

__version__ = "0.1.0"
