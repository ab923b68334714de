"""Randomized verification suites for the solver, prediction and dynamics code.

Each suite runs a batch of seeded random checks against an independent
route to the same quantity (enumeration oracle, brute-force rollout,
matrix-exponential integration, algebraic identities) and reports one
pass/fail line per check.  Failing cases are captured as plain dicts so
a run can be replayed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import hrom, mpc, qp, simulate, vlip

__all__ = [
    "CheckResult",
    "SuiteReport",
    "SUITES",
    "random_qp",
    "qp_oracle_suite",
    "rollout_suite",
    "convergence_suite",
    "invariants_suite",
]


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


@dataclass
class SuiteReport:
    suite: str
    checks: list[CheckResult] = field(default_factory=list)
    failing_case: dict | None = None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name: str, passed: bool, detail: str, case: dict | None = None):
        self.checks.append(CheckResult(name, passed, detail))
        if not passed and self.failing_case is None:
            self.failing_case = case or {"check": name}


def random_qp(rng: np.random.Generator, max_n: int = 8, max_m: int = 12,
              max_condition: float = 1e4) -> qp.QpProblem:
    """Strictly convex random instance with a guaranteed interior point."""
    n = int(rng.integers(1, max_n + 1))
    m = int(rng.integers(1, max_m + 1))
    basis, _ = np.linalg.qr(rng.standard_normal((n, n)))
    condition = 10.0 ** rng.uniform(0.0, math.log10(max_condition))
    eigs = np.logspace(0.0, -math.log10(condition), n) if n > 1 else np.ones(1)
    p = (basis * eigs) @ basis.T
    p = 0.5 * (p + p.T)
    q = rng.standard_normal(n)
    g = rng.standard_normal((m, n))
    interior = rng.standard_normal(n)
    h = g @ interior + rng.uniform(0.1, 2.0, m)
    return qp.QpProblem(p, q, g, h)


def _case_from_problem(problem: qp.QpProblem, **extra) -> dict:
    case = {
        "p_matrix": problem.p_matrix.tolist(),
        "q_vector": problem.q_vector.tolist(),
        "g_matrix": problem.g_matrix.tolist(),
        "h_vector": problem.h_vector.tolist(),
    }
    case.update(extra)
    return case


def qp_oracle_suite(n_instances: int = 1000, seed: int = 0) -> SuiteReport:
    """Interior-point solutions against the active-set enumeration oracle."""
    report = SuiteReport("qp_oracle")
    rng = np.random.default_rng(seed)
    worst_du = 0.0
    worst_gap = 0.0
    worst_kkt = 0.0
    for i in range(n_instances):
        problem = random_qp(rng)
        sol = qp.solve(problem)
        ora = qp.active_set_oracle(problem)
        case = _case_from_problem(problem, instance=i, seed=seed)
        if sol.status is not qp.SolveStatus.OPTIMAL:
            report.add("oracle_match", False,
                       f"instance {i}: solver status {sol.status.value}", case)
            return report
        if ora.status is not qp.SolveStatus.OPTIMAL:
            report.add("oracle_match", False,
                       f"instance {i}: oracle status {ora.status.value}", case)
            return report
        du = float(np.abs(sol.u_star - ora.u_star).max())
        obj_gap = abs(problem.objective(sol.u_star) - problem.objective(ora.u_star))
        stat, primal, comp = qp.kkt_residuals(problem, sol.u_star, sol.multipliers)
        q_scale = 1.0 + np.abs(problem.q_vector).max()
        h_scale = 1.0 + np.abs(problem.h_vector).max()
        o_scale = 1.0 + abs(problem.objective(sol.u_star))
        kkt_rel = max(stat / q_scale, primal / h_scale, comp / o_scale)
        worst_du = max(worst_du, du)
        worst_gap = max(worst_gap, obj_gap)
        worst_kkt = max(worst_kkt, kkt_rel)
        if du > 1e-6 or obj_gap > 1e-8 or kkt_rel > 1e-8:
            case.update(u_solver=sol.u_star.tolist(), u_oracle=ora.u_star.tolist(),
                        du=du, obj_gap=obj_gap, kkt_rel=kkt_rel)
            report.add("oracle_match", False,
                       f"instance {i}: |du|={du:.3e} gap={obj_gap:.3e} "
                       f"kkt={kkt_rel:.3e}", case)
            return report
    report.add("oracle_match", True,
               f"{n_instances} instances: max |du|={worst_du:.2e}, "
               f"max obj gap={worst_gap:.2e}, max scaled KKT={worst_kkt:.2e}")
    return report


def _rollout_error(f, g, nh, offset, u_seq, x0) -> float:
    pred = mpc.condense(f, g, nh, offset)
    z = pred.h_matrix @ u_seq + pred.w_matrix @ x0 + pred.affine_rollout
    x = x0.copy()
    worst = 0.0
    step_offset = np.zeros(2) if offset is None else offset
    for k in range(nh):
        x = f @ x + g @ u_seq[2 * k:2 * k + 2] + step_offset
        worst = max(worst, float(np.abs(z[2 * k:2 * k + 2] - x).max()))
    return worst


def rollout_suite(n_instances: int = 200, seed: int = 0) -> SuiteReport:
    """Condensed prediction against step-by-step iteration, plus block structure."""
    report = SuiteReport("rollout")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(n_instances):
        nh = int(rng.integers(1, 9))
        f = rng.uniform(-1.0, 1.0, (2, 2))
        g = rng.uniform(-1.0, 1.0, (2, 2))
        offset = rng.uniform(-1.0, 1.0, 2) if rng.random() < 0.5 else None
        u_seq = rng.uniform(-1.0, 1.0, 2 * nh)
        x0 = rng.uniform(-1.0, 1.0, 2)
        err = _rollout_error(f, g, nh, offset, u_seq, x0)
        worst = max(worst, err)
        if err > 1e-12:
            report.add("rollout_identity", False,
                       f"instance {i}: error {err:.3e}",
                       {"instance": i, "seed": seed, "f": f.tolist(),
                        "g": g.tolist(), "nh": nh})
            return report
    report.add("rollout_identity", True,
               f"{n_instances} random systems: max error {worst:.2e}")

    f = rng.uniform(-1.0, 1.0, (2, 2))
    g = rng.uniform(-1.0, 1.0, (2, 2))
    pred = mpc.condense(f, g, 6)
    block_err = 0.0
    for i in range(6):
        w_expect = np.linalg.matrix_power(f, i + 1)
        block_err = max(block_err, float(np.abs(
            pred.w_matrix[2 * i:2 * i + 2] - w_expect).max()))
        for j in range(6):
            h_block = pred.h_matrix[2 * i:2 * i + 2, 2 * j:2 * j + 2]
            expect = (np.linalg.matrix_power(f, i - j) @ g if i >= j
                      else np.zeros((2, 2)))
            block_err = max(block_err, float(np.abs(h_block - expect).max()))
    report.add("block_structure", block_err <= 1e-12,
               f"max block deviation {block_err:.2e}",
               {"check": "block_structure", "seed": seed})
    return report


def _rk4_global_errors(dts, duration):
    """Global trajectory error of the integrator against the matrix exponential."""
    params = vlip.VlipParams(mass=8.0, y0=0.45, gravity=9.81, slope_alpha=0.0)
    grf = vlip.GroundReaction(lambda_x=-5.0, lambda_y=60.0)
    x_cop = 0.0
    x0 = np.array([0.02, 0.3])
    stiffness = grf.lambda_y / (params.mass * params.y0)
    const = -x_cop * stiffness - grf.lambda_x / params.mass
    a_aug = np.array([[0.0, 1.0, 0.0],
                      [stiffness, 0.0, const],
                      [0.0, 0.0, 0.0]])
    errors = []
    for dt in dts:
        n = int(round(duration / dt))
        exact = scipy.linalg.expm(a_aug * (n * dt)) @ np.array([x0[0], x0[1], 1.0])
        state = vlip.VlipState(x0[0], x0[1])
        for _ in range(n):
            state = simulate.rk4_step(params, state, x_cop, grf, dt)
        errors.append(float(np.hypot(state.x_com - exact[0],
                                     state.xdot_com - exact[1])))
    return np.asarray(errors)


def convergence_suite(seed: int = 0) -> SuiteReport:
    """Measured Runge-Kutta convergence order from a log-log error fit."""
    report = SuiteReport("convergence")
    dts = np.array([0.02, 0.01, 0.005, 0.0025, 0.00125])
    errors = _rk4_global_errors(dts, duration=0.4)
    slope = float(np.polyfit(np.log(dts), np.log(errors), 1)[0])
    report.add("rk4_order", 3.7 <= slope <= 4.3,
               f"measured order {slope:.3f} over dt in [{dts[-1]}, {dts[0]}]",
               {"check": "rk4_order", "dts": dts.tolist(),
                "errors": errors.tolist(), "slope": slope})
    return report


def invariants_suite(seed: int = 0) -> SuiteReport:
    """Algebraic and structural properties across all modules."""
    report = SuiteReport("invariants")
    rng = np.random.default_rng(seed)

    # Force balance round trip: recovered thrusters close the x equation.
    worst = 0.0
    for _ in range(200):
        params = vlip.VlipParams(mass=rng.uniform(1, 20), y0=rng.uniform(0.1, 1.0),
                                 gravity=9.81, slope_alpha=rng.uniform(-1.2, 1.2))
        state = vlip.VlipState(rng.normal(), rng.normal())
        grf = vlip.GroundReaction(rng.normal(scale=50), rng.uniform(0, 100))
        x_cop = rng.normal()
        xdd = vlip.cop_acceleration(params, state, x_cop, grf)
        thr = vlip.recover_thruster_forces(params, xdd, grf)
        lhs = params.mass * xdd
        rhs = (-grf.lambda_x - params.mass * params.gravity
               * math.sin(params.slope_alpha) + thr.f_x)
        scale = max(abs(lhs), abs(rhs), 1.0)
        worst = max(worst, abs(lhs - rhs) / scale)
    report.add("thruster_round_trip", worst <= 1e-12,
               f"max relative closure error {worst:.2e}")

    # Moment balance residual vanishes for consistent accelerations.
    worst = 0.0
    for _ in range(200):
        params = vlip.VlipParams(mass=rng.uniform(1, 20), y0=rng.uniform(0.1, 1.0))
        state = vlip.VlipState(rng.normal(), rng.normal())
        grf = vlip.GroundReaction(rng.normal(scale=50), rng.uniform(0, 100))
        x_cop = rng.normal()
        xdd = vlip.cop_acceleration(params, state, x_cop, grf)
        worst = max(worst, abs(vlip.zmp_residual(params, state, x_cop, grf, xdd, 0.0)))
    report.add("zmp_consistency", worst <= 1e-12,
               f"max residual {worst:.2e}")

    # The acceleration map never sees the slope angle.
    state = vlip.VlipState(0.3, -0.1)
    grf = vlip.GroundReaction(-12.0, 55.0)
    accels = set()
    for deg in (0.0, 20.0, 40.0):
        params = vlip.VlipParams(8.0, 0.45, 9.81, math.radians(deg))
        accels.add(vlip.cop_acceleration(params, state, 0.27, grf))
    report.add("slope_independence", len(accels) == 1,
               f"{len(accels)} distinct values across slope angles")

    # Affine superposition in the force arguments.
    params = vlip.VlipParams(8.0, 0.45)
    worst = 0.0
    for _ in range(100):
        u1 = vlip.GroundReaction(rng.normal(scale=30), rng.normal(scale=30))
        u2 = vlip.GroundReaction(rng.normal(scale=30), rng.normal(scale=30))
        zero = vlip.GroundReaction(0.0, 0.0)
        both = vlip.GroundReaction(u1.lambda_x + u2.lambda_x,
                                   u1.lambda_y + u2.lambda_y)
        f = lambda u: vlip.cop_acceleration(params, state, 0.27, u)
        worst = max(worst, abs((f(both) - f(zero))
                               - ((f(u1) - f(zero)) + (f(u2) - f(zero)))))
    report.add("acceleration_superposition", worst <= 1e-12,
               f"max superposition defect {worst:.2e}")

    # Full-Taylor model error is exactly the dropped bilinear term.
    point = vlip.LinearizationPoint(0.1, 0.15, 60.0)
    model = vlip.linearize(params, point, vlip.LinearizationMode.FULL_TAYLOR)
    offset = model.absolute_offset()
    worst = 0.0
    for _ in range(100):
        dx = rng.uniform(-0.1, 0.1)
        dly = rng.uniform(-20.0, 20.0)
        st = vlip.VlipState(point.x_com0 + dx, 0.0)
        u = vlip.GroundReaction(rng.normal(scale=10), point.lambda_y0 + dly)
        truth = vlip.cop_acceleration(params, st, point.x_cop0, u)
        lin = (model.a_matrix[1] @ st.as_array()
               + model.b_matrix[1] @ u.as_array() + offset[1])
        expected_err = dx * dly / (params.mass * params.y0)
        worst = max(worst, abs((truth - lin) - expected_err))
    report.add("linearization_residual", worst <= 1e-12,
               f"second-order remainder mismatch {worst:.2e}")

    # Solver determinism, scale invariance, and monotone gap trace.
    det_ok = True
    scale_worst = 0.0
    gap_ok = True
    for i in range(40):
        problem = random_qp(rng)
        sol_a = qp.solve(problem)
        sol_b = qp.solve(problem)
        if not np.array_equal(sol_a.u_star, sol_b.u_star):
            det_ok = False
        for s in (1e-3, 7.0, 1e3):
            scaled = qp.QpProblem(problem.p_matrix * s, problem.q_vector * s,
                                  problem.g_matrix, problem.h_vector)
            sol_s = qp.solve(scaled)
            scale_worst = max(scale_worst, float(np.abs(
                sol_s.u_star - sol_a.u_star).max()))
        if np.any(np.diff(sol_a.gap_trace) > 0.0):
            gap_ok = False
    report.add("qp_determinism", det_ok, "repeated solves bitwise identical"
               if det_ok else "repeated solves differed")
    report.add("qp_scale_invariance", scale_worst <= 1e-8,
               f"max optimizer shift under cost scaling {scale_worst:.2e}")
    report.add("qp_monotone_gap", gap_ok,
               "complementarity gap non-increasing on all traces"
               if gap_ok else "gap increased within a trace")

    # Cost expansion equals the direct stacked-error evaluation.
    worst = 0.0
    for _ in range(100):
        nh = int(rng.integers(1, 7))
        f = rng.uniform(-1, 1, (2, 2))
        g = rng.uniform(-1, 1, (2, 2))
        pred = mpc.condense(f, g, nh, rng.uniform(-1, 1, 2))
        x0 = vlip.VlipState(rng.normal(), rng.normal())
        z_ref = rng.normal(size=2 * nh)
        qw = (rng.uniform(0, 100), rng.uniform(0, 100))
        r, b, c = mpc.build_cost(pred, x0, z_ref, qw)
        u_seq = rng.normal(size=2 * nh)
        direct = pred.h_matrix @ u_seq + pred.w_matrix @ x0.as_array() \
            + pred.affine_rollout - z_ref
        qbar = np.tile(np.asarray(qw), nh)
        j_direct = float(direct @ (qbar * direct))
        j_expanded = float(u_seq @ r @ u_seq + b @ u_seq + c)
        worst = max(worst, abs(j_direct - j_expanded) / (1.0 + abs(j_direct)))
    report.add("cost_identity", worst <= 1e-10,
               f"max relative cost mismatch {worst:.2e}")

    # Friction rows: admissible and violating force pairs, boundary slack.
    config = mpc.MpcConfig()
    g_ineq, h_ineq = mpc.build_constraints(config)
    ok_pair = np.tile([20.0, 50.0], config.horizon_nh)
    bad_pair = np.tile([30.0, 50.0], config.horizon_nh)
    floor_pair = np.tile([0.0, config.lambda_min_n], config.horizon_nh)
    rows_ok = bool((g_ineq @ ok_pair <= h_ineq + 1e-12).all())
    rows_bad = bool((g_ineq @ bad_pair > h_ineq + 1e-12).any())
    floor_rows = g_ineq @ floor_pair - h_ineq
    boundary_ok = bool(np.isclose(floor_rows.max(), 0.0, atol=1e-12))
    report.add("constraint_rows", rows_ok and rows_bad and boundary_ok,
               f"admissible={rows_ok} violating={rows_bad} boundary={boundary_ok}")

    # Lever-rule reconstruction and per-foot cone inheritance.
    worst_sum = worst_moment = 0.0
    cone_ok = True
    for _ in range(200):
        hind = rng.uniform(-1.0, 1.0)
        front = hind + rng.uniform(0.05, 0.5)
        cop = rng.uniform(hind, front)
        ly = rng.uniform(1.0, 120.0)
        lx = rng.uniform(-0.5, 0.5) * ly
        pair = hrom.ContactPair(front, hind, vlip.GroundReaction(lx, ly), cop)
        f_front, f_hind = hrom.distribute_contact_forces(pair)
        worst_sum = max(worst_sum,
                        abs(f_front.lambda_x + f_hind.lambda_x - lx),
                        abs(f_front.lambda_y + f_hind.lambda_y - ly))
        moment = (f_front.lambda_y * (front - cop)
                  + f_hind.lambda_y * (hind - cop))
        worst_moment = max(worst_moment, abs(moment))
        mu = 0.5
        if abs(lx) <= mu * ly:
            for foot in (f_front, f_hind):
                if abs(foot.lambda_x) > mu * foot.lambda_y + 1e-12:
                    cone_ok = False
    report.add("force_distribution", worst_sum <= 1e-12 and worst_moment <= 1e-12,
               f"max sum error {worst_sum:.2e}, max moment {worst_moment:.2e}")
    report.add("per_foot_cone", cone_ok,
               "proportional split preserved cone feasibility"
               if cone_ok else "per-foot cone violated")

    # Euler-rate matrix against the finite-difference angular velocity.
    def omega_fd(phi, phidot, step):
        r_minus = hrom.rotation_matrix(phi - step * phidot)
        r_plus = hrom.rotation_matrix(phi + step * phidot)
        r = hrom.rotation_matrix(phi)
        skew = r.T @ (r_plus - r_minus) / (2.0 * step)
        return np.array([skew[2, 1], skew[0, 2], skew[1, 0]])

    worst_ratio = 0.0
    for _ in range(50):
        phi = rng.uniform(-0.8, 0.8, 3)
        phidot = rng.uniform(-1.0, 1.0, 3)
        omega = hrom.euler_rate_matrix(phi) @ phidot
        err_h = float(np.abs(omega_fd(phi, phidot, 1e-3) - omega).max())
        err_h2 = float(np.abs(omega_fd(phi, phidot, 5e-4) - omega).max())
        if err_h > 1e-12:
            worst_ratio = max(worst_ratio, err_h2 / err_h)
    report.add("euler_rate_consistency", worst_ratio <= 0.3,
               f"fd error ratio at halved step {worst_ratio:.3f} (quadratic ~0.25)")

    # Foothold updates only ever advance, in whole strides.
    stride = 0.1
    x_cop = 0.0
    x = 0.0
    advances_ok = True
    for _ in range(300):
        x += rng.uniform(0.0, 0.004)
        new_cop = simulate.update_cop(vlip.VlipState(x, 0.0), x_cop, stride)
        if new_cop < x_cop or (new_cop != x_cop
                               and not math.isclose(new_cop - x_cop, stride)):
            advances_ok = False
        x_cop = new_cop
    report.add("cop_monotone", advances_ok,
               "foothold sequence non-decreasing with uniform increments"
               if advances_ok else "foothold update rule violated")

    # Reference velocity: piecewise constant with exactly one discontinuity.
    ref = simulate.generate_reference(simulate.ReferenceSpec(), 0.0, 8.0, 0.001)
    jumps = int((np.abs(np.diff(ref.xdot)) > 1e-12).sum())
    report.add("reference_structure", jumps == 1,
               f"{jumps} velocity discontinuities (expected 1)")

    return report


SUITES = {
    "qp_oracle": qp_oracle_suite,
    "rollout": rollout_suite,
    "convergence": convergence_suite,
    "invariants": invariants_suite,
}
