import os

import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.ms_ import CmonConfig, StageQpData, StageStep, Trajectory
from src.ocp_ import ConfigurationError, Dims, OcpProblem, QpFailure, get_benchmark
from src.qp_ import QpResult, QpSolution, QpSolverConfig, QpStatus
from src.rk_ import Integrator
from src.sqp_ import (
    MeritState,
    NmpcOptions,
    NmpcSolver,
    SolveStatus,
    SqpConfig,
    kkt_residual,
    line_search,
    merit_eval,
    penalty_and_direction,
)


def single_integrator() -> OcpProblem:
    """x' = u over one interval of length 1, cost 1/2 (x0^2 + u0^2) + 1/2 x1^2."""
    return OcpProblem(
        name="single_integrator",
        dims=Dims(nx=1, nu=1, nr=2, nrN=1, N=1, Ts=1.0),
        dynamics=lambda x, u, p: [u[0]],
        stage_residual=lambda x, u, p: [x[0], u[0]],
        terminal_residual=lambda x, p: [x[0]],
        W=np.eye(2),
        WN=np.eye(1),
        x_init=np.array([1.0]),
    )


def scalar_traj(x, u) -> Trajectory:
    return Trajectory(
        x=np.array(x, dtype=float).reshape(-1, 1),
        u=np.array(u, dtype=float).reshape(-1, 1),
        lam=np.zeros((len(x), 1)),
        mu=np.zeros((len(u), 0)),
        muN=np.zeros(0),
    )


def scalar_step(dx, du) -> StageStep:
    return StageStep(
        dx=np.array(dx, dtype=float).reshape(-1, 1),
        du=np.array(du, dtype=float).reshape(-1, 1),
        lam=np.zeros((len(dx), 1)),
        mu=np.zeros((len(du), 0)),
        muN=np.zeros(0),
    )


def scalar_qp(g, H, dx0) -> StageQpData:
    return StageQpData(
        H=np.array([H], dtype=float),
        g=np.array([g], dtype=float),
        A=np.ones((1, 1, 1)),
        B=np.ones((1, 1, 1)),
        C=np.zeros((1, 0, 1)),
        D=np.zeros((1, 0, 1)),
        d=np.zeros((1, 1)),
        lbc=np.zeros((1, 0)),
        ubc=np.zeros((1, 0)),
        HN=np.zeros((1, 1)),
        gN=np.zeros(1),
        CN=np.zeros((0, 1)),
        lbcN=np.zeros(0),
        ubcN=np.zeros(0),
        dx0=np.array([dx0], dtype=float),
        phi=np.zeros((1, 1)),
    )


def near_upright(N=20, angle=0.2):
    problem = get_benchmark("pendulum", N=N)
    x0_hat = np.array([0.0, angle, 0.0, 0.0])
    return problem, x0_hat, Trajectory.initial(problem, x0=x0_hat)


# Merit function
def test_merit_without_penalty_is_the_objective():
    problem = get_benchmark("pendulum", N=10)
    traj = Trajectory.initial(problem)
    traj.u[:] = 3.0
    objective = problem.objective(traj.x, traj.u, problem.stage_params())
    assert merit_eval(problem, None, traj, 0.0) == objective


def test_merit_of_feasible_rollout_ignores_penalty():
    problem = get_benchmark("pendulum", N=10)
    integ = Integrator(problem)
    traj = Trajectory.initial(problem)
    traj.u[:] = np.linspace(-5.0, 5.0, 10)[:, None]
    for k in range(10):
        traj.x[k + 1] = integ.simulate(traj.x[k], traj.u[k], problem.p_default).x_next
    objective = problem.objective(traj.x, traj.u, problem.stage_params())
    assert merit_eval(problem, None, traj, 5.0) == objective


def test_merit_single_stage_by_hand():
    problem = single_integrator()
    traj = scalar_traj([1.0, 3.0], [1.0])
    # l = 1/2 (1 + 1) + 1/2 9, gap |3 - (1 + 1)| = 1
    assert_allclose(merit_eval(problem, None, traj, 0.0), 5.5, rtol=1e-14)
    assert_allclose(merit_eval(problem, None, traj, 2.0), 7.5, rtol=1e-14)
    assert_allclose(merit_eval(problem, None, traj, 2.0, x0_hat=np.array([0.5])), 8.5, rtol=1e-14)


def test_penalty_update():
    qp = scalar_qp(g=[-1.0, 0.0], H=[[2.0, 0.0], [0.0, 0.0]], dx0=1.0)
    step = scalar_step([1.0, 0.0], [0.0])
    # grad = -1, curvature = 2, |e|_1 = 1: threshold (-1 + 1) / 0.5 = 0
    mu, D = penalty_and_direction(qp, step, MeritState(mu_pen=0.0), rho=0.5, sigma=1.0)
    assert mu == 0.0 and D == -1.0
    mu, D = penalty_and_direction(qp, step, MeritState(mu_pen=3.0))
    assert mu == 3.0 and D == -4.0

    step = scalar_step([1.0, 0.0], [0.0])
    qp = scalar_qp(g=[1.0, 0.0], H=[[2.0, 0.0], [0.0, 0.0]], dx0=1.0)
    mu, D = penalty_and_direction(qp, step, MeritState(mu_pen=0.0))
    assert_allclose(mu, (1.0 + 1.0) / 0.5)
    assert D < 0


def test_penalty_on_feasible_iterate_and_zero_step():
    qp = scalar_qp(g=[0.5, -1.0], H=np.eye(2), dx0=0.0)
    mu, D = penalty_and_direction(qp, scalar_step([1.0, 2.0], [1.0]), MeritState(mu_pen=2.0))
    assert mu == 2.0 and D == 0.5 - 1.0

    qp = scalar_qp(g=[0.5, -1.0], H=np.eye(2), dx0=-0.25)
    mu, D = penalty_and_direction(qp, scalar_step([0.0, 0.0], [0.0]), MeritState(mu_pen=2.0))
    assert mu == 2.0 and D == -0.5


# Line search
def test_line_search_backtracks_on_overlong_step():
    problem = single_integrator()
    integ = Integrator(problem)
    traj = scalar_traj([1.0, 1.0], [0.0])
    # m(alpha) = 1 - 4 alpha + 16 alpha^2: Armijo holds for alpha <= 0.249975
    merit = MeritState(mu_pen=0.0, last_merit=1.0, last_dd=-4.0)
    ls = line_search(problem, integ, traj, scalar_step([0.0, -4.0], [-4.0]), merit, np.array([1.0]))
    assert ls.alpha == 0.125 and ls.trials == 4
    assert ls.armijo_ok and not ls.failed
    assert_allclose(ls.merit, 0.75, rtol=1e-12)
    assert_allclose(ls.traj.u, [[-0.5]])


def test_line_search_accepts_newton_step():
    problem = single_integrator()
    traj = scalar_traj([1.0, 1.0], [0.0])
    merit = MeritState(mu_pen=0.0, last_merit=1.0, last_dd=-0.5)
    step = scalar_step([0.0, -0.5], [-0.5])
    ls = line_search(problem, Integrator(problem), traj, step, merit, np.array([1.0]))
    assert ls.alpha == 1.0 and ls.trials == 1
    assert_allclose(ls.merit, 0.75, rtol=1e-12)


def test_line_search_zero_step_keeps_iterate():
    problem = single_integrator()
    traj = scalar_traj([1.0, 2.0], [0.5])
    merit = MeritState(mu_pen=1.0, last_merit=2.0, last_dd=0.0)
    step = scalar_step([0.0, 0.0], [0.0])
    ls = line_search(problem, Integrator(problem), traj, step, merit, np.array([1.0]))
    assert ls.alpha == 1.0 and not ls.failed
    assert np.array_equal(ls.traj.x, traj.x) and np.array_equal(ls.traj.u, traj.u)


def test_line_search_failure_falls_back_to_min_alpha():
    problem = single_integrator()
    traj = scalar_traj([1.0, 1.0], [0.0])
    # An ascent step advertised as descent
    merit = MeritState(mu_pen=0.0, last_merit=1.0, last_dd=-1.0)
    cfg = SqpConfig(min_alpha=1e-2)
    step = scalar_step([0.0, 1.0], [1.0])
    ls = line_search(problem, Integrator(problem), traj, step, merit, np.array([1.0]), config=cfg)
    assert ls.failed and not ls.armijo_ok
    assert ls.alpha == 1e-2


def test_line_search_without_descent_takes_min_alpha(caplog):
    problem = single_integrator()
    traj = scalar_traj([1.0, 1.0], [0.0])
    # The Newton step of the accepted-step test, but with D >= 0 it must not be tried
    merit = MeritState(mu_pen=0.0, last_merit=1.0, last_dd=0.5)
    step = scalar_step([0.0, -0.5], [-0.5])
    with caplog.at_level("WARNING", logger="src.sqp_.linesearch"):
        ls = line_search(problem, Integrator(problem), traj, step, merit, np.array([1.0]))
    assert ls.failed and not ls.armijo_ok
    assert ls.alpha == SqpConfig().min_alpha == 1e-4
    assert ls.trials == 1
    assert_allclose(ls.traj.u, [[-0.5e-4]])
    assert "no descent direction" in caplog.text


# SQP
@pytest.mark.parametrize("path, condensing", [("dense", "full"), ("sparse", "none")])
def test_linear_quadratic_problem_converges_in_one_iteration(path, condensing):
    problem = get_benchmark("lqr")
    options = NmpcOptions(qp_path=path, condensing=condensing)
    with NmpcSolver(problem, options) as solver:
        traj, report = solver.solve(x0_hat=problem.x_init)
        assert report.status is SolveStatus.CONVERGED
        assert report.iters == 1
        assert report.alpha_history == [1.0]
        assert report.kkt.max <= 1e-10
        independent = solver.kkt_residual(traj, problem.x_init)
    assert_allclose(independent, report.kkt, atol=1e-14)
    assert set(report.timings) == {"generation", "condensing", "qp", "line_search"}
    assert (report.timings["condensing"] > 0.0) == (path == "dense")


def test_input_bounded_lqr_converges_in_one_iteration():
    problem = get_benchmark("lqr", u_max=0.5, x_init=(2.0, 0.0))
    options = NmpcOptions(qp=QpSolverConfig(tol=1e-10))
    traj, report = NmpcSolver(problem, options).solve(x0_hat=problem.x_init)
    assert report.converged and report.iters == 1
    assert np.all(np.abs(traj.u) <= 0.5 + 1e-7)
    assert np.min(traj.u) < -0.49


def test_pendulum_converges_near_upright():
    problem, x0_hat, traj0 = near_upright()
    options = NmpcOptions(sqp=SqpConfig(max_iters=50))
    traj, report = NmpcSolver(problem, options).solve(traj0, x0_hat)
    assert report.converged
    assert report.kkt.max <= 1e-6
    assert report.iters <= 50
    assert np.all(np.diff(report.mu_history) >= 0.0)
    assert all(0.0 < a <= 1.0 for a in report.alpha_history)
    assert len(report.rows) == report.iters + 1


def test_swing_up_from_cold_start():
    problem = get_benchmark("pendulum")
    options = NmpcOptions(sqp=SqpConfig(max_iters=50))
    solver = NmpcSolver(problem, options)
    traj, report = solver.solve(x0_hat=problem.x_init)
    assert report.status is SolveStatus.CONVERGED
    assert report.iters <= 50
    assert report.kkt.max <= 1e-6
    assert all(report.armijo_ok)
    assert not report.line_search_failed
    assert np.all(np.diff(report.mu_history) >= 0.0)
    assert len(report.alpha_history) == report.iters == len(report.qp_iters)
    assert_allclose(solver.kkt_residual(traj, problem.x_init), report.kkt, rtol=1e-12, atol=1e-14)
    assert report.total_time == pytest.approx(sum(report.timings.values()))


def test_solve_is_deterministic():
    problem, x0_hat, traj0 = near_upright(N=10)
    options = NmpcOptions(sqp=SqpConfig(max_iters=5))
    a, ra = NmpcSolver(problem, options).solve(traj0, x0_hat)
    b, rb = NmpcSolver(problem, options).solve(traj0, x0_hat)
    assert np.array_equal(a.x, b.x) and np.array_equal(a.lam, b.lam)
    assert ra.alpha_history == rb.alpha_history and ra.kkt == rb.kkt


def test_zero_cmon_threshold_reproduces_full_updates():
    problem, x0_hat, traj0 = near_upright(N=10)
    sqp = SqpConfig(max_iters=6)
    full, rf = NmpcSolver(problem, NmpcOptions(sqp=sqp)).solve(traj0, x0_hat)
    cmon = NmpcOptions(sqp=sqp, cmon=CmonConfig(enabled=True, eta_pri=0.0))
    same, rs = NmpcSolver(problem, cmon).solve(traj0, x0_hat)
    assert np.array_equal(full.x, same.x) and np.array_equal(full.u, same.u)
    assert np.array_equal(full.lam, same.lam)
    assert rf.alpha_history == rs.alpha_history
    assert all(f == 1.0 for f in rs.cmon_update_fraction)


def test_solve_raises_on_qp_failure(monkeypatch):
    problem = get_benchmark("lqr")
    solver = NmpcSolver(problem)

    def broken(qp):
        sol = QpSolution(
            primal=np.zeros(qp.N * qp.nu),
            duals_lower=np.zeros(0),
            duals_upper=np.zeros(0),
            eq_duals=np.zeros(0),
            status=QpStatus.NUMERICAL_FAILURE,
            iters=3,
            kkt_residual=np.inf,
        )
        step = StageStep(
            dx=np.zeros((qp.N + 1, qp.nx)),
            du=np.zeros((qp.N, qp.nu)),
            lam=np.zeros((qp.N + 1, qp.nx)),
            mu=np.zeros((qp.N, 0)),
            muN=np.zeros(0),
        )
        return QpResult(step, sol, 0.0, 0.0)

    monkeypatch.setattr(solver.qp_solver, "solve", broken)
    with pytest.raises(QpFailure) as info:
        solver.solve(x0_hat=problem.x_init)
    assert info.value.report.status is SolveStatus.QP_FAILURE

    traj = Trajectory.initial(problem)
    kept, report = solver.rti_step(traj, problem.x_init + 0.1)
    assert report.status is SolveStatus.RTI_FALLBACK
    assert np.array_equal(kept.x, traj.x) and np.array_equal(kept.u, traj.u)


# Real-time iterations
def test_rti_at_solution_takes_no_step():
    problem = get_benchmark("lqr")
    solver = NmpcSolver(problem)
    traj, _ = solver.solve(x0_hat=problem.x_init)
    nxt, report = solver.rti_step(traj, problem.x_init)
    assert report.status is SolveStatus.RTI and report.alpha_history == [1.0]
    assert np.max(np.abs(nxt.primal() - traj.primal())) <= 1e-8


def test_rti_on_linear_plant_equals_qp_policy():
    problem = get_benchmark("lqr", u_max=0.5)
    x0_hat = np.array([1.5, -0.5])
    qp = QpSolverConfig(tol=1e-10)
    rti = NmpcSolver(problem, NmpcOptions(qp=qp, sqp=SqpConfig(mode="rti")))
    traj, report = rti.feedback(Trajectory.initial(problem), x0_hat)
    assert report.status is SolveStatus.RTI and report.iters == 1
    exact = NmpcOptions(qp=qp, sqp=SqpConfig(kkt_tol=1e-9))
    converged, _ = NmpcSolver(problem, exact).solve(x0_hat=x0_hat)
    assert_allclose(traj.u, converged.u, atol=1e-6)
    assert_allclose(traj.x[0], x0_hat, atol=1e-12)


def test_consecutive_rti_steps_contract():
    problem, x0_hat, traj0 = near_upright()
    solver = NmpcSolver(problem, NmpcOptions(sqp=SqpConfig(mode="rti")))
    traj1, _ = solver.rti_step(traj0, x0_hat)
    traj2, _ = solver.rti_step(traj1, x0_hat)
    first = np.linalg.norm(traj1.primal() - traj0.primal())
    second = np.linalg.norm(traj2.primal() - traj1.primal())
    assert second < first


# KKT residuals
def test_kkt_of_lqr_solution():
    problem = get_benchmark("lqr")
    traj, _ = NmpcSolver(problem).solve(x0_hat=problem.x_init)
    kkt = kkt_residual(problem, None, traj)
    assert kkt.max <= 1e-10


def test_equality_violation_is_the_largest_gap():
    problem = get_benchmark("pendulum", N=6)
    traj = Trajectory.initial(problem, x0=np.zeros(4), u0=np.ones(1))
    phi = Integrator(problem).simulate(np.zeros(4), np.ones(1), problem.p_default).x_next
    kkt = kkt_residual(problem, None, traj)
    assert_allclose(kkt.eq_violation, np.max(np.abs(phi)), rtol=1e-14)
    assert kkt.ineq_violation == 0.0

    traj.u[2] = 25.0
    assert_allclose(kkt_residual(problem, None, traj).ineq_violation, 5.0)


def test_stationarity_grows_linearly_with_input_perturbation():
    problem = get_benchmark("lqr")
    traj, _ = NmpcSolver(problem).solve(x0_hat=problem.x_init)

    def stationarity(delta):
        moved = traj.copy()
        moved.u[3] += delta
        return kkt_residual(problem, None, moved).stationarity

    small, large = stationarity(1e-3), stationarity(2e-3)
    assert 1e-5 < small < 1e-1
    assert_allclose(large / small, 2.0, rtol=1e-6)


# Configuration
def test_sqp_config_validation():
    with pytest.raises(ConfigurationError):
        SqpConfig(armijo_eta=0.6)
    with pytest.raises(ConfigurationError):
        SqpConfig(backtrack_factor=1.0)
    with pytest.raises(ConfigurationError):
        SqpConfig(merit_rho=1.0)
    with pytest.raises(ValueError):
        SqpConfig(mode="newton")
    assert SqpConfig(mode="rti").mode.value == "rti"


def test_options_reject_mismatched_qp_path():
    with pytest.raises(ConfigurationError, match="condensing"):
        NmpcOptions(qp_path="sparse")
    with pytest.raises(ConfigurationError, match="condensing"):
        NmpcOptions(condensing="none")
    with pytest.raises(ConfigurationError):
        NmpcOptions(workers=0)


def test_stage_loop_defaults_to_one_thread_per_cpu():
    assert NmpcOptions().workers == (os.cpu_count() or 1)
    problem, x0_hat, traj0 = near_upright(N=10)
    with NmpcSolver(problem, NmpcOptions(workers=4)) as pooled:
        assert pooled.executor is not None
        a, _ = pooled.solve(traj0, x0_hat)
    with NmpcSolver(problem, NmpcOptions(workers=1)) as inline:
        assert inline.executor is None
        b, _ = inline.solve(traj0, x0_hat)
    assert np.array_equal(a.x, b.x) and np.array_equal(a.u, b.u)
