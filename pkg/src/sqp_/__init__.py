import logging
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Tuple

import numpy as np

from ..ms_ import CmonFlags, MultipleShooting, StageQpData, Trajectory
from ..ocp_ import OcpProblem
from ..ocp_.errors import QpFailure
from ..qp_ import QpResult, QpSolver, QpStatus
from .linesearch import LineSearchResult, line_search
from .merit import MeritState, NlpEval, evaluate_nlp, infeasibility_l1, merit_eval, penalty_and_direction
from .options import NmpcOptions, SqpConfig, SqpMode
from .report import PHASES, SolveReport, SolveStatus
from .solution_info import KktResidual, kkt_from_qp, kkt_residual

__all__ = [
    "NmpcSolver",
    "NmpcOptions",
    "SqpConfig",
    "SqpMode",
    "SolveReport",
    "SolveStatus",
    "KktResidual",
    "MeritState",
    "NlpEval",
    "LineSearchResult",
    "PHASES",
    "evaluate_nlp",
    "merit_eval",
    "penalty_and_direction",
    "line_search",
    "kkt_residual",
    "kkt_from_qp",
]

logger = logging.getLogger(__name__)


class NmpcSolver:
    """
    Gauss-Newton SQP on the multiple-shooting NLP.

    `solve` iterates with the l1 merit line search until the KKT residuals drop
    below `kkt_tol`; `rti_step` performs one full step per call. The previous
    linearization is kept across calls for CMoN until `reset`.
    """

    def __init__(self, problem: OcpProblem, options: Optional[NmpcOptions] = None) -> None:
        self.problem = problem
        self.options = options or NmpcOptions()
        self.executor = (
            ThreadPoolExecutor(max_workers=self.options.workers) if self.options.workers > 1 else None
        )
        self.shooting = MultipleShooting(
            problem, self.options.integrator, self.options.cmon, self.executor
        )
        self.qp_solver = QpSolver(self.options.qp, self.options.qp_path, self.options.condensing)

    @property
    def config(self) -> SqpConfig:
        return self.options.sqp

    @property
    def integrator(self):
        return self.shooting.integrator

    def reset(self) -> None:
        self.shooting.reset()

    def close(self) -> None:
        if self.executor is not None:
            self.executor.shutdown()
            self.executor = None
            self.shooting.executor = None

    def __enter__(self) -> "NmpcSolver":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # Helpers
    def _prepare(self, traj, x0_hat, params) -> Tuple[Trajectory, np.ndarray, np.ndarray]:
        traj = (Trajectory.initial(self.problem) if traj is None else traj).copy()
        traj.validate(self.problem.dims)
        x0_hat = traj.x[0].copy() if x0_hat is None else np.asarray(x0_hat, dtype=float)
        return traj, x0_hat, self.problem.stage_params(params)

    def _generate(
        self, traj, x0_hat, params, report: SolveReport
    ) -> Tuple[StageQpData, CmonFlags, KktResidual]:
        t0 = time.perf_counter()
        qp, flags = self.shooting.generate(traj, x0_hat, params)
        kkt = kkt_from_qp(qp, traj)
        report.add_time("generation", time.perf_counter() - t0)
        report.cmon_update_fraction.append(flags.update_fraction)
        return qp, flags, kkt

    def _exact_kkt(self, traj, x0_hat, params, report: SolveReport) -> KktResidual:
        t0 = time.perf_counter()
        kkt = kkt_from_qp(self.shooting.exact(traj, x0_hat, params), traj)
        report.add_time("generation", time.perf_counter() - t0)
        return kkt

    def _solve_qp(self, qp: StageQpData, report: SolveReport) -> QpResult:
        res = self.qp_solver.solve(qp)
        report.add_time("condensing", res.t_condensing)
        report.add_time("qp", res.t_qp)
        report.qp_iters.append(res.solution.iters)
        report.iters += 1
        return res

    @staticmethod
    def _row(i: int, kkt: KktResidual, flags: CmonFlags, **extra) -> dict:
        row = {
            "iter": i,
            "stationarity": kkt.stationarity,
            "eq_violation": kkt.eq_violation,
            "ineq_violation": kkt.ineq_violation,
            "update_fraction": flags.update_fraction,
        }
        row.update(extra)
        return row

    # Solvers
    def solve(
        self,
        traj0: Optional[Trajectory] = None,
        x0_hat: Optional[np.ndarray] = None,
        params: Optional[np.ndarray] = None,
    ) -> Tuple[Trajectory, SolveReport]:
        """
        SQP to convergence from `traj0` with the initial state fixed to `x0_hat`.

        Raises:
            QpFailure: the QP solver reported a numerical failure or infeasibility
        """
        cfg = self.config
        traj, x0_hat, params = self._prepare(traj0, x0_hat, params)
        report = SolveReport()
        merit = MeritState()

        for i in range(cfg.max_iters + 1):
            qp, flags, kkt = self._generate(traj, x0_hat, params, report)
            if not flags.update_mask.all() and kkt.max <= cfg.kkt_tol:
                kkt = self._exact_kkt(traj, x0_hat, params, report)
            report.kkt = kkt
            if kkt.max <= cfg.kkt_tol:
                report.status = SolveStatus.CONVERGED
                report.rows.append(self._row(i, kkt, flags))
                break
            if i == cfg.max_iters:
                if not flags.update_mask.all():
                    report.kkt = self._exact_kkt(traj, x0_hat, params, report)
                report.status = SolveStatus.MAX_ITERS
                report.rows.append(self._row(i, kkt, flags))
                break

            res = self._solve_qp(qp, report)
            status = res.solution.status
            if status in (QpStatus.NUMERICAL_FAILURE, QpStatus.INFEASIBLE):
                report.status = SolveStatus.QP_FAILURE
                report.rows.append(self._row(i, kkt, flags, qp_status=status.value))
                raise QpFailure(f"QP subproblem {i} failed: {status.value}", report)

            t0 = time.perf_counter()
            merit.mu_pen, merit.last_dd = penalty_and_direction(
                qp, res.step, merit, cfg.merit_rho, cfg.merit_sigma
            )
            objective = self.problem.objective(traj.x, traj.u, params)
            merit.last_merit = objective + merit.mu_pen * infeasibility_l1(qp)
            ls = line_search(
                self.problem, self.integrator, traj, res.step, merit, x0_hat, params, cfg
            )
            report.add_time("line_search", time.perf_counter() - t0)

            traj = ls.traj
            report.alpha_history.append(ls.alpha)
            report.mu_history.append(merit.mu_pen)
            report.merit_history.append(ls.merit)
            report.armijo_ok.append(ls.armijo_ok)
            report.line_search_failed |= ls.failed
            report.rows.append(
                self._row(
                    i,
                    kkt,
                    flags,
                    qp_status=status.value,
                    qp_iters=res.solution.iters,
                    alpha=ls.alpha,
                    mu_pen=merit.mu_pen,
                    merit=ls.merit,
                )
            )
            logger.debug(
                "SQP %d: kkt %.3e alpha %.3g mu %.3g", i, kkt.max, ls.alpha, merit.mu_pen
            )
        return traj, report

    def rti_step(
        self,
        traj: Trajectory,
        x0_hat: Optional[np.ndarray] = None,
        params: Optional[np.ndarray] = None,
    ) -> Tuple[Trajectory, SolveReport]:
        """
        One real-time iteration: linearize at `traj`, solve the QP with the new
        initial state and take the full step. On QP failure `traj` is returned
        unchanged with status `rti_fallback`.
        """
        traj, x0_hat, params = self._prepare(traj, x0_hat, params)
        report = SolveReport(status=SolveStatus.RTI)
        qp, flags, kkt = self._generate(traj, x0_hat, params, report)
        report.kkt = kkt
        res = self._solve_qp(qp, report)
        status = res.solution.status
        row = self._row(0, kkt, flags, qp_status=status.value, qp_iters=res.solution.iters)
        if status in (QpStatus.NUMERICAL_FAILURE, QpStatus.INFEASIBLE):
            logger.warning("RTI step kept the previous trajectory: QP %s", status.value)
            report.status = SolveStatus.RTI_FALLBACK
            report.rows.append(row)
            return traj, report
        row["alpha"] = 1.0
        report.rows.append(row)
        report.alpha_history.append(1.0)
        return res.step.apply(traj, 1.0), report

    def feedback(
        self,
        traj: Trajectory,
        x0_hat: np.ndarray,
        params: Optional[np.ndarray] = None,
    ) -> Tuple[Trajectory, SolveReport]:
        """Dispatch on the configured SQP mode."""
        if self.config.mode is SqpMode.RTI:
            return self.rti_step(traj, x0_hat, params)
        return self.solve(traj, x0_hat, params)

    def kkt_residual(
        self,
        traj: Trajectory,
        x0_hat: Optional[np.ndarray] = None,
        params: Optional[np.ndarray] = None,
    ) -> KktResidual:
        return kkt_residual(self.problem, self.options.integrator, traj, x0_hat, params)
