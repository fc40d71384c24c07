from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple

import numpy as np

from ..ms_ import StageQpData, StageStep, Trajectory
from ..ocp_ import OcpProblem
from ..rk_ import Integrator, IntegratorConfig


class NlpEval(NamedTuple):
    """Objective and l1 infeasibility of the multiple-shooting NLP at one iterate."""

    objective: float
    eq_l1: float
    ineq_l1: float

    @property
    def infeasibility(self) -> float:
        return self.eq_l1 + self.ineq_l1


@dataclass
class MeritState:
    """
    Attributes:
        mu_pen: penalty parameter, non-decreasing within one solve
        last_merit: m(w; mu_pen) at the current iterate
        last_dd: directional derivative of m along the current step
    """

    mu_pen: float = 0.0
    last_merit: float = np.nan
    last_dd: float = np.nan


def _violation(r: np.ndarray, lb: np.ndarray, ub: np.ndarray) -> np.ndarray:
    return np.maximum(0.0, r - ub) + np.maximum(0.0, lb - r)


def evaluate_nlp(
    problem: OcpProblem,
    integrator: Integrator,
    traj: Trajectory,
    x0_hat: np.ndarray,
    params: np.ndarray,
) -> NlpEval:
    params = problem.stage_params(params)
    eq = float(np.sum(np.abs(np.asarray(x0_hat) - traj.x[0])))
    ineq = 0.0
    for k in range(problem.dims.N):
        phi = integrator.simulate(traj.x[k], traj.u[k], params[k]).x_next
        eq += float(np.sum(np.abs(traj.x[k + 1] - phi)))
        r = problem.eval_constraint(traj.x[k], traj.u[k], params[k])
        ineq += float(np.sum(_violation(r, problem.lb, problem.ub)))
    rN = problem.eval_constraint(traj.x[-1], None, params[-1], terminal=True)
    ineq += float(np.sum(_violation(rN, problem.lbN, problem.ubN)))
    return NlpEval(problem.objective(traj.x, traj.u, params), eq, ineq)


def merit_eval(
    problem: OcpProblem,
    integrator_config: Optional[IntegratorConfig],
    traj: Trajectory,
    mu_pen: float,
    x0_hat: Optional[np.ndarray] = None,
    params: Optional[np.ndarray] = None,
) -> float:
    """m(w; mu) = l(w) + mu |e(w)|_1, with x0_hat defaulting to the first node."""
    x0_hat = traj.x[0] if x0_hat is None else x0_hat
    ev = evaluate_nlp(problem, Integrator(problem, integrator_config), traj, x0_hat, params)
    return ev.objective + mu_pen * ev.infeasibility


def infeasibility_l1(qp: StageQpData) -> float:
    """|e(w)|_1 read off the QP data it was linearized into."""
    total = float(np.sum(np.abs(qp.dx0)) + np.sum(np.abs(qp.d)))
    for lbc, ubc in ((qp.lbc, qp.ubc), (qp.lbcN, qp.ubcN)):
        total += float(np.sum(np.maximum(0.0, lbc)) + np.sum(np.maximum(0.0, -ubc)))
    return total


def model_terms(qp: StageQpData, step: StageStep) -> Tuple[float, float]:
    """(grad l^T dw, dw^T H dw) of the QP model along `step`."""
    z = np.concatenate([step.dx[:-1], step.du], axis=1)
    grad = float(np.sum(qp.g * z) + qp.gN @ step.dx[-1])
    curv = float(np.einsum("ki,kij,kj->", z, qp.H, z) + step.dx[-1] @ qp.HN @ step.dx[-1])
    return grad, curv


def penalty_and_direction(
    qp: StageQpData,
    step: StageStep,
    merit: MeritState,
    rho: float = 0.5,
    sigma: float = 1.0,
) -> Tuple[float, float]:
    """
    Penalty update and directional derivative of the l1 merit function.

    mu = max(mu_prev, (grad l^T dw + sigma/2 dw^T H dw) / ((1 - rho) |e|_1)) when
    |e|_1 > 0, mu_prev otherwise; D = grad l^T dw - mu |e|_1.
    """
    grad, curv = model_terms(qp, step)
    e1 = infeasibility_l1(qp)
    mu = merit.mu_pen
    if e1 > 0:
        mu = max(mu, (grad + 0.5 * sigma * curv) / ((1.0 - rho) * e1))
    return mu, grad - mu * e1
