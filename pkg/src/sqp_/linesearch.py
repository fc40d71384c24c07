import logging
from typing import NamedTuple, Optional

import numpy as np

from ..ms_ import StageStep, Trajectory
from ..ocp_ import OcpProblem
from ..ocp_.errors import IntegrationError
from ..rk_ import Integrator
from .merit import MeritState, evaluate_nlp
from .options import SqpConfig

logger = logging.getLogger(__name__)


class LineSearchResult(NamedTuple):
    alpha: float
    traj: Trajectory
    merit: float
    armijo_ok: bool
    failed: bool
    trials: int


def line_search(
    problem: OcpProblem,
    integrator: Integrator,
    traj: Trajectory,
    step: StageStep,
    merit: MeritState,
    x0_hat: np.ndarray,
    params: Optional[np.ndarray] = None,
    config: SqpConfig = SqpConfig(),
) -> LineSearchResult:
    """
    Backtracking on m(w + alpha dw; mu) <= m(w; mu) + eta alpha D over
    alpha = 1, beta, beta^2, ... down to min_alpha.

    `merit` must carry mu_pen, the merit value at `traj` and D. The duals move
    by the same fraction toward the QP duals. A zero step is accepted at
    alpha = 1. When D >= 0 the direction is not a descent direction: min_alpha
    is taken and the result is flagged as failed.
    """
    m0, D, mu = merit.last_merit, merit.last_dd, merit.mu_pen

    def merit_at(alpha: float):
        trial = step.apply(traj, alpha)
        try:
            ev = evaluate_nlp(problem, integrator, trial, x0_hat, params)
        except IntegrationError:
            return trial, np.inf
        return trial, ev.objective + mu * ev.infeasibility

    if step.norm_inf() == 0.0:
        return LineSearchResult(1.0, step.apply(traj, 1.0), m0, True, False, 0)

    if not D < 0:
        logger.warning(
            "no descent direction for the merit function (D = %.3e), taking alpha = %g", D, config.min_alpha
        )
        trial, m_min = merit_at(config.min_alpha)
        return LineSearchResult(config.min_alpha, trial, m_min, False, True, 1)

    alpha, trials = 1.0, 0
    while alpha >= config.min_alpha:
        trial, m_alpha = merit_at(alpha)
        trials += 1
        if m_alpha <= m0 + config.armijo_eta * alpha * D:
            return LineSearchResult(alpha, trial, m_alpha, True, False, trials)
        alpha *= config.backtrack_factor

    logger.warning("line search failed, taking alpha = %g", config.min_alpha)
    trial, m_min = merit_at(config.min_alpha)
    return LineSearchResult(config.min_alpha, trial, m_min, False, True, trials + 1)
