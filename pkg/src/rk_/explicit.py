from typing import NamedTuple, Optional

import numpy as np

from ..ocp_ import OcpProblem
from ..ocp_.errors import IntegrationError


class StepResult(NamedTuple):
    """
    One integration step (or a whole shooting interval).

    Attributes:
        x_next: state at the end of the step
        A: d x_next / d x, None when sensitivities were not requested
        B: d x_next / d u, None when sensitivities were not requested
        newton_iters: Newton iterations of the stage solve (0 for explicit schemes)
    """

    x_next: np.ndarray
    A: Optional[np.ndarray] = None
    B: Optional[np.ndarray] = None
    newton_iters: int = 0


def _finite(k: np.ndarray, rk_stage: int) -> np.ndarray:
    if not np.all(np.isfinite(k)):
        raise IntegrationError(f"non-finite value in Runge-Kutta stage {rk_stage}", rk_stage=rk_stage)
    return k


def erk4_step(
    problem: OcpProblem,
    x: np.ndarray,
    u: np.ndarray,
    p: np.ndarray,
    h: float,
    with_sens: bool = False,
) -> StepResult:
    """
    Classical four-stage Runge-Kutta step.

    With `with_sens`, A and B are the exact derivatives of the discrete update,
    propagated through the stages: dk_i = J_i (I + c_i h dk_{i-1}) for the state
    part, plus the direct input Jacobian for the input part.
    """
    if not h > 0:
        raise IntegrationError("step length must be positive")
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)

    if not with_sens:
        f = problem.eval_dynamics
        k1 = _finite(f(x, u, p), 1)
        k2 = _finite(f(x + 0.5 * h * k1, u, p), 2)
        k3 = _finite(f(x + 0.5 * h * k2, u, p), 3)
        k4 = _finite(f(x + h * k3, u, p), 4)
        return StepResult(x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4))

    f = problem.dynamics_and_jac
    eye = np.eye(x.size)
    k1, fx, fu = f(x, u, p)
    _finite(k1, 1)
    k1x, k1u = fx, fu

    k2, fx, fu = f(x + 0.5 * h * k1, u, p)
    _finite(k2, 2)
    k2x = fx @ (eye + 0.5 * h * k1x)
    k2u = fx @ (0.5 * h * k1u) + fu

    k3, fx, fu = f(x + 0.5 * h * k2, u, p)
    _finite(k3, 3)
    k3x = fx @ (eye + 0.5 * h * k2x)
    k3u = fx @ (0.5 * h * k2u) + fu

    k4, fx, fu = f(x + h * k3, u, p)
    _finite(k4, 4)
    k4x = fx @ (eye + h * k3x)
    k4u = fx @ (h * k3u) + fu

    x_next = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    A = eye + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
    B = (h / 6.0) * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
    return StepResult(x_next, A, B)
