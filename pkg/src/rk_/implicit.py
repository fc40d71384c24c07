from typing import Dict, Tuple

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from ..ocp_ import OcpProblem
from ..ocp_.errors import ConfigurationError, IntegrationError
from .explicit import StepResult

_S3 = np.sqrt(3.0)
_S15 = np.sqrt(15.0)

# Gauss-Legendre Butcher tableaus (A, b, c)
GAUSS_LEGENDRE: Dict[int, Tuple[np.ndarray, np.ndarray, np.ndarray]] = {
    2: (
        np.array(
            [
                [0.25, 0.25 - _S3 / 6.0],
                [0.25 + _S3 / 6.0, 0.25],
            ]
        ),
        np.array([0.5, 0.5]),
        np.array([0.5 - _S3 / 6.0, 0.5 + _S3 / 6.0]),
    ),
    3: (
        np.array(
            [
                [5.0 / 36.0, 2.0 / 9.0 - _S15 / 15.0, 5.0 / 36.0 - _S15 / 30.0],
                [5.0 / 36.0 + _S15 / 24.0, 2.0 / 9.0, 5.0 / 36.0 - _S15 / 24.0],
                [5.0 / 36.0 + _S15 / 30.0, 2.0 / 9.0 + _S15 / 15.0, 5.0 / 36.0],
            ]
        ),
        np.array([5.0 / 18.0, 4.0 / 9.0, 5.0 / 18.0]),
        np.array([0.5 - _S15 / 10.0, 0.5, 0.5 + _S15 / 10.0]),
    ),
}


def irk_gl_step(
    problem: OcpProblem,
    x: np.ndarray,
    u: np.ndarray,
    p: np.ndarray,
    h: float,
    stages: int = 2,
    with_sens: bool = False,
    newton_tol: float = 1e-10,
    newton_max_iters: int = 20,
) -> StepResult:
    """
    Implicit Gauss-Legendre Runge-Kutta step.

    The stage derivatives K_i = f(x + h sum_j a_ij K_j, u) are found by full Newton
    iteration starting from K_i = f(x, u). Convergence is declared when
    ||K - F(K)||_inf <= newton_tol * max(1, ||K||_inf). The factorized Newton
    matrix of that last evaluation is reused for the sensitivities (implicit
    function theorem), so A and B are exact for the converged stages.

    Raises:
        IntegrationError: no convergence within `newton_max_iters`, or a
            non-finite stage value.
    """
    if stages not in GAUSS_LEGENDRE:
        raise ConfigurationError(f"Gauss-Legendre scheme with {stages} stages is not available")
    if not h > 0:
        raise IntegrationError("step length must be positive")
    a, b, _ = GAUSS_LEGENDRE[stages]
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    nx, nu = x.size, u.size
    s = stages

    K = np.tile(problem.eval_dynamics(x, u, p), (s, 1))
    fx = np.zeros((s, nx, nx))
    fu = np.zeros((s, nx, nu))
    F = np.zeros((s, nx))
    residual = np.inf
    for it in range(1, newton_max_iters + 1):
        for i in range(s):
            F[i], fx[i], fu[i] = problem.dynamics_and_jac(x + h * (a[i] @ K), u, p)
            if not np.all(np.isfinite(F[i])):
                raise IntegrationError(
                    f"non-finite value in collocation stage {i + 1}", rk_stage=i + 1, residual=residual
                )
        R = (K - F).reshape(-1)
        residual = float(np.max(np.abs(R))) if R.size else 0.0
        # dR_i / dK_j = delta_ij I - h a_ij J_i
        M = np.eye(s * nx) - h * np.block([[a[i, j] * fx[i] for j in range(s)] for i in range(s)])
        lu = lu_factor(M)
        if residual <= newton_tol * max(1.0, float(np.max(np.abs(K)))):
            break
        K = K - lu_solve(lu, R).reshape(s, nx)
    else:
        raise IntegrationError(
            f"stage Newton iteration did not converge in {newton_max_iters} iterations "
            f"(residual {residual:.3e})",
            residual=residual,
        )

    x_next = x + h * (b @ K)
    if not with_sens:
        return StepResult(x_next, newton_iters=it)

    dK_dx = lu_solve(lu, fx.reshape(s * nx, nx)).reshape(s, nx, nx)
    A = np.eye(nx) + h * np.tensordot(b, dK_dx, axes=1)
    B = np.zeros((nx, 0))
    if nu:
        dK_du = lu_solve(lu, fu.reshape(s * nx, nu)).reshape(s, nx, nu)
        B = h * np.tensordot(b, dK_du, axes=1)
    return StepResult(x_next, A, B, it)
