"""
Curvature-like measure of nonlinearity (CMoN) for adaptive sensitivity updates.

Between two linearizations i-1 and i of the interval map phi_k, with primal
increment q_k = (x_k^i - x_k^{i-1}, u_k^i - u_k^{i-1}):

    kappa_k = |phi_k^i - phi_k^{i-1} - grad phi_k^{i-1} q_k| / |grad phi_k^{i-1} q_k|

measures how far phi_k is from its previous linear model. The dual measure

    kappa~_k = |dlam^T (grad phi_k^i q_k - grad phi_k^{i-1} q_k)| / |q_k|
               / |dlam^T grad phi_k^{i-1}|,     dlam = lam_{k+1}^i - lam_{k+1}^{i-1}

projects the sensitivity change on q_k, with grad phi_k^i q_k taken from one
directional evaluation of the integrator.
"""

from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from ..ocp_.errors import ConfigurationError

EPS_DEN = 1e-12


@dataclass(frozen=True)
class CmonConfig:
    """
    Attributes:
        enabled: reuse sensitivities of sufficiently linear stages
        eta_pri: primal threshold; 0 forces every stage to update
        eta_dual: dual threshold; inf disables the dual test
        eps_abs, eps_rel: solver tolerances the thresholds were derived from
    """

    enabled: bool = False
    eta_pri: float = 0.1
    eta_dual: float = float("inf")
    eps_abs: Optional[float] = None
    eps_rel: Optional[float] = None

    def __post_init__(self) -> None:
        if self.eta_pri < 0 or self.eta_dual < 0:
            raise ConfigurationError("cmon thresholds must be >= 0")

    @classmethod
    def from_tolerances(cls, eps_abs: float, eps_rel: float, enabled: bool = True) -> "CmonConfig":
        """Heuristic threshold mapping eta_pri = eta_dual = eps_rel."""
        return cls(enabled, eps_rel, eps_rel, eps_abs, eps_rel)

    @property
    def dual_test(self) -> bool:
        return np.isfinite(self.eta_dual)


@dataclass
class CmonFlags:
    """
    Per-stage outcome of one QP generation.

    Attributes:
        update_mask: True where the sensitivities were evaluated exactly
        kappa: primal measure (nan where undefined)
        kappa_tilde: dual measure (nan where undefined or not computed)
        degenerate: True where |grad phi q| vanished
    """

    update_mask: np.ndarray
    kappa: np.ndarray
    kappa_tilde: np.ndarray
    degenerate: np.ndarray

    @classmethod
    def full_update(cls, N: int) -> "CmonFlags":
        nan = np.full(N, np.nan)
        return cls(np.ones(N, dtype=bool), nan, nan.copy(), np.zeros(N, dtype=bool))

    @property
    def update_fraction(self) -> float:
        return float(np.mean(self.update_mask)) if self.update_mask.size else 1.0


def primal_measure(
    phi_cur: np.ndarray,
    phi_prev: np.ndarray,
    A_prev: np.ndarray,
    B_prev: np.ndarray,
    dx: np.ndarray,
    du: np.ndarray,
) -> Tuple[float, bool]:
    """kappa_k and whether its denominator vanished."""
    lin = A_prev @ dx + B_prev @ du
    den = float(np.linalg.norm(lin))
    if den < EPS_DEN:
        return np.nan, True
    return float(np.linalg.norm(phi_cur - phi_prev - lin)) / den, False


def dual_measure(
    dlam: np.ndarray,
    A_prev: np.ndarray,
    B_prev: np.ndarray,
    dx: np.ndarray,
    du: np.ndarray,
    jvp_cur: Optional[np.ndarray],
) -> float:
    """kappa~_k, nan when either denominator vanishes or no directional value is given."""
    if jvp_cur is None:
        return np.nan
    q_norm = float(np.linalg.norm(np.concatenate([dx, du])))
    den = float(np.linalg.norm(dlam @ np.hstack([A_prev, B_prev])))
    if q_norm < EPS_DEN or den < EPS_DEN:
        return np.nan
    num = abs(float(dlam @ (jvp_cur - (A_prev @ dx + B_prev @ du))))
    return num / q_norm / den


def cmon_measures(
    prev_traj,
    cur_traj,
    prev_A: np.ndarray,
    prev_B: np.ndarray,
    prev_phi: np.ndarray,
    cur_phi: np.ndarray,
    directional: Optional[Callable[[int, np.ndarray, np.ndarray], np.ndarray]] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Both measures for every stage.

    Args:
        prev_traj, cur_traj: iterates i-1 and i (duals taken from them)
        prev_A, prev_B: (N, nx, nx) and (N, nx, nu) sensitivities at i-1
        prev_phi, cur_phi: (N, nx) interval-map values at i-1 and i
        directional: optional callable (k, dx, du) -> grad phi_k^i (dx, du);
            without it kappa_tilde is nan

    Returns:
        kappa, kappa_tilde: (N,) arrays, nan where undefined
    """
    N = prev_A.shape[0]
    kappa = np.full(N, np.nan)
    kappa_tilde = np.full(N, np.nan)
    for k in range(N):
        dx = cur_traj.x[k] - prev_traj.x[k]
        du = cur_traj.u[k] - prev_traj.u[k]
        kappa[k], _ = primal_measure(cur_phi[k], prev_phi[k], prev_A[k], prev_B[k], dx, du)
        jvp = directional(k, dx, du) if directional is not None else None
        dlam = cur_traj.lam[k + 1] - prev_traj.lam[k + 1]
        kappa_tilde[k] = dual_measure(dlam, prev_A[k], prev_B[k], dx, du, jvp)
    return kappa, kappa_tilde


def should_skip(config: CmonConfig, kappa: float, degenerate: bool, kappa_tilde: float) -> bool:
    """Reuse the previous sensitivities of this stage?"""
    if not config.enabled or config.eta_pri <= 0 or degenerate:
        return False
    if not kappa <= config.eta_pri:
        return False
    if config.dual_test and not np.isnan(kappa_tilde):
        return kappa_tilde <= config.eta_dual
    return True
