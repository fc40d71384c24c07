from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from ..ocp_ import OcpProblem
from ..ocp_.errors import ConfigurationError
from .explicit import StepResult, erk4_step
from .implicit import GAUSS_LEGENDRE, irk_gl_step

__all__ = [
    "Integrator",
    "IntegratorConfig",
    "Scheme",
    "StepResult",
    "GAUSS_LEGENDRE",
    "erk4_step",
    "irk_gl_step",
    "simulate_interval",
]


class Scheme(str, Enum):
    ERK4 = "erk4"
    IRK_GL2 = "irk-gl2"
    IRK_GL3 = "irk-gl3"


@dataclass(frozen=True)
class IntegratorConfig:
    """
    Attributes:
        scheme: Runge-Kutta scheme
        steps_per_interval: fixed sub-steps per shooting interval
        newton_tol: relative stage-residual tolerance (implicit schemes)
        newton_max_iters: Newton iteration cap (implicit schemes)
    """

    scheme: Scheme = Scheme.ERK4
    steps_per_interval: int = 2
    newton_tol: float = 1e-10
    newton_max_iters: int = 20

    def __post_init__(self) -> None:
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if self.steps_per_interval < 1:
            raise ConfigurationError("integrator.steps must be >= 1")
        if not self.newton_tol > 0:
            raise ConfigurationError("integrator.newton_tol must be > 0")
        if self.newton_max_iters < 1:
            raise ConfigurationError("integrator.newton_max_iters must be >= 1")


class Integrator:
    """
    Shooting-interval map phi(x, u, p) of one problem under one configuration.

    Sub-step sensitivities are chained as A = A_m ... A_1 and
    B = A_m (... (A_2 B_1 + B_2) ...) + B_m.
    """

    def __init__(
        self,
        problem: OcpProblem,
        config: Optional[IntegratorConfig] = None,
        interval: Optional[float] = None,
    ) -> None:
        self.problem = problem
        self.config = config or IntegratorConfig()
        self.interval = problem.dims.Ts if interval is None else interval
        if not self.interval > 0:
            raise ConfigurationError("integration interval must be > 0")
        self.h = self.interval / self.config.steps_per_interval

    def step(self, x, u, p, with_sens: bool = False) -> StepResult:
        cfg = self.config
        if cfg.scheme is Scheme.ERK4:
            return erk4_step(self.problem, x, u, p, self.h, with_sens)
        return irk_gl_step(
            self.problem,
            x,
            u,
            p,
            self.h,
            stages=2 if cfg.scheme is Scheme.IRK_GL2 else 3,
            with_sens=with_sens,
            newton_tol=cfg.newton_tol,
            newton_max_iters=cfg.newton_max_iters,
        )

    def simulate(self, x, u, p, with_sens: bool = False) -> StepResult:
        """Integrate over one whole interval with piecewise-constant `u`."""
        A = B = None
        newton_iters = 0
        for j in range(self.config.steps_per_interval):
            res = self.step(x, u, p, with_sens)
            x = res.x_next
            newton_iters += res.newton_iters
            if not with_sens:
                continue
            if j == 0:
                A, B = res.A, res.B
            else:
                A = res.A @ A
                B = res.A @ B + res.B
        return StepResult(x, A, B, newton_iters)

    def directional(self, x, u, p, dx, du, phi: np.ndarray) -> np.ndarray:
        """
        Forward difference of the interval map along (dx, du), reusing phi = phi(x, u).

        Costs one extra integration.
        """
        x, u = np.asarray(x, dtype=float), np.asarray(u, dtype=float)
        direction = np.concatenate([np.asarray(dx, dtype=float), np.asarray(du, dtype=float)])
        norm = float(np.linalg.norm(direction))
        if norm == 0.0:
            return np.zeros_like(phi)
        base = float(np.linalg.norm(np.concatenate([x, u])))
        eps = np.sqrt(np.finfo(float).eps) * max(1.0, base) / norm
        moved = self.simulate(x + eps * np.asarray(dx), u + eps * np.asarray(du), p).x_next
        return (moved - phi) / eps


def simulate_interval(
    problem: OcpProblem,
    config: IntegratorConfig,
    x: np.ndarray,
    u: np.ndarray,
    p: np.ndarray,
    with_sens: bool = True,
) -> StepResult:
    return Integrator(problem, config).simulate(x, u, p, with_sens)
