from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..ocp_ import OcpProblem
from ..ocp_.errors import ConfigurationError
from ..ocp_.model import Dims


@dataclass
class Trajectory:
    """
    Primal-dual iterate of the multiple-shooting NLP.

    Attributes:
        x: (N+1, nx) node states
        u: (N, nu) piecewise-constant inputs
        lam: (N+1, nx) continuity multipliers; lam[0] belongs to the initial-value
            constraint
        mu: (N, nc) path-constraint multipliers, signed (upper minus lower)
        muN: (ncN,) terminal-constraint multipliers, signed
    """

    x: np.ndarray
    u: np.ndarray
    lam: np.ndarray
    mu: np.ndarray
    muN: np.ndarray

    @classmethod
    def initial(
        cls,
        problem: OcpProblem,
        x0: Optional[np.ndarray] = None,
        u0: Optional[np.ndarray] = None,
    ) -> "Trajectory":
        """Constant state `x0` on every node, constant input `u0`, zero duals."""
        d = problem.dims
        x0 = problem.x_init if x0 is None else np.asarray(x0, dtype=float)
        u0 = np.zeros(d.nu) if u0 is None else np.asarray(u0, dtype=float)
        return cls(
            x=np.tile(x0, (d.N + 1, 1)),
            u=np.tile(u0, (d.N, 1)),
            lam=np.zeros((d.N + 1, d.nx)),
            mu=np.zeros((d.N, d.nc)),
            muN=np.zeros(d.ncN),
        )

    def copy(self) -> "Trajectory":
        return Trajectory(
            self.x.copy(), self.u.copy(), self.lam.copy(), self.mu.copy(), self.muN.copy()
        )

    def validate(self, dims: Dims) -> "Trajectory":
        expected = {
            "x": (dims.N + 1, dims.nx),
            "u": (dims.N, dims.nu),
            "lam": (dims.N + 1, dims.nx),
            "mu": (dims.N, dims.nc),
            "muN": (dims.ncN,),
        }
        for name, shape in expected.items():
            value = getattr(self, name)
            if value.shape != shape:
                raise ConfigurationError(f"trajectory {name} must be {shape}, got {value.shape}")
            if not np.all(np.isfinite(value)):
                raise ConfigurationError(f"trajectory {name} has non-finite entries")
        return self

    def primal(self) -> np.ndarray:
        """Stacked w = (x_0, u_0, x_1, u_1, ..., x_N)."""
        parts = []
        for k in range(self.u.shape[0]):
            parts += [self.x[k], self.u[k]]
        parts.append(self.x[-1])
        return np.concatenate(parts)


@dataclass
class StageStep:
    """QP solution in stage form: increments (dx, du) and the QP multipliers."""

    dx: np.ndarray
    du: np.ndarray
    lam: np.ndarray
    mu: np.ndarray
    muN: np.ndarray

    def primal(self) -> np.ndarray:
        parts = []
        for k in range(self.du.shape[0]):
            parts += [self.dx[k], self.du[k]]
        parts.append(self.dx[-1])
        return np.concatenate(parts)

    def norm_inf(self) -> float:
        w = self.primal()
        return float(np.max(np.abs(w))) if w.size else 0.0

    def apply(self, traj: Trajectory, alpha: float = 1.0) -> Trajectory:
        """w + alpha dw, with duals moved the same fraction toward the QP duals."""
        return Trajectory(
            x=traj.x + alpha * self.dx,
            u=traj.u + alpha * self.du,
            lam=traj.lam + alpha * (self.lam - traj.lam),
            mu=traj.mu + alpha * (self.mu - traj.mu),
            muN=traj.muN + alpha * (self.muN - traj.muN),
        )
