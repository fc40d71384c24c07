from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from .dual import jacobian_of, seed, seed_direction, values_of
from .errors import ConfigurationError

ModelFunction = Callable[..., Sequence]


@dataclass(frozen=True)
class Dims:
    """
    Problem dimensions.

    Attributes:
        nx, nu: state and input counts
        nr, nrN: stage and terminal residual lengths
        nc, ncN: stage and terminal path-constraint counts
        N: number of shooting intervals
        Ts: shooting interval length
        npar: online parameter count
    """

    nx: int
    nu: int
    nr: int
    nrN: int
    nc: int = 0
    ncN: int = 0
    N: int = 20
    Ts: float = 0.1
    npar: int = 0

    def __post_init__(self) -> None:
        for name in ("nx", "nu", "nr", "nrN", "nc", "ncN", "npar"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"Dims.{name} must be >= 0")
        if self.N < 1:
            raise ConfigurationError("Dims.N must be >= 1")
        if not self.Ts > 0:
            raise ConfigurationError("Dims.Ts must be > 0")

    @property
    def nz(self) -> int:
        return self.nx + self.nu


def _check_psd(name: str, W: np.ndarray) -> None:
    scale = max(1.0, float(np.max(np.abs(W))) if W.size else 1.0)
    if not np.allclose(W, W.T, rtol=0.0, atol=1e-12 * scale):
        raise ConfigurationError(f"{name} must be symmetric")
    if W.size and np.linalg.eigvalsh(W).min() < -1e-12 * scale:
        raise ConfigurationError(f"{name} must be positive semidefinite")


@dataclass(frozen=True)
class OcpProblem:
    """
    Continuous-time optimal control problem in least-squares form.

    Model functions are plain Python callables written against scalar arithmetic
    and the elementary functions of `dual`, so the same source evaluates on floats
    and on tangent bundles. They take sequences and return sequences:
    dynamics(x, u, p), stage_residual(x, u, p), terminal_residual(x, p),
    stage_constraint(x, u, p), terminal_constraint(x, p).
    """

    name: str
    dims: Dims
    dynamics: ModelFunction
    stage_residual: ModelFunction
    terminal_residual: ModelFunction
    W: np.ndarray
    WN: np.ndarray
    stage_constraint: Optional[ModelFunction] = None
    terminal_constraint: Optional[ModelFunction] = None
    lb: np.ndarray = field(default_factory=lambda: np.zeros(0))
    ub: np.ndarray = field(default_factory=lambda: np.zeros(0))
    lbN: np.ndarray = field(default_factory=lambda: np.zeros(0))
    ubN: np.ndarray = field(default_factory=lambda: np.zeros(0))
    x_init: Optional[np.ndarray] = None
    p_default: Optional[np.ndarray] = None
    info: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        d = self.dims

        def fix(key: str, value) -> None:
            object.__setattr__(self, key, value)

        fix("W", np.asarray(self.W, dtype=float))
        fix("WN", np.asarray(self.WN, dtype=float))
        for key in ("lb", "ub", "lbN", "ubN"):
            fix(key, np.asarray(getattr(self, key), dtype=float).reshape(-1))
        fix("x_init", np.zeros(d.nx) if self.x_init is None else np.asarray(self.x_init, float))
        fix(
            "p_default",
            np.zeros(d.npar) if self.p_default is None else np.asarray(self.p_default, float),
        )

        if self.W.shape == (d.nr, d.nr):
            _check_psd("W", self.W)
        elif self.W.shape == (d.N, d.nr, d.nr):
            for k in range(d.N):
                _check_psd(f"W[{k}]", self.W[k])
        else:
            raise ConfigurationError(
                f"W must be {d.nr}x{d.nr} or {d.N}x{d.nr}x{d.nr}, got {self.W.shape}"
            )
        if self.WN.shape != (d.nrN, d.nrN):
            raise ConfigurationError(f"WN must be {d.nrN}x{d.nrN}, got {self.WN.shape}")
        _check_psd("WN", self.WN)

        for lo, hi, n, tag in ((self.lb, self.ub, d.nc, "stage"), (self.lbN, self.ubN, d.ncN, "terminal")):
            if lo.shape != (n,) or hi.shape != (n,):
                raise ConfigurationError(f"{tag} bounds must have length {n}")
            if np.any(lo > hi):
                raise ConfigurationError(f"{tag} bounds must satisfy lower <= upper")
        if self.stage_constraint is None and d.nc:
            raise ConfigurationError("nc > 0 requires a stage_constraint function")
        if self.terminal_constraint is None and d.ncN:
            raise ConfigurationError("ncN > 0 requires a terminal_constraint function")
        if self.x_init.shape != (d.nx,):
            raise ConfigurationError(f"x_init must have length {d.nx}")
        if self.p_default.shape != (d.npar,):
            raise ConfigurationError(f"p_default must have length {d.npar}")

        # Check output lengths once at the nominal point
        x, u, p = self.x_init, np.zeros(d.nu), self.p_default
        self.eval_dynamics(x, u, p)
        self.eval_residual(x, u, p)
        self.eval_residual(x, u, p, terminal=True)
        self.eval_constraint(x, u, p)
        self.eval_constraint(x, u, p, terminal=True)

    # Helpers
    def _check_inputs(self, x, u, p, terminal: bool = False) -> Tuple[np.ndarray, ...]:
        d = self.dims
        x = np.asarray(x, dtype=float)
        p = np.asarray(p, dtype=float)
        if x.shape != (d.nx,):
            raise ConfigurationError(f"state must have length {d.nx}, got {x.shape}")
        if p.shape != (d.npar,):
            raise ConfigurationError(f"parameters must have length {d.npar}, got {p.shape}")
        if terminal:
            return x, None, p
        u = np.asarray(u, dtype=float)
        if u.shape != (d.nu,):
            raise ConfigurationError(f"input must have length {d.nu}, got {u.shape}")
        return x, u, p

    @staticmethod
    def _checked(out: Sequence, n: int, what: str) -> Sequence:
        if len(out) != n:
            raise ConfigurationError(f"{what} returned {len(out)} entries, expected {n}")
        return out

    def stage_weight(self, k: int) -> np.ndarray:
        return self.W[k] if self.W.ndim == 3 else self.W

    def stage_params(self, params: Optional[np.ndarray] = None) -> np.ndarray:
        """Broadcast parameters to one row per shooting node, shape (N+1, npar)."""
        d = self.dims
        if params is None:
            params = self.p_default
        params = np.asarray(params, dtype=float)
        if params.shape == (d.npar,):
            return np.tile(params, (d.N + 1, 1))
        if params.shape == (d.N + 1, d.npar):
            return params
        raise ConfigurationError(
            f"parameters must be ({d.npar},) or ({d.N + 1}, {d.npar}), got {params.shape}"
        )

    # Dynamics
    def eval_dynamics(self, x, u, p) -> np.ndarray:
        x, u, p = self._check_inputs(x, u, p)
        out = self._checked(self.dynamics(x, u, p), self.dims.nx, "dynamics")
        return values_of(out)

    def dynamics_and_jac(self, x, u, p) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Value of f with its Jacobians (df/dx, df/du) from one forward sweep."""
        x, u, p = self._check_inputs(x, u, p)
        d = self.dims
        xs = seed(x, d.nz)
        us = seed(u, d.nz, offset=d.nx)
        out = self._checked(self.dynamics(xs, us, p), d.nx, "dynamics")
        jac = jacobian_of(out, d.nz)
        return values_of(out), jac[:, : d.nx], jac[:, d.nx :]

    def jac_dynamics(self, x, u, p) -> Tuple[np.ndarray, np.ndarray]:
        _, fx, fu = self.dynamics_and_jac(x, u, p)
        return fx, fu

    def dynamics_jvp(self, x, u, p, dx, du) -> Tuple[np.ndarray, np.ndarray]:
        """Value of f and its derivative along (dx, du)."""
        x, u, p = self._check_inputs(x, u, p)
        out = self.dynamics(seed_direction(x, dx), seed_direction(u, du), p)
        out = self._checked(out, self.dims.nx, "dynamics")
        return values_of(out), jacobian_of(out, 1)[:, 0]

    # Residuals
    def eval_residual(self, x, u, p, terminal: bool = False) -> np.ndarray:
        x, u, p = self._check_inputs(x, u, p, terminal)
        if terminal:
            out = self._checked(self.terminal_residual(x, p), self.dims.nrN, "terminal_residual")
        else:
            out = self._checked(self.stage_residual(x, u, p), self.dims.nr, "stage_residual")
        return values_of(out)

    def eval_residual_and_jac(self, x, u, p, terminal: bool = False) -> Tuple[np.ndarray, np.ndarray]:
        """Residual h and its Jacobian, nr x (nx+nu) for stages and nrN x nx at the end."""
        x, u, p = self._check_inputs(x, u, p, terminal)
        d = self.dims
        if terminal:
            out = self.terminal_residual(seed(x, d.nx), p)
            out = self._checked(out, d.nrN, "terminal_residual")
            return values_of(out), jacobian_of(out, d.nx)
        out = self.stage_residual(seed(x, d.nz), seed(u, d.nz, offset=d.nx), p)
        out = self._checked(out, d.nr, "stage_residual")
        return values_of(out), jacobian_of(out, d.nz)

    # Path constraints
    def eval_constraint(self, x, u, p, terminal: bool = False) -> np.ndarray:
        x, u, p = self._check_inputs(x, u, p, terminal)
        d = self.dims
        if terminal:
            if not d.ncN:
                return np.zeros(0)
            return values_of(self._checked(self.terminal_constraint(x, p), d.ncN, "terminal_constraint"))
        if not d.nc:
            return np.zeros(0)
        return values_of(self._checked(self.stage_constraint(x, u, p), d.nc, "stage_constraint"))

    def eval_constraint_and_jac(
        self, x, u, p, terminal: bool = False
    ) -> Tuple[np.ndarray, np.ndarray, Optional[np.ndarray]]:
        """Constraint value r with C = dr/dx and D = dr/du (D is None at the end)."""
        x, u, p = self._check_inputs(x, u, p, terminal)
        d = self.dims
        if terminal:
            if not d.ncN:
                return np.zeros(0), np.zeros((0, d.nx)), None
            out = self.terminal_constraint(seed(x, d.nx), p)
            out = self._checked(out, d.ncN, "terminal_constraint")
            return values_of(out), jacobian_of(out, d.nx), None
        if not d.nc:
            return np.zeros(0), np.zeros((0, d.nx)), np.zeros((0, d.nu))
        out = self.stage_constraint(seed(x, d.nz), seed(u, d.nz, offset=d.nx), p)
        out = self._checked(out, d.nc, "stage_constraint")
        jac = jacobian_of(out, d.nz)
        return values_of(out), jac[:, : d.nx], jac[:, d.nx :]

    # Objective
    def objective(self, x: np.ndarray, u: np.ndarray, params: np.ndarray) -> float:
        """l(w) = sum 1/2 |h_k|^2_W + 1/2 |h_N|^2_WN over a whole trajectory."""
        total = 0.0
        for k in range(self.dims.N):
            h = self.eval_residual(x[k], u[k], params[k])
            total += 0.5 * h @ self.stage_weight(k) @ h
        hN = self.eval_residual(x[-1], None, params[-1], terminal=True)
        return total + 0.5 * hN @ self.WN @ hN
