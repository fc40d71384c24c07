import json
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np

from . import dual
from .errors import ConfigurationError
from .model import Dims, OcpProblem


def _diag(values) -> np.ndarray:
    return np.diag(np.asarray(values, dtype=float))


def _weights(default_W, default_WN, W, WN):
    return (
        _diag(default_W) if W is None else np.asarray(W, dtype=float),
        _diag(default_WN) if WN is None else np.asarray(WN, dtype=float),
    )


def _maybe_diag(value):
    if value is None:
        return None
    value = np.asarray(value, dtype=float)
    return np.diag(value) if value.ndim == 1 else value


# 1. Linear-quadratic double integrator
def lqr(
    N: int = 20,
    Ts: float = 0.1,
    W=None,
    WN=None,
    u_max: Optional[float] = None,
    x_init=(1.0, 0.0),
) -> OcpProblem:
    """
    Double integrator x1' = x2, x2' = u with residuals h = (x1, x2, u), h_N = (x1, x2).

    Linear dynamics and a quadratic cost: one full SQP step solves it.
    Defaults: W = diag(1, 1, 0.1), WN = diag(1, 1), no constraints unless `u_max`.
    """

    def dynamics(x, u, p):
        return [x[1], u[0]]

    def stage_residual(x, u, p):
        return [x[0], x[1], u[0]]

    def terminal_residual(x, p):
        return [x[0], x[1]]

    def stage_constraint(x, u, p):
        return [u[0]]

    nc = 0 if u_max is None else 1
    W, WN = _weights((1.0, 1.0, 0.1), (1.0, 1.0), _maybe_diag(W), _maybe_diag(WN))
    bounds = {} if u_max is None else {"lb": [-u_max], "ub": [u_max]}
    return OcpProblem(
        name="lqr",
        dims=Dims(nx=2, nu=1, nr=3, nrN=2, nc=nc, N=N, Ts=Ts),
        dynamics=dynamics,
        stage_residual=stage_residual,
        terminal_residual=terminal_residual,
        stage_constraint=stage_constraint if nc else None,
        W=W,
        WN=WN,
        x_init=np.asarray(x_init, dtype=float),
        info={"u_max": u_max},
        **bounds,
    )


# 2. Inverted pendulum on a cart
def pendulum(
    N: int = 40,
    Ts: float = 0.05,
    M: float = 1.0,
    m: float = 0.1,
    l: float = 0.8,
    g: float = 9.81,
    F_max: float = 20.0,
    W=None,
    WN=None,
) -> OcpProblem:
    """
    Cart-pole swing-up.

    States (p, theta, v, omega): cart position, pole angle (0 upright, pi hanging),
    cart velocity, angular rate. Input F: force on the cart, |F| <= F_max.
    Parameter p_ref: cart position reference.

    Model parameters: cart mass M = 1 kg, pole mass m = 0.1 kg, pole length
    l = 0.8 m, gravity g = 9.81 m/s^2, F_max = 20 N. Horizon N = 40, Ts = 0.05 s.
    Weights: W = diag(10, 10, 0.1, 0.1, 0.01), WN = diag(10, 10, 0.1, 0.1).
    """

    def dynamics(x, u, p):
        _, theta, v, omega = x
        F = u[0]
        s, c = dual.sin(theta), dual.cos(theta)
        den = M + m - m * c * c
        return [
            v,
            omega,
            (-m * l * s * omega * omega + m * g * c * s + F) / den,
            (-m * l * c * s * omega * omega + F * c + (M + m) * g * s) / (l * den),
        ]

    def stage_residual(x, u, p):
        return [x[0] - p[0], x[1], x[2], x[3], u[0]]

    def terminal_residual(x, p):
        return [x[0] - p[0], x[1], x[2], x[3]]

    def stage_constraint(x, u, p):
        return [u[0]]

    W, WN = _weights(
        (10.0, 10.0, 0.1, 0.1, 0.01), (10.0, 10.0, 0.1, 0.1), _maybe_diag(W), _maybe_diag(WN)
    )
    return OcpProblem(
        name="pendulum",
        dims=Dims(nx=4, nu=1, nr=5, nrN=4, nc=1, N=N, Ts=Ts, npar=1),
        dynamics=dynamics,
        stage_residual=stage_residual,
        terminal_residual=terminal_residual,
        stage_constraint=stage_constraint,
        W=W,
        WN=WN,
        lb=[-F_max],
        ub=[F_max],
        x_init=np.array([0.0, np.pi, 0.0, 0.0]),
        p_default=np.zeros(1),
        info={"M": M, "m": m, "l": l, "g": g, "F_max": F_max},
    )


# 3. Linear chain of masses
def chain_linear(
    N: int = 50,
    Ts: float = 0.1,
    n_masses: int = 15,
    k: float = 1.0,
    c: float = 0.05,
    mass: float = 1.0,
    F_max: float = 1.0,
    W=None,
    WN=None,
) -> OcpProblem:
    """
    Masses on a line between two walls, joined by linear springs with light damping.

    States: displacements p_1..p_M then velocities v_1..v_M (nx = 2M). Inputs:
    forces on the first and the last mass, |F| <= F_max. Residuals are all states
    and inputs, driven to rest at zero.

    Defaults: M = 15 masses (nx = 30), spring constant k = 1 N/m, damping
    c = 0.05 Ns/m, mass 1 kg, F_max = 1 N, N = 50, Ts = 0.1 s.
    Weights: 1 on positions, 0.1 on velocities, 0.01 on forces; WN = 10 x states.
    """
    n = n_masses
    if n < 2:
        raise ConfigurationError("chain_linear needs at least 2 masses")

    def dynamics(x, u, p):
        pos, vel = x[:n], x[n:]
        acc = []
        for i in range(n):
            left = pos[i - 1] if i > 0 else 0.0
            right = pos[i + 1] if i < n - 1 else 0.0
            a = (k * (right - pos[i]) - k * (pos[i] - left) - c * vel[i]) / mass
            if i == 0:
                a = a + u[0] / mass
            if i == n - 1:
                a = a + u[1] / mass
            acc.append(a)
        return list(vel) + acc

    def stage_residual(x, u, p):
        return list(x) + [u[0], u[1]]

    def terminal_residual(x, p):
        return list(x)

    def stage_constraint(x, u, p):
        return [u[0], u[1]]

    state_w = [1.0] * n + [0.1] * n
    W, WN = _weights(
        state_w + [0.01, 0.01], [10.0 * w for w in state_w], _maybe_diag(W), _maybe_diag(WN)
    )
    x_init = np.concatenate([0.2 * np.sin(np.pi * np.arange(1, n + 1) / (n + 1)), np.zeros(n)])
    return OcpProblem(
        name="chain_linear",
        dims=Dims(nx=2 * n, nu=2, nr=2 * n + 2, nrN=2 * n, nc=2, N=N, Ts=Ts),
        dynamics=dynamics,
        stage_residual=stage_residual,
        terminal_residual=terminal_residual,
        stage_constraint=stage_constraint,
        W=W,
        WN=WN,
        lb=[-F_max, -F_max],
        ub=[F_max, F_max],
        x_init=x_init,
        info={"n_masses": n, "k": k, "c": c, "mass": mass, "F_max": F_max},
    )


# 4. Nonlinear hanging chain of masses
def chain_nonlinear(
    N: int = 20,
    Ts: float = 0.2,
    n_masses: int = 4,
    D: float = 1.0,
    L: float = 0.033,
    mass: float = 0.03,
    g: float = 9.81,
    v_max: float = 1.0,
    W=None,
    WN=None,
) -> OcpProblem:
    """
    Chain of point masses in 3-D joined by springs; one end fixed at the origin,
    the velocity of the other end is the control.

    States: positions of the free masses 1..M-1, their velocities, and the position
    of the controlled end (nx = 6(M-1) + 3). Inputs: end velocity, |u_i| <= v_max.
    Parameters: end position reference (3). Residuals: free-mass velocities, end
    position error and inputs, so the chain is brought to rest with its end at
    the reference.

    Defaults: M = 4 (nx = 21), spring constant D = 1 N/m, rest length L = 0.033 m,
    mass 0.03 kg, g = 9.81 m/s^2, v_max = 1 m/s, N = 20, Ts = 0.2 s. Weights: 1 on
    velocities, 25 on the end position, 0.01 on inputs.
    """
    n_free = n_masses - 1
    if n_free < 1:
        raise ConfigurationError("chain_nonlinear needs at least 2 masses")
    nx = 6 * n_free + 3

    def spring(a, b):
        # Force on `a` from the spring towards `b`
        diff = [b[j] - a[j] for j in range(3)]
        dist = dual.sqrt(diff[0] * diff[0] + diff[1] * diff[1] + diff[2] * diff[2])
        scale = D * (1.0 - L / dist)
        return [scale * diff[j] for j in range(3)]

    def dynamics(x, u, p):
        pos = [list(x[3 * i : 3 * i + 3]) for i in range(n_free)]
        vel = list(x[3 * n_free : 6 * n_free])
        end = list(x[6 * n_free :])
        nodes = [[0.0, 0.0, 0.0]] + pos + [end]
        acc = []
        for i in range(1, n_free + 1):
            f_left = spring(nodes[i], nodes[i - 1])
            f_right = spring(nodes[i], nodes[i + 1])
            for j in range(3):
                a = (f_left[j] + f_right[j]) / mass
                acc.append(a - g if j == 2 else a)
        return vel + acc + [u[0], u[1], u[2]]

    def stage_residual(x, u, p):
        vel = list(x[3 * n_free : 6 * n_free])
        end = x[6 * n_free :]
        return vel + [end[j] - p[j] for j in range(3)] + [u[0], u[1], u[2]]

    def terminal_residual(x, p):
        vel = list(x[3 * n_free : 6 * n_free])
        end = x[6 * n_free :]
        return vel + [end[j] - p[j] for j in range(3)]

    def stage_constraint(x, u, p):
        return [u[0], u[1], u[2]]

    W, WN = _weights(
        [1.0] * (3 * n_free) + [25.0] * 3 + [0.01] * 3,
        [1.0] * (3 * n_free) + [25.0] * 3,
        _maybe_diag(W),
        _maybe_diag(WN),
    )
    p_end = np.array([1.0, 0.0, 0.0])
    # Straight line from the fixed end to the reference, at rest
    x_init = np.concatenate(
        [np.outer(np.arange(1, n_free + 1) / n_masses, p_end).reshape(-1), np.zeros(3 * n_free), p_end]
    )
    return OcpProblem(
        name="chain_nonlinear",
        dims=Dims(nx=nx, nu=3, nr=3 * n_free + 6, nrN=3 * n_free + 3, nc=3, N=N, Ts=Ts, npar=3),
        dynamics=dynamics,
        stage_residual=stage_residual,
        terminal_residual=terminal_residual,
        stage_constraint=stage_constraint,
        W=W,
        WN=WN,
        lb=[-v_max] * 3,
        ub=[v_max] * 3,
        x_init=x_init,
        p_default=p_end,
        info={"n_masses": n_masses, "D": D, "L": L, "mass": mass, "g": g, "v_max": v_max},
    )


BENCHMARKS: Dict[str, Callable[..., OcpProblem]] = {
    "pendulum": pendulum,
    "chain_linear": chain_linear,
    "chain_nonlinear": chain_nonlinear,
    "lqr": lqr,
}


def list_benchmarks() -> List[str]:
    return sorted(BENCHMARKS)


def get_benchmark(name: str, **overrides) -> OcpProblem:
    """Build a registered benchmark, passing `overrides` to its factory."""
    if name not in BENCHMARKS:
        raise ConfigurationError(
            f"unknown benchmark {name!r}; choose from {', '.join(list_benchmarks())}"
        )
    try:
        return BENCHMARKS[name](**overrides)
    except TypeError as err:
        raise ConfigurationError(f"invalid option for benchmark {name!r}: {err}") from err


def load_problem(file: str | Path) -> OcpProblem:
    """
    Build a benchmark from a JSON problem file.

    Schema (version 1):
        {"version": 1, "benchmark": "<name>", "N": int, "Ts": float,
         "W": [diag] or [[...]], "WN": ..., <model parameter>: value, ...}
    """
    data = json.loads(Path(file).read_text(encoding="utf-8"))
    if data.pop("version", 1) != 1:
        raise ConfigurationError("unsupported problem file version")
    if "benchmark" not in data:
        raise ConfigurationError("problem file must name a benchmark")
    return get_benchmark(data.pop("benchmark"), **data)
