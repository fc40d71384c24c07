import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.ocp_ import (
    ConfigurationError,
    Dims,
    OcpProblem,
    TangentBundle,
    dual,
    get_benchmark,
    list_benchmarks,
    load_problem,
)
from helpers import van_der_pol


def central_jacobian(f, z, eps=1e-6):
    cols = []
    for i in range(z.size):
        e = np.zeros_like(z)
        e[i] = eps
        cols.append((f(z + e) - f(z - e)) / (2 * eps))
    return np.array(cols).T


# Forward-mode bundles
def test_bundle_product_rule():
    a = TangentBundle(3.0, np.array([1.0, 0.0]))
    b = TangentBundle(2.0, np.array([0.0, 1.0]))
    out = a * b + a / b - 2.0 * a
    assert out.value == 3.0 * 2.0 + 3.0 / 2.0 - 6.0
    assert_allclose(out.partials, [2.0 + 0.5 - 2.0, 3.0 - 3.0 / 4.0])


@pytest.mark.parametrize(
    "fn, df",
    [
        (dual.sin, np.cos),
        (dual.cos, lambda v: -np.sin(v)),
        (dual.exp, np.exp),
        (dual.log, lambda v: 1.0 / v),
        (dual.sqrt, lambda v: 0.5 / np.sqrt(v)),
        (dual.tanh, lambda v: 1.0 - np.tanh(v) ** 2),
        (dual.atan, lambda v: 1.0 / (1.0 + v * v)),
    ],
)
def test_elementary_derivatives(fn, df):
    v = 0.7
    out = fn(TangentBundle(v, np.array([1.0])))
    assert out.value == fn(v)
    assert_allclose(out.partials[0], df(v), rtol=1e-14)


def test_bundle_values_match_plain_evaluation():
    problem = get_benchmark("pendulum")
    rng = np.random.default_rng(0)
    for _ in range(10):
        x, u = rng.standard_normal(4), rng.standard_normal(1)
        f, _, _ = problem.dynamics_and_jac(x, u, problem.p_default)
        assert np.array_equal(f, problem.eval_dynamics(x, u, problem.p_default))


def test_power_and_comparisons():
    a = TangentBundle(2.0, np.array([1.0]))
    assert_allclose((a**3).partials, [12.0])
    assert_allclose((2.0**a).partials, [4.0 * np.log(2.0)])
    assert a > 1.0 and a <= 2.0 and float(a) == 2.0


# Model evaluation
@pytest.mark.parametrize("name", ["pendulum", "chain_linear", "chain_nonlinear", "lqr"])
def test_dynamics_jacobian_matches_finite_differences(name):
    problem = get_benchmark(name)
    d = problem.dims
    rng = np.random.default_rng(1)
    x = problem.x_init + 0.1 * rng.standard_normal(d.nx)
    u = 0.1 * rng.standard_normal(d.nu)
    p = problem.p_default
    _, fx, fu = problem.dynamics_and_jac(x, u, p)
    z = np.concatenate([x, u])
    fd = central_jacobian(lambda z: problem.eval_dynamics(z[: d.nx], z[d.nx :], p), z)
    assert_allclose(np.hstack([fx, fu]), fd, rtol=1e-6, atol=1e-8)


def test_directional_derivative_matches_jacobian():
    problem = get_benchmark("chain_nonlinear")
    rng = np.random.default_rng(2)
    d = problem.dims
    x = problem.x_init + 0.05 * rng.standard_normal(d.nx)
    u, dx, du = rng.standard_normal(d.nu), rng.standard_normal(d.nx), rng.standard_normal(d.nu)
    f, fx, fu = problem.dynamics_and_jac(x, u, problem.p_default)
    val, jvp = problem.dynamics_jvp(x, u, problem.p_default, dx, du)
    assert_allclose(val, f, rtol=0, atol=0)
    assert_allclose(jvp, fx @ dx + fu @ du, rtol=1e-12, atol=1e-12)


def test_pendulum_hanging_equilibrium():
    problem = get_benchmark("pendulum")
    f = problem.eval_dynamics(np.array([0.0, np.pi, 0.0, 0.0]), np.zeros(1), np.zeros(1))
    assert_allclose(f, np.zeros(4), atol=1e-12)


def test_residual_jacobian_shapes():
    problem = get_benchmark("pendulum")
    h, J = problem.eval_residual_and_jac(problem.x_init, np.zeros(1), problem.p_default)
    hN, JN = problem.eval_residual_and_jac(problem.x_init, None, problem.p_default, terminal=True)
    assert h.shape == (5,) and J.shape == (5, 5)
    assert hN.shape == (4,) and JN.shape == (4, 4)
    r, C, D = problem.eval_constraint_and_jac(problem.x_init, np.zeros(1), problem.p_default)
    assert_allclose(D, [[1.0]])
    assert_allclose(C, np.zeros((1, 4)))


def test_objective_of_resting_lqr_is_zero():
    problem = get_benchmark("lqr", x_init=(0.0, 0.0))
    d = problem.dims
    params = problem.stage_params()
    assert problem.objective(np.zeros((d.N + 1, 2)), np.zeros((d.N, 1)), params) == 0.0


def test_stage_params_broadcast_and_shape_check():
    problem = get_benchmark("chain_nonlinear")
    assert problem.stage_params().shape == (problem.dims.N + 1, 3)
    with pytest.raises(ConfigurationError):
        problem.stage_params(np.zeros(2))


def test_time_varying_weights():
    problem = van_der_pol()
    W = np.tile(np.eye(3), (problem.dims.N, 1, 1))
    W[0] *= 2.0
    tv = OcpProblem(
        name="tv",
        dims=problem.dims,
        dynamics=problem.dynamics,
        stage_residual=problem.stage_residual,
        terminal_residual=problem.terminal_residual,
        W=W,
        WN=np.eye(2),
    )
    assert_allclose(tv.stage_weight(0), 2.0 * np.eye(3))
    assert_allclose(tv.stage_weight(1), np.eye(3))


# Validation
def test_non_psd_weight_rejected():
    problem = van_der_pol()
    with pytest.raises(ConfigurationError, match="positive semidefinite"):
        OcpProblem(
            name="bad",
            dims=problem.dims,
            dynamics=problem.dynamics,
            stage_residual=problem.stage_residual,
            terminal_residual=problem.terminal_residual,
            W=np.diag([1.0, -1.0, 1.0]),
            WN=np.eye(2),
        )


def test_wrong_output_length_rejected():
    with pytest.raises(ConfigurationError, match="dynamics"):
        OcpProblem(
            name="bad",
            dims=Dims(nx=2, nu=1, nr=1, nrN=1),
            dynamics=lambda x, u, p: [x[0]],
            stage_residual=lambda x, u, p: [x[0]],
            terminal_residual=lambda x, p: [x[0]],
            W=np.eye(1),
            WN=np.eye(1),
        )


def test_inverted_bounds_rejected():
    with pytest.raises(ConfigurationError, match="bounds"):
        get_benchmark("lqr", u_max=-1.0)


def test_dims_validation():
    with pytest.raises(ConfigurationError):
        Dims(nx=2, nu=1, nr=1, nrN=1, N=0)
    with pytest.raises(ConfigurationError):
        Dims(nx=2, nu=1, nr=1, nrN=1, Ts=0.0)


# Benchmarks
def test_registry():
    assert list_benchmarks() == ["chain_linear", "chain_nonlinear", "lqr", "pendulum"]
    chain = get_benchmark("chain_linear")
    assert (chain.dims.nx, chain.dims.nu, chain.dims.N) == (30, 2, 50)
    nonlinear = get_benchmark("chain_nonlinear", n_masses=3)
    assert nonlinear.dims.nx == 6 * 2 + 3


def test_unknown_benchmark_and_option():
    with pytest.raises(ConfigurationError, match="unknown benchmark"):
        get_benchmark("hexacopter")
    with pytest.raises(ConfigurationError, match="invalid option"):
        get_benchmark("pendulum", wheels=4)


def test_load_problem(tmp_path):
    file = tmp_path / "problem.json"
    file.write_text(json.dumps({"version": 1, "benchmark": "pendulum", "N": 10, "F_max": 5.0}))
    problem = load_problem(file)
    assert problem.dims.N == 10
    assert_allclose(problem.ub, [5.0])

    file.write_text(json.dumps({"version": 2, "benchmark": "pendulum"}))
    with pytest.raises(ConfigurationError, match="version"):
        load_problem(file)
