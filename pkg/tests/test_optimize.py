"""Direct action minimization and the boundary-value-problem oracle."""

import math

import numpy as np
import pytest

from ompath import (
    ContractViolation,
    DiscretePath,
    NoConvergence,
    OptimizerConfig,
    SdeModel,
    builtin_model,
    euler_lagrange_residual,
    euler_lagrange_rhs_example1,
    linear_path,
    minimize_om,
    om_functional,
    om_path_gradient,
    solve_el_bvp,
    solve_el_relaxation,
    uniform_grid,
)

LINEAR = builtin_model("linear_test")  # f = -x, g = 1
DOUBLE_WELL = builtin_model("example1")


def sinh_solution(grid):
    """Analytic minimizer for f = -x, g = 1, endpoints 0 -> 1.

    The stationarity condition of int (ydot + y)^2 dt - 1 is y'' = y, so
    y(t) = sinh(t) / sinh(1).
    """
    return np.sinh(grid) / math.sinh(1.0)


def test_linear_model_minimizer_matches_analytic():
    res = minimize_om(LINEAR, np.zeros(1), np.ones(1), OptimizerConfig(steps=200))
    assert res.converged
    err = np.max(np.abs(res.path.values[:, 0] - sinh_solution(res.path.grid)))
    assert err <= 1e-3


def test_equal_endpoints_zero_drift_is_constant():
    m = builtin_model("zero_drift", {"n": 2})
    x = np.array([0.7, -0.3])
    res = minimize_om(m, x, x, OptimizerConfig(steps=32))
    assert res.converged
    assert np.max(np.abs(res.path.values - x)) <= 1e-12
    assert res.om.drift_term <= 1e-12


def test_double_well_stationarity_and_improvement():
    x0, x1 = np.array([-2.0]), np.array([2.0])
    res = minimize_om(DOUBLE_WELL, x0, x1, OptimizerConfig(steps=400, gradient_tolerance=1e-6))
    assert res.converged
    assert res.el_residual < 1e-3
    line_om = om_functional(DOUBLE_WELL, linear_path(x0, x1, 400)).total
    assert res.om.total <= line_om


def test_el_rhs_hand_values():
    assert euler_lagrange_rhs_example1(0.0, 0.0, 0.0) == 0.0
    assert euler_lagrange_rhs_example1(0.0, 2.0, 0.0) == 0.0
    assert euler_lagrange_rhs_example1(1.0, 0.0, 1.0) == pytest.approx(1.0)


def test_bvp_free_particle_is_straight_line():
    path = solve_el_bvp(lambda t, y, ydot: 0.0, 0.0, 1.0, 50)
    assert np.max(np.abs(path.values[:, 0] - path.grid)) <= 1e-10


def test_bvp_linear_matches_sinh():
    path = solve_el_bvp(lambda t, y, ydot: y, 0.0, 1.0, 400)
    assert np.max(np.abs(path.values[:, 0] - sinh_solution(path.grid))) <= 1e-8


def test_bvp_agrees_with_direct_minimizer_on_double_well():
    # two independent routes to the same transition path; the shot path
    # needs dense slope seeding because most slopes blow up in this field
    shot = solve_el_bvp(euler_lagrange_rhs_example1, -2.0, 2.0, 400, n_seeds=64)
    res = minimize_om(
        DOUBLE_WELL,
        np.array([-2.0]),
        np.array([2.0]),
        OptimizerConfig(steps=400, gradient_tolerance=1e-6),
    )
    om_shot = om_functional(DOUBLE_WELL, shot).total
    assert abs(om_shot - res.om.total) <= 1e-2


def test_bvp_failure_suggests_relaxation_and_relaxation_recovers():
    with pytest.raises(NoConvergence) as err:
        # every seeded slope blows up before reaching t = 1
        solve_el_bvp(
            euler_lagrange_rhs_example1, -2.0, 2.0, 100,
            slope_bracket=(10.0, 20.0), n_seeds=4,
        )
    assert "relax" in str(err.value).lower()
    path = solve_el_relaxation(lambda t, y, ydot: y, 0.0, 1.0, 400)
    assert np.max(np.abs(path.values[:, 0] - sinh_solution(path.grid))) <= 5e-6


def test_bvp_rejects_degenerate_grid():
    with pytest.raises(ContractViolation):
        solve_el_bvp(lambda t, y, ydot: y, 0.0, 1.0, 1)


def test_residual_small_on_analytic_solution():
    grid = uniform_grid(400)
    path = DiscretePath(grid=grid, values=sinh_solution(grid)[:, None])
    assert euler_lagrange_residual(LINEAR, path) < 1e-4


def test_residual_large_on_non_extremal_path():
    path = linear_path(np.array([-2.0]), np.array([2.0]), 200)
    assert euler_lagrange_residual(DOUBLE_WELL, path) > 1e-1


def test_residual_zero_on_flat_landscape():
    m = builtin_model("zero_drift", {"n": 1})
    path = linear_path(np.array([0.4]), np.array([0.4]), 64)
    assert euler_lagrange_residual(m, path) == pytest.approx(0.0, abs=1e-12)


def test_accepted_values_never_increase():
    res = minimize_om(DOUBLE_WELL, np.array([-2.0]), np.array([2.0]),
                      OptimizerConfig(steps=100, gradient_tolerance=1e-6))
    assert np.all(np.diff(res.values) <= 0.0)


def test_endpoints_pinned_bit_exact():
    x0, x1 = np.array([-2.0]), np.array([2.0])
    for method in ("cg", "gd"):
        res = minimize_om(
            DOUBLE_WELL, x0, x1,
            OptimizerConfig(steps=64, gradient_tolerance=1e-4, method=method),
        )
        assert res.path.values[0, 0] == x0[0]
        assert res.path.values[-1, 0] == x1[0]


def test_budget_exhaustion_reports_not_converged():
    res = minimize_om(DOUBLE_WELL, np.array([-2.0]), np.array([2.0]),
                      OptimizerConfig(steps=64, max_iters=3))
    assert not res.converged
    assert res.iterations == 3
    assert np.isfinite(res.grad_max)
    assert res.grad_max > 1e-8


def test_converged_flag_means_tolerance_met():
    cfg = OptimizerConfig(steps=100, gradient_tolerance=1e-6)
    res = minimize_om(LINEAR, np.zeros(1), np.ones(1), cfg)
    assert res.converged
    assert res.grad_max <= cfg.gradient_tolerance
    grad = om_path_gradient(LINEAR, res.path)
    assert np.max(np.abs(grad)) <= cfg.gradient_tolerance


def test_gradient_descent_method_also_converges():
    res = minimize_om(LINEAR, np.zeros(1), np.ones(1),
                      OptimizerConfig(steps=64, gradient_tolerance=1e-6, method="gd"))
    assert res.converged
    assert res.method == "gd"
    err = np.max(np.abs(res.path.values[:, 0] - sinh_solution(res.path.grid)))
    assert err <= 1e-3


def test_config_validation():
    with pytest.raises(ContractViolation):
        OptimizerConfig(steps=7)
    with pytest.raises(ContractViolation):
        OptimizerConfig(gradient_tolerance=0.0)
    with pytest.raises(ContractViolation):
        OptimizerConfig(method="newton")
    with pytest.raises(ContractViolation):
        OptimizerConfig(max_iters=0)


def test_user_supplied_initial_path():
    grid = uniform_grid(100)
    bumped = grid + 0.4 * np.sin(np.pi * grid)
    start = DiscretePath(grid=grid, values=bumped[:, None])
    res = minimize_om(LINEAR, np.zeros(1), np.ones(1),
                      OptimizerConfig(steps=100, initial_path=start))
    assert res.converged
    err = np.max(np.abs(res.path.values[:, 0] - sinh_solution(grid)))
    assert err <= 1e-3


def test_two_species_symmetry_under_diffusion_swap():
    # with equal scales the drift is exchange symmetric, so swapping the
    # two diffusion entries must swap the minimizer's coordinates
    base = builtin_model("example2", {"a": 1.0, "b": 1.0})

    def swapped_diffusion(t):
        g = base.diffusion(t)
        return np.array([[g[1, 1], 0.0], [0.0, g[0, 0]]])

    swapped = SdeModel(
        dimension=2,
        drift=base.drift,
        diffusion=swapped_diffusion,
        drift_jacobian=base.drift_jacobian,
    )
    x0, x1 = np.array([-2.0, -2.0]), np.array([2.0, 2.0])
    cfg = OptimizerConfig(steps=64, gradient_tolerance=1e-6)
    res_a = minimize_om(base, x0, x1, cfg)
    res_b = minimize_om(swapped, x0, x1, cfg)
    assert res_a.converged and res_b.converged
    # the two coordinates see different noise scales and split apart
    assert np.max(np.abs(res_a.path.values[:, 0] - res_a.path.values[:, 1])) > 0.1
    assert np.max(np.abs(res_b.path.values - res_a.path.values[:, ::-1])) <= 1e-5
    assert res_b.om.total == pytest.approx(res_a.om.total, abs=1e-9)
