# hyperqma/tests/test_flat_solver.py

from dataclasses import replace

import numpy as np
import pytest
import yaml

from hyperqma.core import flat_solver
from hyperqma.core.flat_solver import (
    FlatSolver,
    ScalarField,
    SolverOptions,
    TorusGrid,
    comparison_on_solution,
    complex_hessian_from_real,
    forward_mismatch,
    forward_residual,
    hessian_perturbation,
    l1_check,
    load_field,
    qma_determinant_identity,
    quaternionic_hessian_field,
    save_result,
    solve,
    solve_continuation,
)
from hyperqma.core.qma_operators import laplacian_operator, qma_operator
from hyperqma.exceptions import ConeError, SolverDivergence

TWO_PI = 2 * np.pi

# --- Fixtures ---


@pytest.fixture(scope="module")
def grid8():
    return TorusGrid(1, 8)


@pytest.fixture(scope="module")
def cosine8(grid8):
    return ScalarField.from_function(grid8, lambda *x: 0.1 * np.cos(TWO_PI * x[0]))


@pytest.fixture(scope="module")
def cosine_result(cosine8):
    return solve(qma_operator(1), cosine8)


def cosine_field(N: int, amplitude: float = 0.1) -> ScalarField:
    return ScalarField.from_function(TorusGrid(1, N), lambda *x: amplitude * np.cos(TWO_PI * x[0]))


# --- Grid and fields ---


@pytest.mark.parametrize("N", [6, 7, 9])
def test_grid_requires_even_size_of_at_least_eight(N):
    with pytest.raises(ValueError, match="even and at least 8"):
        TorusGrid(1, N)


def test_grid_shape(grid8):
    assert grid8.dim == 4
    assert grid8.shape == (8, 8, 8, 8)
    assert grid8.size == 4096
    assert grid8.spacing == 0.125
    assert TorusGrid(1, 8) == grid8


def test_field_rejects_non_finite_values(grid8):
    values = np.zeros(grid8.shape)
    values[0, 0, 0, 0] = np.nan
    with pytest.raises(ValueError, match="finite"):
        ScalarField(grid8, values)


def test_field_statistics(grid8):
    phi = ScalarField.from_function(grid8, lambda *x: np.cos(TWO_PI * x[1]))
    assert phi.mean == pytest.approx(0.0, abs=1e-15)
    assert phi.sup == pytest.approx(1.0)
    assert phi.inf == pytest.approx(-1.0)
    assert phi.l1_norm == pytest.approx((2 + 2 * np.sqrt(2)) / 8, abs=1e-15)


@pytest.mark.parametrize("axis", [0, 2, 3])
def test_spectral_second_derivative_of_cosine(grid8, axis):
    phi = ScalarField.from_function(grid8, lambda *x: 0.1 * np.cos(TWO_PI * x[axis]))
    exact = -(TWO_PI**2) * phi.values
    assert np.allclose(grid8.second_derivative(phi.values, axis, axis), exact, atol=1e-12)


def test_spectral_mixed_derivative(grid8):
    phi = ScalarField.from_function(grid8, lambda *x: np.sin(TWO_PI * x[0]) * np.sin(TWO_PI * x[1]))
    exact = ScalarField.from_function(grid8, lambda *x: TWO_PI**2 * np.cos(TWO_PI * x[0]) * np.cos(TWO_PI * x[1]))
    assert np.allclose(grid8.second_derivative(phi.values, 0, 1), exact.values, atol=1e-11)


def test_complex_hessian_of_cosine(grid8, cosine8):
    A = grid8.complex_hessian(cosine8.values)
    assert A.shape == (4096, 2, 2)
    expected = 0.25 * -(TWO_PI**2) * cosine8.values.ravel()
    assert np.allclose(A[:, 0, 0].real, expected, atol=1e-12)
    assert np.allclose(A[:, 1, 1], 0.0, atol=1e-12)


def test_complex_hessian_from_real_identity():
    A = complex_hessian_from_real(np.eye(4))
    assert np.allclose(A, 0.5 * np.eye(2))


def test_quadratic_patch_eigenvalues_pair():
    frame = TorusGrid(2, 8).frame
    c = np.array([0.5, 2.0])
    R = np.diag(np.repeat(c, 4))
    lam = np.sort(np.linalg.eigvalsh(hessian_perturbation(R, frame)))
    assert np.allclose(lam, [0.5, 0.5, 2.0, 2.0], atol=1e-14)


def test_quaternionic_hessian_field_of_zero(grid8):
    field = quaternionic_hessian_field(ScalarField.constant(grid8))
    assert np.allclose(field.metric(), np.eye(2))
    assert field.at(0).n == 1


def test_solver_metric_is_the_hessian_field_metric(cosine8, mocker):
    solver = FlatSolver(qma_operator(1), cosine8.grid)
    spy = mocker.spy(flat_solver, "quaternionic_hessian_field")
    metric = solver.metric(cosine8.values)
    assert spy.call_count == 1
    assert np.allclose(metric, quaternionic_hessian_field(cosine8).metric())


def test_state_rejects_non_finite_potentials(grid8):
    solver = FlatSolver(qma_operator(1), grid8)
    values = np.zeros(grid8.size)
    values[3] = np.nan
    assert solver.state(values) is None


def test_inverse_laplacian_of_cosine(grid8, cosine8):
    u = grid8.inverse_laplacian(cosine8.values)
    assert np.allclose(u, -cosine8.values / TWO_PI**2, atol=1e-14)


# --- Solver ---


def test_zero_right_hand_side_is_solved_without_iterations(grid8):
    result = solve(qma_operator(1), ScalarField.constant(grid8))
    assert result.newton_iters == 0
    assert result.b == 0.0
    assert result.neg_inf_phi == 0.0
    assert np.allclose(result.eigenvalues, 1.0)


def test_cosine_solve_converges(cosine_result):
    assert cosine_result.residual_inf <= 1e-8
    assert cosine_result.newton_iters <= 30
    assert cosine_result.history[-1] == cosine_result.residual_inf
    assert cosine_result.phi.sup == 0.0
    assert cosine_result.neg_inf_phi > 0
    assert cosine_result.min_eig_margin > 0
    assert np.all(cosine_result.eigenvalues > 0)
    assert cosine_result.pairing_gap < 1e-8


def test_cosine_solution_checks(cosine_result):
    assert forward_residual(cosine_result) <= 1e-8
    assert forward_mismatch(cosine_result) <= 1e-7
    l1 = l1_check(cosine_result)
    assert l1.passed
    assert l1.l1_norm > 0
    assert comparison_on_solution(cosine_result).passed
    assert qma_determinant_identity(cosine_result) <= 1e-7


def test_solution_is_even_in_the_cosine_axis(cosine_result):
    values = cosine_result.phi.values
    mirrored = np.roll(values[::-1], 1, axis=0)
    assert np.allclose(values, mirrored, atol=1e-7)


def test_laplacian_operator_solves(cosine8):
    result = solve(laplacian_operator(1), cosine8)
    assert result.residual_inf <= 1e-8
    assert forward_mismatch(result) <= 1e-7
    with pytest.raises(ValueError, match="quaternionic Monge-Ampère"):
        qma_determinant_identity(result)


def test_solver_rejects_grid_mismatch(cosine8):
    with pytest.raises(ValueError, match="dimension"):
        FlatSolver(qma_operator(2), cosine8.grid)
    with pytest.raises(ValueError, match="lives on"):
        FlatSolver(qma_operator(1), TorusGrid(1, 10)).solve(cosine8)


def test_dynamic_range_guard(grid8):
    F = ScalarField.from_function(grid8, lambda *x: 8.0 * np.cos(TWO_PI * x[0]))
    with pytest.raises(ValueError, match="dynamic range"):
        solve(qma_operator(1), F)


def test_dynamic_range_guard_can_be_forced(grid8, mocker):
    solver = FlatSolver(qma_operator(1), grid8, SolverOptions(force=True))
    warning = mocker.patch.object(solver.logger, "warning")
    solver._check_dynamic_range(np.array([-8.0, 8.0]))
    warning.assert_called_once()


def test_inadmissible_initial_guess(cosine8):
    start = ScalarField.from_function(cosine8.grid, lambda *x: -np.cos(TWO_PI * x[0]))
    with pytest.raises(ConeError, match="initial potential"):
        solve(qma_operator(1), cosine8, SolverOptions(initial_phi=start.values))


def test_iteration_cap_raises_divergence(cosine8):
    with pytest.raises(SolverDivergence) as excinfo:
        solve(qma_operator(1), cosine8, SolverOptions(max_iter=0))
    assert excinfo.value.iterations == 0
    assert excinfo.value.residual > 1e-8


def test_solve_from_converged_guess(cosine8, cosine_result):
    again = solve(qma_operator(1), cosine8, SolverOptions(initial_phi=cosine_result.phi.values))
    assert again.newton_iters <= 1
    assert np.allclose(again.phi.values, cosine_result.phi.values, atol=1e-8)


def test_continuation_matches_direct_solve(cosine8, cosine_result):
    path = solve_continuation(qma_operator(1), cosine8, [0.0, 0.25, 0.5, 1.0])
    assert len(path) == 4
    assert path[0].neg_inf_phi == 0.0
    assert np.allclose(path[-1].phi.values, cosine_result.phi.values, atol=1e-7)
    depths = [r.neg_inf_phi for r in path]
    assert depths == sorted(depths)
    short = np.abs(path[2].phi.values - path[1].phi.values).max()
    long = np.abs(path[3].phi.values - path[2].phi.values).max()
    assert short < long


def test_solver_options_from_config():
    opts = SolverOptions.from_dict({"tol": 1e-9, "max_iter": 12, "force": True, "family": "cosine"})
    assert (opts.tol, opts.max_iter, opts.force) == (1e-9, 12, True)
    assert replace(opts, tol=1e-6).max_iter == 12


# --- Raw file output ---


def test_save_and_load_round_trip(cosine_result, tmp_path):
    path = save_result(cosine_result, tmp_path / "phi.grid")
    loaded = load_field(path)
    assert loaded.grid == cosine_result.grid
    assert np.array_equal(loaded.values, cosine_result.phi.values)

    meta = yaml.safe_load((tmp_path / "phi.grid.meta.yaml").read_text())
    assert meta["n"] == 1 and meta["N"] == 8
    assert meta["operator"] == "qma"
    assert meta["b"] == cosine_result.b
    assert meta["neg_inf_phi"] == cosine_result.neg_inf_phi


def test_raw_grid_layout(cosine_result, tmp_path):
    path = save_result(cosine_result, tmp_path / "phi.grid")
    raw = path.read_bytes()
    header = np.frombuffer(raw[:24], dtype="<i8")
    assert header.tolist() == [1, 8, 4]
    assert len(raw) == 24 + 8 * 4096


# --- Acceptance runs ---


@pytest.mark.slow
def test_cosine_solve_at_sixteen_points():
    result = solve(qma_operator(1), cosine_field(16))
    assert result.residual_inf <= 1e-8
    assert result.newton_iters <= 30
    assert forward_mismatch(result) <= 1e-7
    assert result.phi.sup == 0.0
    assert np.all(qma_operator(1).contains(result.eigenvalues))
    assert result.pairing_gap < 1e-8


@pytest.mark.slow
def test_depth_is_stable_under_grid_refinement():
    coarse = solve(qma_operator(1), cosine_field(16))
    fine = solve(qma_operator(1), cosine_field(32))
    assert abs(fine.neg_inf_phi - coarse.neg_inf_phi) < 0.01 * coarse.neg_inf_phi
