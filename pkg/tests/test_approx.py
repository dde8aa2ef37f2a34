from dataclasses import replace

import numpy as np
import pytest

from src.approx import engine
from src.approx.basis import ConditioningError, arnoldi_axis, fit_polynomial, fit_tensor
from src.approx.engine import (
    ApproximationFailureError, PolynomialApproximator, TargetDomainError, approximate_on_product,
    certify
)
from src.core.compacta import ClosedDisc, ProductCompact
from src.core.series import PolyWZ, TargetFunction
from src.core.targets import cauchy_target, exp_sum_target, polynomial_target, reciprocal_target, zero_target


@pytest.fixture
def unit_circle_grid():
    return ProductCompact((ClosedDisc(0, 1),)).boundary_grid(64)


@pytest.fixture
def no_params():
    return ProductCompact()


def unit_disc(dimension=1):
    return ProductCompact((ClosedDisc(0, 1),) * dimension)


def test_arnoldi_basis_is_orthonormal_and_tracks_monomials():
    x = ClosedDisc(2, 1).boundary_samples(40)
    basis = arnoldi_axis(x, 8)
    assert basis.orthogonality_residual < 1e-12
    vandermonde = x[:, None] ** np.arange(9)[None, :]
    assert np.allclose(vandermonde @ basis.P, basis.Q, rtol=0, atol=1e-9)


def test_arnoldi_rejects_unsupported_degrees():
    with pytest.raises(ConditioningError) as e:
        arnoldi_axis(ClosedDisc(0, 1).boundary_samples(5), 8)
    assert e.value.degree == 8
    with pytest.raises(ConditioningError):
        arnoldi_axis(np.ones(8), 2)


def test_fit_recovers_a_cubic(unit_circle_grid):
    coefficients = [1, -2j, 0.5, 3]
    values = np.polynomial.polynomial.polyval(unit_circle_grid.axes[0], coefficients)
    fitted = fit_polynomial(unit_circle_grid, values, [3])
    for m, c in enumerate(coefficients):
        assert abs(fitted.terms[(m,)].coefficient(()) - c) < 1e-12


def test_fit_of_exp_gives_taylor_coefficients():
    grid = ProductCompact((ClosedDisc(0, 1),)).boundary_grid(256)
    fitted = fit_polynomial(grid, np.exp(grid.axes[0]), [10])
    factorial = 1.0
    for m in range(11):
        factorial *= max(m, 1)
        assert abs(fitted.terms[(m,)].coefficient(()) - 1 / factorial) < 1e-8


def test_truncated_geometric_series_error(no_params):
    T = unit_disc()
    grid = T.boundary_grid(64)
    target = TargetFunction(0, 1, lambda W, Z: 1.0 / (Z[:, 0] - 2))
    fitted = fit_polynomial(grid, target.evaluate_grid(grid), [20])
    error = certify(fitted, no_params, T, target, multiplier=3, per_factor=(256,))
    assert 2.0 ** -21 / 4 <= error <= 2.0 ** -21 + 1e-9


def test_fitted_error_shrinks_with_degree(unit_circle_grid):
    values = 1.0 / (unit_circle_grid.axes[0] - 2)
    low = fit_tensor(unit_circle_grid, values, [5])
    high = fit_tensor(unit_circle_grid, values, [10])
    assert high.fitted_error <= low.fitted_error
    assert not high.condition_flag


def test_zero_target_needs_no_fit(no_params):
    result = approximate_on_product(no_params, unit_disc(2), zero_target(0, 2), 1e-6)
    assert result.polynomial.is_zero()
    assert result.certified_error == 0.0
    assert len(result.rounds) == 1


def test_polynomial_targets_are_reproduced(no_params):
    q = PolyWZ.from_joint_terms(0, 1, {(0,): 1, (1,): 2, (2,): -0.5})
    result = approximate_on_product(no_params, unit_disc(), polynomial_target(q), 1e-10)
    assert result.certified_error < 1e-10
    assert result.polynomial.coefficient_distance(q) < 1e-9

    p = PolyWZ.from_joint_terms(1, 1, {(0, 0): 3, (1, 1): 1})
    F, T = unit_disc(), ProductCompact((ClosedDisc(2, 1),))
    result = approximate_on_product(F, T, polynomial_target(p), 1e-10)
    assert result.certified_error < 1e-10
    assert result.polynomial.coefficient_distance(p) < 1e-9


def test_two_variable_exponential(no_params):
    result = approximate_on_product(no_params, unit_disc(2), exp_sum_target(0, 2), 1e-6)
    assert result.certified_error < 1e-6
    assert max(result.degree_used) <= 14
    assert result.rounds[0]['fitted_error'] is None


def test_cauchy_kernel_with_a_parameter():
    F, T = unit_disc(), ProductCompact((ClosedDisc(3, 1),))
    result = approximate_on_product(F, T, cauchy_target(1, 1, 0, 0), 1e-3)
    assert result.certified_error < 1e-3
    assert result.polynomial.n_params == 1
    assert len(result.degree_used) == 2


def test_budget_exhaustion_reports_best_error(no_params):
    conjugate = TargetFunction(0, 1, lambda W, Z: np.conj(Z[:, 0]), name="conj")
    with pytest.raises(ApproximationFailureError) as e:
        PolynomialApproximator({'max_basis': 30}).approximate(no_params, unit_disc(), conjugate, 1e-3)
    assert e.value.best_certified_error == pytest.approx(1.0, abs=1e-6)
    assert len(e.value.rounds) > 1


def test_undefined_targets_are_rejected(no_params):
    broken = TargetFunction(0, 1, lambda W, Z: np.full(len(Z), np.nan), name="nan")
    with pytest.raises(TargetDomainError):
        approximate_on_product(no_params, unit_disc(), broken, 1e-3)
    guarded = TargetFunction(0, 1, lambda W, Z: Z[:, 0], guard=lambda W, Z: np.zeros(len(Z), dtype=bool))
    with pytest.raises(TargetDomainError):
        approximate_on_product(no_params, unit_disc(), guarded, 1e-3)


def test_certify_examples(no_params):
    T = unit_disc()
    one = PolyWZ.from_joint_terms(0, 1, {(0,): 1})
    assert certify(one, no_params, T, polynomial_target(one)) <= 1e-13
    assert certify(PolyWZ.zero(0, 1), no_params, T, polynomial_target(one)) == pytest.approx(1.0)


def test_sample_counts_follow_the_degree():
    approximator = PolynomialApproximator({'min_samples': 16, 'samples_per_degree': 3})
    assert approximator.samples_for([2, 10]) == (16, 30)
    assert PolynomialApproximator({'max_basis': None}).config['max_basis'] > 0


def test_collapsed_monomial_form_stops_escalation(no_params, mocker):
    approximator = PolynomialApproximator()
    mocker.patch.object(approximator, '_certify', return_value=1e6)
    with pytest.raises(ApproximationFailureError) as e:
        approximator.approximate(no_params, unit_disc(), exp_sum_target(0, 1), 1e-6)
    assert "lost accuracy" in str(e.value)
    assert len(e.value.rounds) == 2


def test_ill_conditioned_rounds_without_progress_stop_escalation(no_params, mocker):
    fit = engine.fit_tensor
    mocker.patch(
        'src.approx.engine.fit_tensor',
        side_effect=lambda *args, **kwargs: replace(fit(*args, **kwargs), condition_flag=True)
    )
    approximator = PolynomialApproximator()
    mocker.patch.object(approximator, '_certify', return_value=1.0)
    conjugate = TargetFunction(0, 1, lambda W, Z: np.conj(Z[:, 0]), name="conj")
    with pytest.raises(ApproximationFailureError) as e:
        approximator.approximate(no_params, unit_disc(), conjugate, 1e-3)
    assert "no improvement" in str(e.value)
    assert len(e.value.rounds) == 1 + 1 + approximator.config['stall_rounds']


def test_prune_handles_huge_monomial_bounds(no_params):
    coefficients = np.zeros(400, dtype=complex)
    coefficients[0] = 1.0
    coefficients[399] = 1e-300
    T = ProductCompact((ClosedDisc(10, 1),))
    with np.errstate(over="raise", invalid="raise"):
        pruned = PolynomialApproximator()._prune(coefficients, T, 0, 1e-3)
    assert pruned.degrees() == (399,)


@pytest.mark.parametrize("F, T, target, tol", [
    (ProductCompact(), ProductCompact((ClosedDisc(2, 1),)), reciprocal_target(0, 1, 0), 1e-6),
    (ProductCompact(), unit_disc(2), exp_sum_target(0, 2), 1e-4),
    (unit_disc(), ProductCompact((ClosedDisc(3, 1),)), cauchy_target(1, 1, 0, 0), 1e-3),
])
def test_certified_error_is_stable_under_refinement(F, T, target, tol):
    approximator = PolynomialApproximator()
    result = approximator.approximate(F, T, target, tol)
    denser = approximator.certify(result.polynomial, F, T, target, multiplier=6, per_factor=result.grid_density)
    assert result.certified_error <= 1.5 * denser
