"""
Adaptive polynomial approximation on products of planar compacta, with
certification on independent boundary grids.
"""
from dataclasses import dataclass, field
from math import ceil
from typing import Any, Dict, List, Optional, Sequence, Tuple
import logging

import numpy as np

from config.settings import settings
from src.core.compacta import ProductCompact, SampleGrid, refined_sup_modulus
from src.core.series import PolyWZ, TargetFunction
from .basis import ApproximationError, ConditioningError, fit_tensor

logger = logging.getLogger(__name__)


@dataclass
class PolyApproxResult:
    """
    Outcome of one approximation request.

    Attributes:
        polynomial (PolyWZ): The fitted (and pruned) polynomial
        fitted_error (float): sup |target - poly| on the fitting grid
        certified_error (float): sup |target - poly| on the certification grid
        degree_used (Tuple[int, ...]): Per-variable degree bounds, w first
        condition_flag (bool): Some axis basis lost orthogonality
        grid_density (Tuple[int, ...]): Per-factor fitting sample counts
        rounds (List[Dict]): One entry per escalation round
    """
    polynomial: PolyWZ
    fitted_error: float
    certified_error: float
    degree_used: Tuple[int, ...]
    condition_flag: bool = False
    grid_density: Tuple[int, ...] = ()
    rounds: List[Dict[str, Any]] = field(default_factory=list)


class PolynomialApproximator:
    """
    Fits targets on F x T by least squares over an orthogonalized tensor
    basis, raising the degree of the variable with the largest top-degree
    energy until the certified error drops below the tolerance.
    """

    def __init__(self, config: Optional[Dict] = None):
        """
        Initialize the approximator.

        Args:
            config: Configuration dictionary
                - initial_degree: Starting degree of every variable
                - degree_growth: Factor applied to the escalated degree
                - max_basis: Largest admissible number of basis monomials
                - samples_per_degree: Fitting samples per degree and factor
                - min_samples: Minimum fitting samples per factor
                - certify_multiplier: Certification density over fitting density
                - max_points: Grid size cap
                - prune_fraction: Share of the tolerance spent on dropped terms
                - collapse_ratio: Certified over fitted error that marks a collapsed monomial form
                - stall_rounds: Rounds without improvement tolerated once the basis is ill conditioned
        """
        self.config = {
            'initial_degree': settings.INITIAL_DEGREE,
            'degree_growth': settings.DEGREE_GROWTH,
            'max_basis': settings.BASIS_BUDGET,
            'samples_per_degree': settings.SAMPLES_PER_DEGREE,
            'min_samples': settings.MIN_SAMPLES_PER_FACTOR,
            'certify_multiplier': settings.CERTIFY_MULTIPLIER,
            'max_points': settings.MAX_GRID_POINTS,
            'prune_fraction': settings.PRUNE_FRACTION,
            'collapse_ratio': settings.COLLAPSE_RATIO,
            'stall_rounds': settings.STALL_ROUNDS
        }
        if config:
            self.config.update({k: v for k, v in config.items() if v is not None})
        self.logger = logging.getLogger(__name__)

    def samples_for(self, degrees: Sequence[int]) -> Tuple[int, ...]:
        """Fitting samples per factor for the given degree bounds."""
        return tuple(
            max(self.config['min_samples'], self.config['samples_per_degree'] * d, d + 1)
            for d in degrees
        )

    def approximate(
            self,
            F: ProductCompact,
            T: ProductCompact,
            target: TargetFunction,
            tol: float
    ) -> PolyApproxResult:
        """
        Find a polynomial p(w, z) with certified sup |target - p| < tol on F x T.

        Args:
            F: Parameter compact (may have no factors)
            T: Variable compact
            target: Function to approximate
            tol: Required certified error

        Returns:
            PolyApproxResult: The first result passing certification

        Raises:
            TargetDomainError: If the target is undefined at a sample point
            ApproximationFailureError: If the degree budget runs out first
        """
        if tol <= 0:
            raise ApproximationError(f"Tolerance must be positive, got {tol}")
        joint = ProductCompact.join(F, T)
        n_params = F.dimension
        degrees = [self.config['initial_degree']] * joint.dimension
        rounds: List[Dict[str, Any]] = []

        zero = PolyWZ.zero(n_params, T.dimension)
        density = self.samples_for(degrees)
        zero_error = self._certify(zero, joint, n_params, target, density)
        rounds.append({'degrees': [0] * joint.dimension, 'fitted_error': None, 'certified_error': zero_error})
        if zero_error < tol:
            self.logger.debug("Zero polynomial certified at %.3e", zero_error)
            return PolyApproxResult(
                polynomial=zero,
                fitted_error=zero_error,
                certified_error=zero_error,
                degree_used=(0,) * joint.dimension,
                grid_density=density,
                rounds=rounds
            )

        best: Optional[PolyApproxResult] = None
        stalled = 0
        stop_reason = ""
        while True:
            basis_size = int(np.prod([d + 1 for d in degrees]))
            density = self.samples_for(degrees)
            fit_points = int(np.prod(density))
            certify_points = fit_points * self.config['certify_multiplier'] ** len(density)
            if basis_size > self.config['max_basis'] or certify_points > self.config['max_points']:
                stop_reason = f"degree budget exhausted at degrees {degrees}"
                break

            grid = joint.boundary_grid(density, n_params=n_params, max_points=self.config['max_points'])
            values = self._sample_target(target, grid)
            try:
                fit = fit_tensor(grid, values, degrees)
            except ConditioningError as e:
                stop_reason = str(e)
                self.logger.warning("Stopping escalation: %s", e)
                break

            polynomial = self._prune(fit.monomial_coefficients, joint, n_params, tol)
            certified = self._certify(polynomial, joint, n_params, target, density)
            result = PolyApproxResult(
                polynomial=polynomial,
                fitted_error=fit.fitted_error,
                certified_error=certified,
                degree_used=tuple(degrees),
                condition_flag=fit.condition_flag,
                grid_density=density,
                rounds=rounds
            )
            rounds.append({
                'degrees': list(degrees),
                'fitted_error': fit.fitted_error,
                'certified_error': certified,
                'marginal_residuals': list(fit.marginal_residuals)
            })
            self.logger.debug(
                "Degrees %s: fitted %.3e, certified %.3e, marginal %s",
                degrees, fit.fitted_error, certified, fit.marginal_residuals
            )
            if certified < tol:
                return result
            if best is None or certified < best.certified_error:
                best = result
                stalled = 0
            else:
                stalled += 1

            if certified > self.config['collapse_ratio'] * max(fit.fitted_error, tol):
                stop_reason = (
                    f"monomial form lost accuracy at degrees {degrees} "
                    f"(certified {certified:.3e}, fitted {fit.fitted_error:.3e})"
                )
                self.logger.warning("Stopping escalation: %s", stop_reason)
                break
            if fit.condition_flag and stalled >= self.config['stall_rounds']:
                stop_reason = f"no improvement in {stalled} ill-conditioned rounds at degrees {degrees}"
                self.logger.warning("Stopping escalation: %s", stop_reason)
                break

            v = int(np.argmax(fit.marginal_residuals))
            degrees[v] = int(ceil(degrees[v] * self.config['degree_growth']))

        best_error = best.certified_error if best else zero_error
        raise ApproximationFailureError(
            f"Escalation stopped, {stop_reason}; best certified error {best_error:.3e} "
            f"against tolerance {tol:.3e}",
            best_certified_error=best_error,
            rounds=rounds
        )

    def certify(
            self,
            polynomial: PolyWZ,
            F: ProductCompact,
            T: ProductCompact,
            target: TargetFunction,
            multiplier: Optional[int] = None,
            per_factor: Optional[Sequence[int]] = None
    ) -> float:
        """
        sup |target - polynomial| over a grid at `multiplier` times the fitting
        density, rotated half a step so that no fitting point is reused.
        """
        joint = ProductCompact.join(F, T)
        density = tuple(per_factor) if per_factor is not None else self.samples_for(polynomial.degrees())
        return self._certify(polynomial, joint, F.dimension, target, density, multiplier)

    def _certify(
            self,
            polynomial: PolyWZ,
            joint: ProductCompact,
            n_params: int,
            target: TargetFunction,
            density: Sequence[int],
            multiplier: Optional[int] = None
    ) -> float:
        multiplier = multiplier or self.config['certify_multiplier']
        grid = joint.boundary_grid(
            [multiplier * c for c in density],
            offset=0.5,
            n_params=n_params,
            max_points=self.config['max_points']
        )
        values = self._sample_target(target, grid)
        return float(np.max(np.abs(values - polynomial.evaluate_grid(grid))))

    @staticmethod
    def _sample_target(target: TargetFunction, grid: SampleGrid) -> np.ndarray:
        inside = target.check_domain(grid.w_points, grid.z_points)
        if not np.all(inside):
            bad = grid.points[~inside][0]
            raise TargetDomainError(
                f"Target {target.name} is not holomorphic at sample point {tuple(bad)}"
            )
        values = target.evaluate_grid(grid)
        if not np.all(np.isfinite(values)):
            raise TargetDomainError(f"Target {target.name} produced non-finite values")
        return values

    def _prune(self, coefficients: np.ndarray, joint: ProductCompact, n_params: int, tol: float) -> PolyWZ:
        """Drop the terms with the smallest sup bounds while their total stays below the budget."""
        coefficients = np.array(coefficients, dtype=complex)
        sups = [refined_sup_modulus(f, settings.MIN_BOUNDARY_SAMPLES) for f in joint.factors]
        with np.errstate(divide="ignore", over="ignore"):
            log_bound = np.log(np.abs(coefficients))
            for axis, sup in enumerate(sups):
                shape = [1] * coefficients.ndim
                shape[axis] = coefficients.shape[axis]
                powers = np.arange(coefficients.shape[axis], dtype=float)
                # log of sup**k, with 0**0 = 1
                log_power = powers * np.log(sup) if sup > 0 else np.where(powers == 0, 0.0, -np.inf)
                log_bound = log_bound + log_power.reshape(shape)
            flat = np.exp(log_bound).ravel()

        order = np.argsort(flat, kind="stable")
        dropped = order[np.cumsum(flat[order]) < self.config['prune_fraction'] * tol]
        pruned = coefficients.ravel()
        pruned[dropped] = 0.0
        return PolyWZ.from_tensor(pruned.reshape(coefficients.shape), n_params)


def approximate_on_product(
        F: ProductCompact,
        T: ProductCompact,
        target: TargetFunction,
        tol: float,
        config: Optional[Dict] = None
) -> PolyApproxResult:
    return PolynomialApproximator(config).approximate(F, T, target, tol)


def certify(
        poly: PolyWZ,
        F: ProductCompact,
        T: ProductCompact,
        target: TargetFunction,
        multiplier: Optional[int] = None,
        per_factor: Optional[Sequence[int]] = None
) -> float:
    return PolynomialApproximator().certify(poly, F, T, target, multiplier, per_factor)


class ApproximationFailureError(ApproximationError):
    """Raised when the degree budget is exhausted before certification passes"""

    def __init__(self, message: str, best_certified_error: float, rounds: List[Dict[str, Any]]):
        super().__init__(message)
        self.best_certified_error = best_certified_error
        self.rounds = rounds


class TargetDomainError(ApproximationError):
    """Raised when the target is not holomorphic or not finite at a sample point"""
    pass
