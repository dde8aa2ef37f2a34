"""
Orthogonalized polynomial bases on product grids.

Each axis gets a Vandermonde-with-Arnoldi basis: the columns q_0..q_D are
orthonormal for the discrete inner product <f, g> = mean(conj(f) g) over the
axis samples. The tensor product of the axis bases is then orthonormal on the
whole product grid, so the least-squares fit is an axis-by-axis projection.
Monomial coefficients of every q_k are carried through the Arnoldi
recurrence so fits can be handed back as ordinary polynomials.
"""
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple
import logging

import numpy as np

from config.settings import settings
from src.core.compacta import SampleGrid
from src.core.series import PolyWZ

logger = logging.getLogger(__name__)


@dataclass
class AxisBasis:
    """
    Attributes:
        points (np.ndarray): Axis samples, shape (n,)
        degree (int): Highest degree D
        Q (np.ndarray): Basis values, shape (n, D + 1)
        H (np.ndarray): Hessenberg recurrence matrix, shape (D + 1, D)
        P (np.ndarray): Monomial coefficients, P[m, k] = coefficient of x^m in q_k
        orthogonality_residual (float): max |Q^H Q / n - I|
    """
    points: np.ndarray
    degree: int
    Q: np.ndarray
    H: np.ndarray
    P: np.ndarray
    orthogonality_residual: float


@dataclass
class TensorFit:
    """Least-squares fit over a product grid."""
    degrees: Tuple[int, ...]
    orthogonal_coefficients: np.ndarray
    monomial_coefficients: np.ndarray
    fitted_values: np.ndarray
    fitted_error: float
    marginal_residuals: Tuple[float, ...]
    condition_flag: bool

    def polynomial(self, n_params: int) -> PolyWZ:
        return PolyWZ.from_tensor(self.monomial_coefficients, n_params)


def arnoldi_axis(
        points: np.ndarray,
        degree: int,
        reorthogonalize_ratio: Optional[float] = None,
        rank_tolerance: Optional[float] = None
) -> AxisBasis:
    """
    Run Vandermonde with Arnoldi on one axis.

    Args:
        points: Sample points of the axis
        degree: Highest polynomial degree
        reorthogonalize_ratio: Repeat the projection when the new column
            keeps less than this fraction of its norm
        rank_tolerance: Relative size below which a new column counts as
            linearly dependent

    Returns:
        AxisBasis: Orthonormal basis with its monomial coefficients

    Raises:
        ConditioningError: If the samples cannot support the degree
    """
    ratio = settings.REORTHOGONALIZE_RATIO if reorthogonalize_ratio is None else reorthogonalize_ratio
    rank_tol = settings.RANK_TOLERANCE if rank_tolerance is None else rank_tolerance

    x = np.asarray(points, dtype=complex).ravel()
    n = len(x)
    if degree < 0:
        raise ConditioningError(f"Degree must be nonnegative, got {degree}", degree=degree)
    if n <= degree:
        raise ConditioningError(
            f"Degree {degree} needs more than {degree} distinct samples, got {n}",
            degree=degree
        )

    Q = np.zeros((n, degree + 1), dtype=complex)
    H = np.zeros((degree + 1, degree), dtype=complex)
    P = np.zeros((degree + 1, degree + 1), dtype=complex)
    Q[:, 0] = 1.0
    P[0, 0] = 1.0

    for k in range(degree):
        v = x * Q[:, k]
        start_norm = np.sqrt(np.mean(np.abs(v) ** 2))
        h = Q[:, :k + 1].conj().T @ v / n
        v = v - Q[:, :k + 1] @ h
        if np.sqrt(np.mean(np.abs(v) ** 2)) < ratio * start_norm:
            correction = Q[:, :k + 1].conj().T @ v / n
            v = v - Q[:, :k + 1] @ correction
            h = h + correction
        norm = np.sqrt(np.mean(np.abs(v) ** 2))
        if norm <= rank_tol * max(start_norm, 1.0):
            raise ConditioningError(
                f"Sample matrix is rank deficient at degree {k + 1}", degree=k + 1
            )
        H[:k + 1, k] = h
        H[k + 1, k] = norm
        Q[:, k + 1] = v / norm
        shifted = np.zeros(degree + 1, dtype=complex)
        shifted[1:] = P[:-1, k]
        P[:, k + 1] = (shifted - P[:, :k + 1] @ h) / norm

    gram = Q.conj().T @ Q / n
    residual = float(np.max(np.abs(gram - np.eye(degree + 1))))
    return AxisBasis(points=x, degree=degree, Q=Q, H=H, P=P, orthogonality_residual=residual)


def _contract_leading(tensor: np.ndarray, matrix: np.ndarray, matrix_axis: int) -> np.ndarray:
    # contracts tensor axis 0 against `matrix_axis`; the free matrix axis goes last
    return np.tensordot(tensor, matrix, axes=([0], [matrix_axis]))


def fit_tensor(
        grid: SampleGrid,
        values: np.ndarray,
        degrees: Sequence[int],
        bases: Optional[List[AxisBasis]] = None
) -> TensorFit:
    """
    Least-squares fit of grid values by a tensor-product polynomial.

    Args:
        grid: Product sample grid
        values: Flat values in the grid's point order
        degrees: Per-variable degree bounds
        bases: Precomputed axis bases matching `degrees`

    Returns:
        TensorFit: Orthogonal and monomial coefficients with diagnostics
    """
    degrees = tuple(int(d) for d in degrees)
    if len(degrees) != grid.n_variables:
        raise ApproximationError(f"Got {len(degrees)} degree bounds for {grid.n_variables} variables")
    basis_size = int(np.prod([d + 1 for d in degrees]))
    if grid.size < basis_size:
        raise ApproximationError(f"Grid of {grid.size} points cannot fit {basis_size} basis monomials")

    if bases is None:
        bases = [arnoldi_axis(axis, d) for axis, d in zip(grid.axes, degrees)]

    F = grid.reshape_values(values)
    G = F
    for basis in bases:
        G = _contract_leading(G, basis.Q.conj() / len(basis.points), 0)

    fitted = G
    for basis in bases:
        fitted = _contract_leading(fitted, basis.Q, 1)

    C = G
    for basis in bases:
        C = _contract_leading(C, basis.P, 1)

    energy = np.abs(G) ** 2
    marginal = tuple(
        float(np.sum(np.take(energy, d, axis=v))) for v, d in enumerate(degrees)
    )
    condition_flag = any(b.orthogonality_residual > settings.CONDITION_THRESHOLD for b in bases)
    if condition_flag:
        logger.warning("Axis basis lost orthogonality at degrees %s", degrees)

    return TensorFit(
        degrees=degrees,
        orthogonal_coefficients=G,
        monomial_coefficients=C,
        fitted_values=fitted.ravel(),
        fitted_error=float(np.max(np.abs(F - fitted))),
        marginal_residuals=marginal,
        condition_flag=condition_flag
    )


def fit_polynomial(grid: SampleGrid, values: np.ndarray, degree_bounds: Sequence[int]) -> PolyWZ:
    """Least-squares polynomial within `degree_bounds`, in monomial form."""
    return fit_tensor(grid, values, degree_bounds).polynomial(grid.n_params)


class ApproximationError(Exception):
    """Base class for polynomial approximation errors"""
    pass


class ConditioningError(ApproximationError):
    """Raised when the sample matrix is rank deficient at some degree"""

    def __init__(self, message: str, degree: int):
        super().__init__(message)
        self.degree = degree
