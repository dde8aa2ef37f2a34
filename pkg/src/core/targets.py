"""
Built-in target functions h(w, z) addressed by configuration tags.

Indices passed to the factories are 0-based; the run configuration uses
1-based coordinates and converts before calling in here.
"""
from typing import List, Optional, Sequence
import logging

import numpy as np

from .series import PolyWZ, TargetFunction

logger = logging.getLogger(__name__)

# points closer than this to a pole count as outside the domain of holomorphy
POLE_CLEARANCE = 1e-12


class TargetError(ValueError):
    """Invalid built-in target description"""
    pass


def _check_index(index: int, bound: int, what: str) -> None:
    if not 0 <= index < bound:
        raise TargetError(f"{what} index {index + 1} is out of range 1..{bound}")


def zero_target(n_params: int, dimension: int) -> TargetFunction:
    return TargetFunction(n_params, dimension, lambda W, Z: np.zeros(len(Z), dtype=complex), name="zero")


def one_target(n_params: int, dimension: int) -> TargetFunction:
    return TargetFunction(n_params, dimension, lambda W, Z: np.ones(len(Z), dtype=complex), name="one")


def coordinate_target(n_params: int, dimension: int, index: int) -> TargetFunction:
    _check_index(index, dimension, "Coordinate")
    return TargetFunction(n_params, dimension, lambda W, Z: Z[:, index], name=f"z{index + 1}")


def reciprocal_target(n_params: int, dimension: int, index: int) -> TargetFunction:
    """1 / z_index, holomorphic away from z_index = 0."""
    _check_index(index, dimension, "Coordinate")
    return TargetFunction(
        n_params,
        dimension,
        lambda W, Z: 1.0 / Z[:, index],
        guard=lambda W, Z: np.abs(Z[:, index]) > POLE_CLEARANCE,
        name=f"1/z{index + 1}"
    )


def exp_sum_target(
        n_params: int,
        dimension: int,
        indices: Optional[Sequence[int]] = None
) -> TargetFunction:
    """exp of the sum of the selected z-coordinates (all of them by default)."""
    chosen = list(range(dimension)) if indices is None else list(indices)
    for index in chosen:
        _check_index(index, dimension, "Coordinate")
    label = "+".join(f"z{i + 1}" for i in chosen)
    return TargetFunction(
        n_params,
        dimension,
        lambda W, Z: np.exp(Z[:, chosen].sum(axis=1)),
        name=f"exp({label})"
    )


def cauchy_target(n_params: int, dimension: int, z_index: int, w_index: int) -> TargetFunction:
    """1 / (z_i - w_j), holomorphic off the diagonal z_i = w_j."""
    _check_index(z_index, dimension, "Coordinate")
    _check_index(w_index, n_params, "Parameter")
    return TargetFunction(
        n_params,
        dimension,
        lambda W, Z: 1.0 / (Z[:, z_index] - W[:, w_index]),
        guard=lambda W, Z: np.abs(Z[:, z_index] - W[:, w_index]) > POLE_CLEARANCE,
        name=f"1/(z{z_index + 1}-w{w_index + 1})"
    )


def polynomial_target(q: PolyWZ) -> TargetFunction:
    return TargetFunction(q.n_params, q.dimension, q.evaluate_points, name="poly")


def _combined_guard(targets: List[TargetFunction]):
    guarded = [t for t in targets if t.guard is not None]
    if not guarded:
        return None

    def guard(W: np.ndarray, Z: np.ndarray) -> np.ndarray:
        mask = np.ones(len(Z), dtype=bool)
        for t in guarded:
            mask &= t.check_domain(W, Z)
        return mask

    return guard


def _check_shapes(targets: List[TargetFunction]) -> None:
    if not targets:
        raise TargetError("A combined target needs at least one factor")
    shapes = {(t.n_params, t.dimension) for t in targets}
    if len(shapes) != 1:
        raise TargetError("Combined targets must share their variables")


def product_target(targets: Sequence[TargetFunction]) -> TargetFunction:
    targets = list(targets)
    _check_shapes(targets)

    def evaluator(W: np.ndarray, Z: np.ndarray) -> np.ndarray:
        values = np.ones(len(Z), dtype=complex)
        for t in targets:
            values = values * t.evaluate(W, Z)
        return values

    return TargetFunction(
        targets[0].n_params,
        targets[0].dimension,
        evaluator,
        guard=_combined_guard(targets),
        name="*".join(t.name for t in targets)
    )


def sum_target(targets: Sequence[TargetFunction]) -> TargetFunction:
    targets = list(targets)
    _check_shapes(targets)

    def evaluator(W: np.ndarray, Z: np.ndarray) -> np.ndarray:
        values = np.zeros(len(Z), dtype=complex)
        for t in targets:
            values = values + t.evaluate(W, Z)
        return values

    return TargetFunction(
        targets[0].n_params,
        targets[0].dimension,
        evaluator,
        guard=_combined_guard(targets),
        name="+".join(t.name for t in targets)
    )
