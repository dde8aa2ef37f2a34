"""
Lower-triangular linear sequence transforms b_k(a_0, ..., a_k) = sum_i c_ki a_i.

A nonzero diagonal c_kk makes every b_k surjective in its last argument,
which is what `solve_last` inverts.
"""
from abc import ABC, abstractmethod
from enum import Enum
from typing import Dict, List, Mapping, Optional, Sequence
import logging

import numpy as np

from config.settings import settings
from .series import CoefficientSequence, ParamPolynomial

logger = logging.getLogger(__name__)


class TransformKind(Enum):
    IDENTITY = "identity"
    CESARO = "cesaro"
    CUSTOM = "custom"


class TransformError(ValueError):
    """Invalid sequence transform"""
    pass


class InvalidTransformError(TransformError):
    """A diagonal entry is zero or too small to invert"""
    pass


class SequenceTransform(ABC):
    """Base class for the transform families b = (b_k)."""

    kind: TransformKind

    @abstractmethod
    def row(self, k: int) -> np.ndarray:
        """Coefficients (c_k0, ..., c_kk) of row k."""

    def diagonal(self, k: int) -> complex:
        return complex(self.row(k)[k])

    def apply(self, a: CoefficientSequence, k: int) -> ParamPolynomial:
        """b_k(a_0, ..., a_k); entries of a beyond k are ignored."""
        if k < 0:
            raise TransformError(f"Row index must be nonnegative, got {k}")
        row = self.row(k)
        return ParamPolynomial.combine(
            a.n_params, ((row[i], p) for i, p in a.items() if i <= k)
        )

    def solve_last(
            self,
            a: CoefficientSequence,
            k: int,
            target: ParamPolynomial
    ) -> ParamPolynomial:
        """
        Solve b_k(a_0, ..., a_{k-1}, c) = target for c.

        Args:
            a: Coefficient sequence; only indices < k are used
            k: Row index
            target: Prescribed value of b_k

        Returns:
            ParamPolynomial: The last argument c

        Raises:
            InvalidTransformError: If the diagonal entry c_kk vanishes
        """
        row = self.row(k)
        diagonal = self.diagonal(k)
        if abs(diagonal) < settings.DIAGONAL_FLOOR:
            raise InvalidTransformError(f"Row {k} has diagonal {diagonal}, cannot solve for a_{k}")
        prefix = ParamPolynomial.combine(
            a.n_params, ((row[i], p) for i, p in a.items() if i < k)
        )
        return (target - prefix).scale(1.0 / diagonal)

    def values(self, a: CoefficientSequence, n: int) -> List[ParamPolynomial]:
        """Displayed coefficients b_0(a), ..., b_n(a)."""
        return [self.apply(a, k) for k in range(n + 1)]

    def to_config(self) -> Dict:
        return {"kind": self.kind.value}

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}()"


class IdentityTransform(SequenceTransform):
    kind = TransformKind.IDENTITY

    def row(self, k: int) -> np.ndarray:
        row = np.zeros(k + 1, dtype=complex)
        row[k] = 1.0
        return row

    def apply(self, a: CoefficientSequence, k: int) -> ParamPolynomial:
        if k < 0:
            raise TransformError(f"Row index must be nonnegative, got {k}")
        return a.get(k)

    def solve_last(self, a: CoefficientSequence, k: int, target: ParamPolynomial) -> ParamPolynomial:
        return target

    def values(self, a: CoefficientSequence, n: int) -> List[ParamPolynomial]:
        return [a.get(k) for k in range(n + 1)]


class CesaroTransform(SequenceTransform):
    """Arithmetic means b_k = (a_0 + ... + a_k) / (k + 1)."""

    kind = TransformKind.CESARO

    def row(self, k: int) -> np.ndarray:
        return np.full(k + 1, 1.0 / (k + 1), dtype=complex)

    def apply(self, a: CoefficientSequence, k: int) -> ParamPolynomial:
        if k < 0:
            raise TransformError(f"Row index must be nonnegative, got {k}")
        total = ParamPolynomial.combine(a.n_params, ((1, p) for i, p in a.items() if i <= k))
        return total.scale(1.0 / (k + 1))

    def solve_last(self, a: CoefficientSequence, k: int, target: ParamPolynomial) -> ParamPolynomial:
        prefix = ParamPolynomial.combine(a.n_params, ((1, p) for i, p in a.items() if i < k))
        return target.scale(k + 1) - prefix

    def values(self, a: CoefficientSequence, n: int) -> List[ParamPolynomial]:
        running = ParamPolynomial.zero(a.n_params)
        displayed = []
        for k in range(n + 1):
            if k in a:
                running = running + a.get(k)
            displayed.append(running.scale(1.0 / (k + 1)))
        return displayed


class CustomLowerTriangularTransform(SequenceTransform):
    """
    User-supplied rows; rows missing from the table are identity rows.

    Attributes:
        rows (Dict[int, np.ndarray]): Stored rows keyed by k
    """

    kind = TransformKind.CUSTOM

    def __init__(self, rows: Mapping[int, Sequence[complex]]):
        self.rows: Dict[int, np.ndarray] = {}
        for k, row in sorted(rows.items()):
            k = int(k)
            row = np.asarray(row, dtype=complex)
            if k < 0 or row.shape != (k + 1,):
                raise TransformError(f"Row {k} must have exactly {k + 1} entries")
            if abs(row[k]) < settings.DIAGONAL_FLOOR:
                raise InvalidTransformError(
                    f"Row {k} diagonal {row[k]} is below {settings.DIAGONAL_FLOOR}"
                )
            self.rows[k] = row

    def row(self, k: int) -> np.ndarray:
        stored = self.rows.get(k)
        if stored is not None:
            return stored
        row = np.zeros(k + 1, dtype=complex)
        row[k] = 1.0
        return row

    def to_config(self) -> Dict:
        config = super().to_config()
        config["rows"] = {
            str(k): [[float(c.real), float(c.imag)] for c in row] for k, row in self.rows.items()
        }
        return config

    def __repr__(self) -> str:
        return f"CustomLowerTriangularTransform(rows={sorted(self.rows)})"


def make_transform(kind: str, rows: Optional[Mapping[int, Sequence[complex]]] = None) -> SequenceTransform:
    """
    Build a transform from its configuration tag.

    Raises:
        TransformError: If the tag is unknown or custom rows are missing/invalid
    """
    try:
        tag = TransformKind(kind)
    except ValueError as e:
        raise TransformError(f"Unknown transform kind: {kind}") from e

    if tag is TransformKind.IDENTITY:
        return IdentityTransform()
    if tag is TransformKind.CESARO:
        return CesaroTransform()
    if rows is None:
        raise TransformError("The custom transform needs a row table")
    return CustomLowerTriangularTransform(rows)


def apply(b: SequenceTransform, a: CoefficientSequence, k: int) -> ParamPolynomial:
    return b.apply(a, k)


def solve_last(
        b: SequenceTransform,
        a: CoefficientSequence,
        k: int,
        target: ParamPolynomial
) -> ParamPolynomial:
    return b.solve_last(a, k, target)
