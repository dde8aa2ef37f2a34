"""
Value types for series with parameters: polynomials in the parameters w,
coefficient sequences, polynomials in (w, z), targets, and generalized
partial sums.
"""
from types import MappingProxyType
from typing import TYPE_CHECKING, Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple
import logging

import numpy as np

from .compacta import SampleGrid
from .enumeration import Enumeration, MultiIndex

if TYPE_CHECKING:
    from .transforms import SequenceTransform

logger = logging.getLogger(__name__)


class SeriesError(ValueError):
    """Malformed polynomial, sequence or evaluation request"""
    pass


def _power_table(x: np.ndarray, degree: int) -> np.ndarray:
    # column e holds x**e
    table = np.ones((len(x), degree + 1), dtype=complex)
    for e in range(1, degree + 1):
        table[:, e] = table[:, e - 1] * x
    return table


class ParamPolynomial:
    """
    A polynomial in the r parameters w, stored as a sparse map from exponent
    tuples to complex coefficients. Exact zeros are never stored; r = 0
    polynomials are scalars keyed by the empty tuple.
    """

    __slots__ = ("n_params", "_terms")

    def __init__(self, n_params: int, terms: Optional[Mapping[Sequence[int], complex]] = None):
        if n_params < 0:
            raise SeriesError("Parameter count must be nonnegative")
        self.n_params = n_params
        clean: Dict[MultiIndex, complex] = {}
        for exponent, value in (terms or {}).items():
            exponent = tuple(int(e) for e in exponent)
            if len(exponent) != n_params or any(e < 0 for e in exponent):
                raise SeriesError(f"Bad w-exponent {exponent} for {n_params} parameters")
            value = complex(value)
            if value != 0:
                clean[exponent] = value
        self._terms = clean

    @classmethod
    def zero(cls, n_params: int) -> 'ParamPolynomial':
        return cls(n_params)

    @classmethod
    def constant(cls, n_params: int, value: complex) -> 'ParamPolynomial':
        return cls(n_params, {(0,) * n_params: value})

    @classmethod
    def combine(
            cls,
            n_params: int,
            pairs: Iterable[Tuple[complex, 'ParamPolynomial']]
    ) -> 'ParamPolynomial':
        """Linear combination sum(c * p), accumulated in iteration order."""
        acc: Dict[MultiIndex, complex] = {}
        for c, p in pairs:
            if c == 0:
                continue
            for exponent, value in p._terms.items():
                acc[exponent] = acc.get(exponent, 0j) + c * value
        return cls(n_params, acc)

    @property
    def terms(self) -> Mapping[MultiIndex, complex]:
        return MappingProxyType(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def coefficient(self, exponent: Sequence[int]) -> complex:
        return self._terms.get(tuple(exponent), 0j)

    def max_abs(self) -> float:
        return max((abs(v) for v in self._terms.values()), default=0.0)

    def degree(self) -> Tuple[int, ...]:
        """Largest exponent per parameter."""
        if not self._terms:
            return (0,) * self.n_params
        return tuple(int(d) for d in np.max(np.array(list(self._terms)), axis=0)) if self.n_params else ()

    def evaluate(self, w: Sequence[complex]) -> complex:
        """Horner evaluation, one variable at a time."""
        if len(w) != self.n_params:
            raise SeriesError(f"Point has {len(w)} parameters, expected {self.n_params}")
        return _horner(self._terms, tuple(complex(x) for x in w))

    def evaluate_many(self, W: np.ndarray) -> np.ndarray:
        """Evaluate at the rows of W, shape (M, r)."""
        W = np.asarray(W, dtype=complex)
        if W.ndim != 2:
            W = W.reshape(-1, self.n_params) if self.n_params else np.zeros((1, 0), dtype=complex)
        if W.shape[1] != self.n_params:
            raise SeriesError(f"Points have {W.shape[1]} parameters, expected {self.n_params}")
        result = np.zeros(W.shape[0], dtype=complex)
        if not self._terms:
            return result
        if self.n_params == 0:
            return result + self._terms[()]
        degrees = self.degree()
        tables = [_power_table(W[:, j], degrees[j]) for j in range(self.n_params)]
        for exponent, value in self._terms.items():
            column = np.full(W.shape[0], value, dtype=complex)
            for j, e in enumerate(exponent):
                column *= tables[j][:, e]
            result += column
        return result

    def _check_compatible(self, other: 'ParamPolynomial') -> None:
        if not isinstance(other, ParamPolynomial) or other.n_params != self.n_params:
            raise SeriesError("Polynomials must share the parameter count")

    def __add__(self, other: 'ParamPolynomial') -> 'ParamPolynomial':
        self._check_compatible(other)
        return ParamPolynomial.combine(self.n_params, ((1, self), (1, other)))

    def __sub__(self, other: 'ParamPolynomial') -> 'ParamPolynomial':
        self._check_compatible(other)
        return ParamPolynomial.combine(self.n_params, ((1, self), (-1, other)))

    def __neg__(self) -> 'ParamPolynomial':
        return self.scale(-1)

    def scale(self, c: complex) -> 'ParamPolynomial':
        return ParamPolynomial(self.n_params, {e: c * v for e, v in self._terms.items()})

    def __mul__(self, c: complex) -> 'ParamPolynomial':
        return self.scale(c)

    __rmul__ = __mul__

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ParamPolynomial):
            return NotImplemented
        return self.n_params == other.n_params and self._terms == other._terms

    def __repr__(self) -> str:
        return f"ParamPolynomial(n_params={self.n_params}, terms={self._terms})"

    def to_records(self) -> List[Dict]:
        return [
            {"w_exponents": list(e), "re": v.real, "im": v.imag}
            for e, v in sorted(self._terms.items())
        ]

    @classmethod
    def from_records(cls, n_params: int, records: Iterable[Dict]) -> 'ParamPolynomial':
        terms: Dict[MultiIndex, complex] = {}
        for record in records:
            exponent = tuple(record["w_exponents"])
            terms[exponent] = terms.get(exponent, 0j) + complex(record["re"], record["im"])
        return cls(n_params, terms)


def _horner(terms: Mapping[MultiIndex, complex], w: Tuple[complex, ...]) -> complex:
    if not terms:
        return 0j
    if not w:
        return terms[()]
    by_power: Dict[int, Dict[MultiIndex, complex]] = {}
    for exponent, value in terms.items():
        by_power.setdefault(exponent[0], {})[exponent[1:]] = value
    result = 0j
    for e in range(max(by_power), -1, -1):
        result = result * w[0] + _horner(by_power.get(e, {}), w[1:])
    return result


class CoefficientSequence:
    """
    Finitely supported sequence k -> a_k of parameter polynomials.
    Absent indices denote the zero function.
    """

    __slots__ = ("n_params", "_support")

    def __init__(self, n_params: int, support: Optional[Mapping[int, ParamPolynomial]] = None):
        self.n_params = n_params
        clean: Dict[int, ParamPolynomial] = {}
        for k, p in (support or {}).items():
            if k < 0:
                raise SeriesError(f"Series index must be nonnegative, got {k}")
            if p.n_params != n_params:
                raise SeriesError(f"Coefficient {k} has {p.n_params} parameters, expected {n_params}")
            if not p.is_zero():
                clean[int(k)] = p
        self._support = dict(sorted(clean.items()))

    def get(self, k: int) -> ParamPolynomial:
        return self._support.get(k) or ParamPolynomial.zero(self.n_params)

    def __getitem__(self, k: int) -> ParamPolynomial:
        return self.get(k)

    def __contains__(self, k: int) -> bool:
        return k in self._support

    def __len__(self) -> int:
        return len(self._support)

    def items(self) -> Iterable[Tuple[int, ParamPolynomial]]:
        return self._support.items()

    def support(self) -> List[int]:
        return list(self._support)

    def max_index(self) -> int:
        """Largest supported index, -1 when empty."""
        return max(self._support, default=-1)

    def below(self, k: int) -> 'CoefficientSequence':
        """The restriction to indices < k."""
        return CoefficientSequence(self.n_params, {i: p for i, p in self._support.items() if i < k})

    def extended(self, k: int, p: ParamPolynomial) -> 'CoefficientSequence':
        """A copy with a_k replaced by p."""
        support = dict(self._support)
        support[k] = p
        return CoefficientSequence(self.n_params, support)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CoefficientSequence):
            return NotImplemented
        return self.n_params == other.n_params and self._support == other._support

    def to_records(self, enumeration: Enumeration) -> List[Dict]:
        return [
            {"k": k, "N_k": list(enumeration.enumerate(k)), "terms": p.to_records()}
            for k, p in self._support.items()
        ]

    @classmethod
    def from_records(cls, n_params: int, records: Iterable[Dict]) -> 'CoefficientSequence':
        return cls(n_params, {
            int(r["k"]): ParamPolynomial.from_records(n_params, r["terms"]) for r in records
        })


class PolyWZ:
    """
    A polynomial in (w, z): sparse map from z-exponents to parameter
    polynomials.
    """

    __slots__ = ("n_params", "dimension", "_terms")

    def __init__(
            self,
            n_params: int,
            dimension: int,
            terms: Optional[Mapping[Sequence[int], ParamPolynomial]] = None
    ):
        if dimension < 1:
            raise SeriesError("A polynomial in z needs at least one variable")
        self.n_params = n_params
        self.dimension = dimension
        clean: Dict[MultiIndex, ParamPolynomial] = {}
        for alpha, p in (terms or {}).items():
            alpha = tuple(int(e) for e in alpha)
            if len(alpha) != dimension or any(e < 0 for e in alpha):
                raise SeriesError(f"Bad z-exponent {alpha} for {dimension} variables")
            if p.n_params != n_params:
                raise SeriesError("Coefficient parameter count mismatch")
            if not p.is_zero():
                clean[alpha] = p
        self._terms = clean

    @classmethod
    def zero(cls, n_params: int, dimension: int) -> 'PolyWZ':
        return cls(n_params, dimension)

    @classmethod
    def from_joint_terms(
            cls,
            n_params: int,
            dimension: int,
            joint: Mapping[Sequence[int], complex]
    ) -> 'PolyWZ':
        """Build from a map (w-exponents + z-exponents) -> coefficient."""
        grouped: Dict[MultiIndex, Dict[MultiIndex, complex]] = {}
        for exponent, value in joint.items():
            exponent = tuple(exponent)
            grouped.setdefault(exponent[n_params:], {})[exponent[:n_params]] = value
        return cls(n_params, dimension, {
            alpha: ParamPolynomial(n_params, w_terms) for alpha, w_terms in grouped.items()
        })

    @classmethod
    def from_tensor(cls, tensor: np.ndarray, n_params: int) -> 'PolyWZ':
        """Build from a dense joint coefficient tensor, axes ordered (w, z)."""
        tensor = np.asarray(tensor, dtype=complex)
        nonzero = np.argwhere(tensor != 0)
        joint = {tuple(int(e) for e in idx): tensor[tuple(idx)] for idx in nonzero}
        return cls.from_joint_terms(n_params, tensor.ndim - n_params, joint)

    @property
    def terms(self) -> Mapping[MultiIndex, ParamPolynomial]:
        return MappingProxyType(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def joint_terms(self) -> Dict[MultiIndex, complex]:
        return {
            w_exp + alpha: value
            for alpha, p in self._terms.items()
            for w_exp, value in p.terms.items()
        }

    def degrees(self) -> Tuple[int, ...]:
        """Largest exponent per joint variable (w first, then z)."""
        joint = self.joint_terms()
        if not joint:
            return (0,) * (self.n_params + self.dimension)
        return tuple(int(d) for d in np.max(np.array(list(joint)), axis=0))

    def coefficient_tensor(self, degrees: Optional[Sequence[int]] = None) -> np.ndarray:
        degrees = tuple(degrees) if degrees is not None else self.degrees()
        tensor = np.zeros(tuple(d + 1 for d in degrees), dtype=complex)
        for exponent, value in self.joint_terms().items():
            tensor[exponent] = value
        return tensor

    def coefficient_distance(self, other: 'PolyWZ') -> float:
        """Largest coefficient-wise modulus of self - other."""
        mine, theirs = self.joint_terms(), other.joint_terms()
        return max(
            (abs(mine.get(e, 0j) - theirs.get(e, 0j)) for e in set(mine) | set(theirs)),
            default=0.0
        )

    def evaluate(self, w: Sequence[complex], z: Sequence[complex]) -> complex:
        if len(w) != self.n_params or len(z) != self.dimension:
            raise SeriesError("Point dimensions do not match the polynomial")
        total = 0j
        for alpha, p in self._terms.items():
            z_power = 1 + 0j
            for zi, e in zip(z, alpha):
                z_power *= complex(zi) ** e
            total += p.evaluate(w) * z_power
        return total

    def evaluate_points(self, W: np.ndarray, Z: np.ndarray) -> np.ndarray:
        """Evaluate at matched rows of W (M, r) and Z (M, d)."""
        Z = np.asarray(Z, dtype=complex).reshape(-1, self.dimension)
        W = np.asarray(W, dtype=complex).reshape(Z.shape[0], self.n_params)
        result = np.zeros(Z.shape[0], dtype=complex)
        if not self._terms:
            return result
        z_degrees = np.max(np.array(list(self._terms)), axis=0)
        tables = [_power_table(Z[:, j], int(z_degrees[j])) for j in range(self.dimension)]
        for alpha, p in self._terms.items():
            column = p.evaluate_many(W)
            for j, e in enumerate(alpha):
                column = column * tables[j][:, e]
            result += column
        return result

    def evaluate_grid(self, grid: SampleGrid) -> np.ndarray:
        """
        Evaluate on every point of a product grid by contracting the dense
        coefficient tensor with one power table per axis.

        Returns:
            np.ndarray: Flat values in the grid's point order
        """
        if grid.n_params != self.n_params or grid.n_variables != self.n_params + self.dimension:
            raise SeriesError("Grid variables do not match the polynomial")
        if not self._terms:
            return np.zeros(grid.size, dtype=complex)
        degrees = self.degrees()
        values = self.coefficient_tensor(degrees)
        for axis, degree in zip(grid.axes, degrees):
            # contract the leading coefficient axis; the new point axis goes last
            values = np.tensordot(values, _power_table(axis, degree), axes=([0], [1]))
        return values.ravel()

    def __add__(self, other: 'PolyWZ') -> 'PolyWZ':
        if (other.n_params, other.dimension) != (self.n_params, self.dimension):
            raise SeriesError("Polynomials must share their variables")
        terms = dict(self._terms)
        for alpha, p in other._terms.items():
            terms[alpha] = terms[alpha] + p if alpha in terms else p
        return PolyWZ(self.n_params, self.dimension, terms)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PolyWZ):
            return NotImplemented
        return (self.n_params, self.dimension) == (other.n_params, other.dimension) \
            and self._terms == other._terms

    def __repr__(self) -> str:
        return f"PolyWZ(n_params={self.n_params}, dimension={self.dimension}, terms={len(self._terms)})"


PointEvaluator = Callable[[np.ndarray, np.ndarray], np.ndarray]
DomainGuard = Callable[[np.ndarray, np.ndarray], np.ndarray]


class TargetFunction:
    """
    A target h(w, z) given by a vectorized evaluator.

    The evaluator maps W of shape (M, r) and Z of shape (M, d) to M complex
    values; the optional guard maps the same arrays to a boolean mask that is
    True where h is holomorphic.
    """

    def __init__(
            self,
            n_params: int,
            dimension: int,
            evaluator: PointEvaluator,
            guard: Optional[DomainGuard] = None,
            name: str = "target"
    ):
        self.n_params = n_params
        self.dimension = dimension
        self.evaluator = evaluator
        self.guard = guard
        self.name = name

    def check_domain(self, W: np.ndarray, Z: np.ndarray) -> np.ndarray:
        """Boolean mask of points inside the declared domain of holomorphy."""
        if self.guard is None:
            return np.ones(len(Z), dtype=bool)
        return np.asarray(self.guard(W, Z), dtype=bool).reshape(-1)

    def evaluate(self, W: np.ndarray, Z: np.ndarray) -> np.ndarray:
        Z = np.asarray(Z, dtype=complex).reshape(-1, self.dimension)
        W = np.asarray(W, dtype=complex).reshape(Z.shape[0], self.n_params)
        values = np.asarray(self.evaluator(W, Z), dtype=complex)
        return np.broadcast_to(values, (Z.shape[0],)).copy()

    def evaluate_grid(self, grid: SampleGrid) -> np.ndarray:
        return self.evaluate(grid.w_points, grid.z_points)

    def __call__(self, w: Sequence[complex], z: Sequence[complex]) -> complex:
        return complex(self.evaluate(np.array([w], dtype=complex), np.array([z], dtype=complex))[0])

    def __repr__(self) -> str:
        return f"TargetFunction({self.name}, n_params={self.n_params}, dimension={self.dimension})"


def eval_param_poly(p: ParamPolynomial, w: Sequence[complex]) -> complex:
    return p.evaluate(w)


def eval_poly_wz(q: PolyWZ, w: Sequence[complex], z: Sequence[complex]) -> complex:
    return q.evaluate(w, z)


def assemble_partial_sum(
        a: CoefficientSequence,
        b: 'SequenceTransform',
        e: Enumeration,
        n: int
) -> PolyWZ:
    """
    The generalized partial sum S_n(a) = sum_{k<=n} b_k(a_0..a_k) z^{N_k} as
    a polynomial. Transform values are computed once per k.
    """
    if n < 0:
        return PolyWZ.zero(a.n_params, e.dimension)
    displayed = b.values(a, n)
    return PolyWZ(a.n_params, e.dimension, {
        e.enumerate(k): p for k, p in enumerate(displayed) if not p.is_zero()
    })


def partial_sum_eval(
        a: CoefficientSequence,
        b: 'SequenceTransform',
        e: Enumeration,
        n: int,
        grid: SampleGrid
) -> np.ndarray:
    if n < 0:
        raise SeriesError(f"Partial sum index must be nonnegative, got {n}")
    return assemble_partial_sum(a, b, e, n).evaluate_grid(grid)
