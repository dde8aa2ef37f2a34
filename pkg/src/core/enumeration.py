"""
Enumerations k -> N_k of the multi-indices N^d and infinite index sets mu.

The enumeration fixes the order in which monomials z^{N_k} enter the
generalized partial sums; mu is the set of indices at which partial sums may
be checked out as approximants.
"""
from abc import ABC, abstractmethod
from bisect import bisect_left
from dataclasses import dataclass
from enum import Enum
from math import comb
from typing import Dict, Iterator, List, Optional, Sequence, Tuple
import logging

MultiIndex = Tuple[int, ...]

logger = logging.getLogger(__name__)


class EnumerationScheme(Enum):
    GRADED_LEX = "graded-lex"
    GRADED_MAX = "graded-max"
    TABLE = "table"


class MuScheme(Enum):
    ALL = "all"
    ARITHMETIC = "arith"
    LIST_ARITHMETIC = "list+arith"


class EnumerationError(ValueError):
    """Invalid enumeration, multi-index or index set"""
    pass


def as_multi_index(m: Sequence[int], dimension: int) -> MultiIndex:
    """Validate a multi-index against the enumeration dimension."""
    m = tuple(int(v) for v in m)
    if len(m) != dimension:
        raise EnumerationError(f"Multi-index {m} has dimension {len(m)}, expected {dimension}")
    if any(v < 0 for v in m):
        raise EnumerationError(f"Multi-index {m} has negative entries")
    return m


def add_multi_indices(m1: MultiIndex, m2: MultiIndex) -> MultiIndex:
    return tuple(a + b for a, b in zip(m1, m2))


class Enumeration(ABC):
    """
    A bijection k -> N_k of the nonnegative integers onto N^d.

    Attributes:
        dimension (int): Number of z-variables d
        scheme (EnumerationScheme): Scheme tag used in run configurations
    """

    scheme: EnumerationScheme

    def __init__(self, dimension: int):
        if dimension < 1:
            raise EnumerationError("Enumeration dimension must be at least 1")
        self.dimension = dimension

    @abstractmethod
    def enumerate(self, k: int) -> MultiIndex:
        """
        Return N_k.

        Args:
            k: Nonnegative series index

        Returns:
            MultiIndex: The k-th multi-index of the enumeration
        """

    @abstractmethod
    def index_of(self, m: Sequence[int]) -> int:
        """
        Return the series index k with N_k = m.

        Args:
            m: Multi-index of length `dimension`

        Returns:
            int: Position of m in the enumeration
        """

    def prefix(self, n: int) -> List[MultiIndex]:
        """Return N_0, ..., N_n."""
        return [self.enumerate(k) for k in range(n + 1)]

    def to_config(self) -> Dict:
        return {"scheme": self.scheme.value, "dimension": self.dimension}

    @staticmethod
    def _check_index(k: int) -> int:
        if k < 0:
            raise EnumerationError(f"Series index must be nonnegative, got {k}")
        return int(k)

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(dimension={self.dimension})"


class GradedLexEnumeration(Enumeration):
    """Total degree shells, lexicographically ascending within a shell."""

    scheme = EnumerationScheme.GRADED_LEX

    def _count_up_to(self, degree: int) -> int:
        # number of m with |m| <= degree
        if degree < 0:
            return 0
        return comb(degree + self.dimension, self.dimension)

    @staticmethod
    def _count_shell(degree: int, parts: int) -> int:
        # number of compositions of `degree` into `parts` nonnegative entries
        if parts == 0:
            return 1 if degree == 0 else 0
        return comb(degree + parts - 1, parts - 1)

    def _shell_of(self, k: int) -> int:
        hi = 1
        while self._count_up_to(hi) <= k:
            hi *= 2
        lo = 0
        while lo < hi:
            mid = (lo + hi) // 2
            if self._count_up_to(mid) > k:
                hi = mid
            else:
                lo = mid + 1
        return lo

    def enumerate(self, k: int) -> MultiIndex:
        k = self._check_index(k)
        degree = self._shell_of(k)
        rel = k - self._count_up_to(degree - 1)
        m = [0] * self.dimension
        remaining = degree
        for i in range(self.dimension - 1):
            parts = self.dimension - 1 - i
            for v in range(remaining + 1):
                count = self._count_shell(remaining - v, parts)
                if rel < count:
                    m[i] = v
                    break
                rel -= count
            remaining -= m[i]
        m[-1] = remaining
        return tuple(m)

    def index_of(self, m: Sequence[int]) -> int:
        m = as_multi_index(m, self.dimension)
        degree = sum(m)
        index = self._count_up_to(degree - 1)
        remaining = degree
        for i in range(self.dimension - 1):
            parts = self.dimension - 1 - i
            for v in range(m[i]):
                index += self._count_shell(remaining - v, parts)
            remaining -= m[i]
        return index


class GradedMaxEnumeration(Enumeration):
    """Max-norm shells, lexicographically ascending within a shell."""

    scheme = EnumerationScheme.GRADED_MAX

    @staticmethod
    def _completions(slots: int, degree: int, hit: bool) -> int:
        # fillings of `slots` entries in [0, degree] keeping the shell's max equal to degree
        if hit:
            return (degree + 1) ** slots
        return (degree + 1) ** slots - degree ** slots

    def _shell_of(self, k: int) -> int:
        degree = int(round(k ** (1.0 / self.dimension)))
        while degree > 0 and degree ** self.dimension > k:
            degree -= 1
        while (degree + 1) ** self.dimension <= k:
            degree += 1
        return degree

    def enumerate(self, k: int) -> MultiIndex:
        k = self._check_index(k)
        degree = self._shell_of(k)
        rel = k - degree ** self.dimension
        m = []
        hit = False
        for i in range(self.dimension):
            slots = self.dimension - 1 - i
            if hit:
                block = self._completions(slots, degree, True)
                v, rel = divmod(rel, block)
            else:
                block = self._completions(slots, degree, False)
                if rel < degree * block:
                    v, rel = divmod(rel, block)
                else:
                    v = degree
                    rel -= degree * block
            hit = hit or v == degree
            m.append(v)
        return tuple(m)

    def index_of(self, m: Sequence[int]) -> int:
        m = as_multi_index(m, self.dimension)
        degree = max(m)
        index = degree ** self.dimension
        hit = False
        for i, v in enumerate(m):
            index += v * self._completions(self.dimension - 1 - i, degree, hit)
            hit = hit or v == degree
        return index


class TableEnumeration(Enumeration):
    """
    An explicit finite prefix followed by the graded-lex order of everything
    the prefix does not list.
    """

    scheme = EnumerationScheme.TABLE

    def __init__(self, dimension: int, table: Sequence[Sequence[int]]):
        super().__init__(dimension)
        self.table: Tuple[MultiIndex, ...] = tuple(as_multi_index(m, dimension) for m in table)
        self._positions: Dict[MultiIndex, int] = {}
        for position, m in enumerate(self.table):
            if m in self._positions:
                raise EnumerationError(f"Enumeration table lists {m} twice")
            self._positions[m] = position
        self._tail = GradedLexEnumeration(dimension)
        self._tail_ranks = sorted(self._tail.index_of(m) for m in self.table)

    def enumerate(self, k: int) -> MultiIndex:
        k = self._check_index(k)
        if k < len(self.table):
            return self.table[k]
        rank = k - len(self.table)
        for listed in self._tail_ranks:
            if listed <= rank:
                rank += 1
            else:
                break
        return self._tail.enumerate(rank)

    def index_of(self, m: Sequence[int]) -> int:
        m = as_multi_index(m, self.dimension)
        position = self._positions.get(m)
        if position is not None:
            return position
        rank = self._tail.index_of(m)
        return len(self.table) + rank - bisect_left(self._tail_ranks, rank)

    def to_config(self) -> Dict:
        config = super().to_config()
        config["table"] = [list(m) for m in self.table]
        return config


def make_enumeration(
        scheme: str,
        dimension: int,
        table: Optional[Sequence[Sequence[int]]] = None
) -> Enumeration:
    """
    Build an enumeration from its configuration tag.

    Args:
        scheme: One of "graded-lex", "graded-max", "table"
        dimension: Number of z-variables
        table: Explicit prefix, required for "table"

    Returns:
        Enumeration: The configured enumeration

    Raises:
        EnumerationError: If the tag is unknown or the table is invalid
    """
    try:
        kind = EnumerationScheme(scheme)
    except ValueError as e:
        raise EnumerationError(f"Unknown enumeration scheme: {scheme}") from e

    if kind is EnumerationScheme.GRADED_LEX:
        return GradedLexEnumeration(dimension)
    if kind is EnumerationScheme.GRADED_MAX:
        return GradedMaxEnumeration(dimension)
    if table is None:
        raise EnumerationError("The table scheme needs an explicit prefix table")
    return TableEnumeration(dimension, table)


@dataclass(frozen=True)
class MuSet:
    """
    An infinite set of series indices: an optional explicit sorted list
    followed by the arithmetic tail start + step * n.
    """

    scheme: MuScheme = MuScheme.ALL
    start: int = 0
    step: int = 1
    values: Tuple[int, ...] = ()

    def __post_init__(self):
        if self.start < 0:
            raise EnumerationError("mu tail start must be nonnegative")
        if self.step < 1:
            raise EnumerationError("mu tail step must be at least 1")
        if any(v < 0 for v in self.values):
            raise EnumerationError("mu values must be nonnegative")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise EnumerationError("mu values must be strictly increasing")
        if self.scheme is MuScheme.ALL and (self.start, self.step) != (0, 1):
            raise EnumerationError("The 'all' scheme has no tail parameters")
        if self.scheme is not MuScheme.LIST_ARITHMETIC and self.values:
            raise EnumerationError("Explicit values need the 'list+arith' scheme")

    @classmethod
    def all_naturals(cls) -> 'MuSet':
        return cls(MuScheme.ALL)

    @classmethod
    def arithmetic(cls, start: int, step: int) -> 'MuSet':
        return cls(MuScheme.ARITHMETIC, start=start, step=step)

    @classmethod
    def listed(cls, values: Sequence[int], start: int, step: int) -> 'MuSet':
        return cls(MuScheme.LIST_ARITHMETIC, start=start, step=step, values=tuple(values))

    @classmethod
    def from_config(
            cls,
            scheme: str,
            start: int = 0,
            step: int = 1,
            values: Sequence[int] = ()
    ) -> 'MuSet':
        try:
            kind = MuScheme(scheme)
        except ValueError as e:
            raise EnumerationError(f"Unknown mu scheme: {scheme}") from e
        return cls(kind, start=start, step=step, values=tuple(values))

    def _tail_next(self, n_min: int) -> int:
        if n_min <= self.start:
            return self.start
        steps = -(-(n_min - self.start) // self.step)
        return self.start + steps * self.step

    def contains(self, n: int) -> bool:
        position = bisect_left(self.values, n)
        if position < len(self.values) and self.values[position] == n:
            return True
        return n >= self.start and (n - self.start) % self.step == 0

    def next_member(self, n_min: int) -> int:
        """
        Return the smallest n in mu with n >= n_min.

        Args:
            n_min: Lower bound

        Returns:
            int: The next member of mu
        """
        n_min = max(int(n_min), 0)
        candidate = self._tail_next(n_min)
        position = bisect_left(self.values, n_min)
        if position < len(self.values):
            candidate = min(candidate, self.values[position])
        return candidate

    def members(self, count: int) -> Iterator[int]:
        """Yield the first `count` members in increasing order."""
        n = 0
        for _ in range(count):
            n = self.next_member(n)
            yield n
            n += 1

    def count_below(self, n: int) -> int:
        """Number of members smaller than n."""
        listed = bisect_left(self.values, n)
        tail = 0 if n <= self.start else -(-(n - self.start) // self.step)
        duplicates = sum(
            1 for v in self.values[:listed]
            if v >= self.start and (v - self.start) % self.step == 0
        )
        return listed + tail - duplicates

    def to_config(self) -> Dict:
        return {
            "scheme": self.scheme.value,
            "start": self.start,
            "step": self.step,
            "values": list(self.values),
        }
