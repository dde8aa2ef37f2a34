"""
Planar compacta with connected complement, their products, and boundary
sample grids.

Every function the constructor certifies is holomorphic near the compacta, so
sup-norms are taken over boundary samples only.
"""
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple, Union
import logging

import numpy as np

from config.settings import settings

logger = logging.getLogger(__name__)


class CompactError(ValueError):
    """Invalid compact set description"""
    pass


class GridSizeError(CompactError):
    """A product grid would exceed the configured point cap"""
    pass


def _complex_pair(z: complex) -> List[float]:
    return [float(z.real), float(z.imag)]


class PlanarCompact(ABC):
    """A compact subset of the plane whose complement is connected."""

    @property
    @abstractmethod
    def kind(self) -> str:
        pass

    @abstractmethod
    def boundary_samples(self, count: int, offset: float = 0.0) -> np.ndarray:
        """
        Sample the topological boundary quasi-uniformly by arclength.

        Args:
            count: Number of samples
            offset: Fraction of one step in [0, 1) by which samples are rotated

        Returns:
            np.ndarray: Complex array of `count` boundary points
        """

    @abstractmethod
    def contains(self, z: complex, tol: Optional[float] = None) -> bool:
        pass

    @abstractmethod
    def parameters(self) -> Dict:
        pass

    def sup_modulus(self, count: int) -> float:
        """Largest |z| over `count` boundary samples."""
        return float(np.max(np.abs(self.boundary_samples(count))))

    def to_config(self) -> Dict:
        return {self.kind: self.parameters()}

    @staticmethod
    def _check_count(count: int, minimum: int = 1) -> int:
        if count < minimum:
            raise CompactError(f"Need at least {minimum} boundary samples, got {count}")
        return int(count)


@dataclass(frozen=True)
class ClosedDisc(PlanarCompact):
    center: complex
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise CompactError(f"Disc radius must be positive, got {self.radius}")
        object.__setattr__(self, "center", complex(self.center))
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def kind(self) -> str:
        return "disc"

    def boundary_samples(self, count: int, offset: float = 0.0) -> np.ndarray:
        count = self._check_count(count)
        angles = 2.0 * np.pi * (np.arange(count) + offset) / count
        return self.center + self.radius * np.exp(1j * angles)

    def contains(self, z: complex, tol: Optional[float] = None) -> bool:
        tol = settings.BOUNDARY_TOLERANCE if tol is None else tol
        return abs(complex(z) - self.center) <= self.radius + tol

    def parameters(self) -> Dict:
        return {"center": _complex_pair(self.center), "radius": self.radius}


@dataclass(frozen=True)
class Segment(PlanarCompact):
    a: complex
    b: complex

    def __post_init__(self):
        object.__setattr__(self, "a", complex(self.a))
        object.__setattr__(self, "b", complex(self.b))
        if self.a == self.b:
            raise CompactError("Segment endpoints must be distinct")

    @property
    def kind(self) -> str:
        return "segment"

    def boundary_samples(self, count: int, offset: float = 0.0) -> np.ndarray:
        count = self._check_count(count, minimum=2)
        # endpoints stay, interior points move by `offset` steps
        t = (np.arange(count) + offset) / (count - 1)
        t[0], t[-1] = 0.0, 1.0
        return self.a + (self.b - self.a) * t

    def contains(self, z: complex, tol: Optional[float] = None) -> bool:
        tol = settings.BOUNDARY_TOLERANCE if tol is None else tol
        return _segment_distance(complex(z), self.a, self.b) <= tol

    def parameters(self) -> Dict:
        return {"a": _complex_pair(self.a), "b": _complex_pair(self.b)}


@dataclass(frozen=True)
class FilledPolygon(PlanarCompact):
    """Closed region bounded by a simple, positively oriented polygon."""

    vertices: Tuple[complex, ...]

    def __post_init__(self):
        vertices = tuple(complex(v) for v in self.vertices)
        if len(vertices) > 1 and vertices[0] == vertices[-1]:
            vertices = vertices[:-1]
        object.__setattr__(self, "vertices", vertices)
        if len(vertices) < 3:
            raise CompactError("A polygon needs at least three vertices")
        if self.signed_area() <= 0:
            raise CompactError("Polygon vertices must be positively oriented")
        if not self._is_simple():
            raise CompactError("Polygon boundary must not intersect itself")

    @property
    def kind(self) -> str:
        return "polygon"

    def edges(self) -> List[Tuple[complex, complex]]:
        v = self.vertices
        return [(v[i], v[(i + 1) % len(v)]) for i in range(len(v))]

    def signed_area(self) -> float:
        return 0.5 * sum((p.conjugate() * q).imag for p, q in self.edges())

    def _is_simple(self) -> bool:
        edges = self.edges()
        n = len(edges)
        for i in range(n):
            for j in range(i + 1, n):
                if j == i + 1 or (i == 0 and j == n - 1):
                    continue
                if _segments_intersect(*edges[i], *edges[j]):
                    return False
        return True

    def boundary_samples(self, count: int, offset: float = 0.0) -> np.ndarray:
        count = self._check_count(count)
        starts = np.array([p for p, _ in self.edges()])
        steps = np.array([q - p for p, q in self.edges()])
        lengths = np.abs(steps)
        cumulative = np.concatenate(([0.0], np.cumsum(lengths)))
        s = cumulative[-1] * (np.arange(count) + offset) / count
        edge = np.clip(np.searchsorted(cumulative, s, side="right") - 1, 0, len(steps) - 1)
        t = (s - cumulative[edge]) / lengths[edge]
        return starts[edge] + steps[edge] * t

    def contains(self, z: complex, tol: Optional[float] = None) -> bool:
        tol = settings.BOUNDARY_TOLERANCE if tol is None else tol
        z = complex(z)
        if any(_segment_distance(z, p, q) <= tol for p, q in self.edges()):
            return True
        v = np.array(self.vertices) - z
        turning = np.angle(np.roll(v, -1) / v).sum() / (2.0 * np.pi)
        return int(round(turning)) != 0

    def parameters(self) -> Dict:
        return {"vertices": [_complex_pair(v) for v in self.vertices]}


def _segment_distance(z: complex, a: complex, b: complex) -> float:
    ab = b - a
    t = ((z - a) * ab.conjugate()).real / abs(ab) ** 2
    t = min(max(t, 0.0), 1.0)
    return abs(z - (a + t * ab))


def _cross(u: complex, v: complex) -> float:
    return (u.conjugate() * v).imag


def _segments_intersect(p1: complex, p2: complex, q1: complex, q2: complex) -> bool:
    d1 = _cross(q2 - q1, p1 - q1)
    d2 = _cross(q2 - q1, p2 - q1)
    d3 = _cross(p2 - p1, q1 - p1)
    d4 = _cross(p2 - p1, q2 - p1)
    if d1 * d2 < 0 and d3 * d4 < 0:
        return True
    return any(
        _segment_distance(point, *edge) == 0.0
        for point, edge in ((p1, (q1, q2)), (p2, (q1, q2)), (q1, (p1, p2)), (q2, (p1, p2)))
    )


@lru_cache(maxsize=None)
def refined_sup_modulus(factor: PlanarCompact, count: int) -> float:
    """
    Sampled sup |z| over a factor, doubling the sample count until the
    relative change drops below SUP_REFINE_RTOL.
    """
    current = factor.sup_modulus(count)
    for _ in range(settings.SUP_REFINE_MAX_DOUBLINGS):
        count *= 2
        refined = factor.sup_modulus(count)
        converged = refined - current <= settings.SUP_REFINE_RTOL * max(refined, 1e-300)
        current = max(current, refined)
        if converged:
            break
    return current


@dataclass(frozen=True, eq=False)
class SampleGrid:
    """
    Cartesian product of per-factor boundary samples.

    The axes are kept separately so that tensor-product bases can be
    evaluated and contracted axis by axis; `points` materializes the full
    product in C order (last axis fastest).
    """

    axes: Tuple[np.ndarray, ...]
    n_params: int = 0
    per_factor: Tuple[int, ...] = ()
    offset: float = 0.0
    _points: List[np.ndarray] = field(default_factory=list, init=False, repr=False, compare=False)

    @property
    def n_variables(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(len(axis) for axis in self.axes)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape, dtype=np.int64)) if self.axes else 1

    @property
    def points(self) -> np.ndarray:
        """All grid points as an array of shape (size, r + d)."""
        if not self._points:
            if not self.axes:
                self._points.append(np.zeros((1, 0), dtype=complex))
            else:
                mesh = np.meshgrid(*self.axes, indexing="ij")
                self._points.append(np.stack([m.ravel() for m in mesh], axis=1))
        return self._points[0]

    @property
    def w_points(self) -> np.ndarray:
        return self.points[:, :self.n_params]

    @property
    def z_points(self) -> np.ndarray:
        return self.points[:, self.n_params:]

    def reshape_values(self, values: np.ndarray) -> np.ndarray:
        """Bring flat per-point values into the grid's tensor shape."""
        return np.asarray(values).reshape(self.shape)


@dataclass(frozen=True)
class ProductCompact:
    """Ordered product of planar compacta; no factors denotes the singleton."""

    factors: Tuple[PlanarCompact, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))

    @property
    def dimension(self) -> int:
        return len(self.factors)

    @classmethod
    def join(cls, params: 'ProductCompact', variables: 'ProductCompact') -> 'ProductCompact':
        """The (w, z) product F x T."""
        return cls(params.factors + variables.factors)

    def contains(self, point: Sequence[complex], tol: Optional[float] = None) -> bool:
        if len(point) != self.dimension:
            raise CompactError(f"Point has {len(point)} coordinates, expected {self.dimension}")
        return all(f.contains(z, tol) for f, z in zip(self.factors, point))

    def factor_sups(self, per_factor: Optional[int] = None) -> List[float]:
        count = per_factor or settings.MIN_BOUNDARY_SAMPLES
        return [refined_sup_modulus(f, count) for f in self.factors]

    def excludes_zero(self, per_factor: Optional[int] = None) -> Optional[int]:
        return excludes_zero(self, per_factor)

    def monomial_sup(self, m: Sequence[int], per_factor: Optional[int] = None) -> float:
        return monomial_sup(self, m, per_factor)

    def boundary_grid(
            self,
            per_factor: Union[int, Sequence[int]],
            offset: float = 0.0,
            n_params: int = 0,
            max_points: Optional[int] = None
    ) -> SampleGrid:
        return product_boundary_grid(self, per_factor, offset, n_params, max_points)

    def to_config(self) -> List[Dict]:
        return [f.to_config() for f in self.factors]


def boundary_samples(c: PlanarCompact, count: int, offset: float = 0.0) -> np.ndarray:
    return c.boundary_samples(count, offset)


def contains(c: PlanarCompact, z: complex) -> bool:
    return c.contains(z)


def product_boundary_grid(
        p: ProductCompact,
        per_factor: Union[int, Sequence[int]],
        offset: float = 0.0,
        n_params: int = 0,
        max_points: Optional[int] = None
) -> SampleGrid:
    """
    Build the Cartesian product of factor boundary samples.

    Args:
        p: Product compact
        per_factor: Sample count for every factor, or one count per factor
        offset: Rotation of every factor's samples, in steps
        n_params: How many leading factors are parameter (w) factors
        max_points: Point cap, defaults to settings.MAX_GRID_POINTS

    Returns:
        SampleGrid: The product grid

    Raises:
        CompactError: If a count is below MIN_BOUNDARY_SAMPLES
        GridSizeError: If the grid would exceed the point cap
    """
    if isinstance(per_factor, (int, np.integer)):
        counts = (int(per_factor),) * p.dimension
    else:
        counts = tuple(int(c) for c in per_factor)
    if len(counts) != p.dimension:
        raise CompactError(f"Got {len(counts)} sample counts for {p.dimension} factors")
    if any(c < settings.MIN_BOUNDARY_SAMPLES for c in counts):
        raise CompactError(f"Every factor needs at least {settings.MIN_BOUNDARY_SAMPLES} samples")

    cap = max_points or settings.MAX_GRID_POINTS
    size = int(np.prod(counts, dtype=object)) if counts else 1
    if size > cap:
        raise GridSizeError(f"Grid of {size} points exceeds the cap of {cap} points")

    axes = tuple(f.boundary_samples(c, offset) for f, c in zip(p.factors, counts))
    logger.debug("Built boundary grid with counts %s, offset %s", counts, offset)
    return SampleGrid(axes=axes, n_params=n_params, per_factor=counts, offset=offset)


def excludes_zero(p: ProductCompact, per_factor: Optional[int] = None) -> Optional[int]:
    """
    Pick the factor i0 whose compact set does not contain 0.

    Among several candidates the one with the smallest sampled sup |z| wins,
    ties going to the lower index.

    Returns:
        Optional[int]: 0-based factor index, or None if every factor contains 0
    """
    candidates = [i for i, f in enumerate(p.factors) if not f.contains(0.0)]
    if not candidates:
        return None
    sups = p.factor_sups(per_factor)
    return min(candidates, key=lambda i: (sups[i], i))


def monomial_sup(p: ProductCompact, m: Sequence[int], per_factor: Optional[int] = None) -> float:
    """Sampled sup over p of |z^m|, taken factor by factor."""
    if len(m) != p.dimension:
        raise CompactError(f"Multi-index {tuple(m)} does not match {p.dimension} factors")
    result = 1.0
    for sup, exponent in zip(p.factor_sups(per_factor), m):
        result *= sup ** int(exponent)
    return result
