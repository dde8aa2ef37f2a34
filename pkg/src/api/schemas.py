"""
Run configuration models and loader.

Complex numbers are written as [re, im] pairs. Coordinate indices in target
descriptions are 1-based.
"""
from pathlib import Path
from typing import Any, Dict, List, Optional, Union
import json
import logging

from pydantic import BaseModel, Field, ValidationError, root_validator, validator

from config.settings import settings
from src.approx.engine import PolynomialApproximator
from src.core import targets
from src.core.compacta import ClosedDisc, FilledPolygon, PlanarCompact, ProductCompact, Segment
from src.core.enumeration import Enumeration, MuSet, make_enumeration
from src.core.series import PolyWZ, TargetFunction
from src.core.transforms import SequenceTransform, make_transform
from src.services.construction_service import ApproximationJob

logger = logging.getLogger(__name__)

ComplexPair = List[float]


def to_complex(pair: ComplexPair) -> complex:
    return complex(pair[0], pair[1])


def _check_pair(value: Any) -> List[float]:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ValueError(f"expected a [re, im] pair, got {value!r}")
    return [float(value[0]), float(value[1])]


class DiscConfig(BaseModel):
    center: ComplexPair
    radius: float = Field(..., gt=0)

    _pair = validator('center', allow_reuse=True, pre=True)(_check_pair)


class SegmentConfig(BaseModel):
    a: ComplexPair
    b: ComplexPair

    _pair = validator('a', 'b', allow_reuse=True, pre=True)(_check_pair)


class PolygonConfig(BaseModel):
    vertices: List[ComplexPair]

    @validator('vertices', pre=True)
    def validate_vertices(cls, v):
        if not isinstance(v, (list, tuple)) or len(v) < 3:
            raise ValueError("a polygon needs at least 3 vertices")
        return [_check_pair(vertex) for vertex in v]


class FactorConfig(BaseModel):
    """Exactly one of `disc`, `segment`, `polygon`."""
    disc: Optional[DiscConfig] = None
    segment: Optional[SegmentConfig] = None
    polygon: Optional[PolygonConfig] = None

    class Config:
        extra = 'forbid'

    @root_validator(skip_on_failure=True)
    def validate_one_shape(cls, values):
        given = [k for k in ('disc', 'segment', 'polygon') if values.get(k) is not None]
        if len(given) != 1:
            raise ValueError("a factor needs exactly one of 'disc', 'segment', 'polygon'")
        cls._build(values)
        return values

    @staticmethod
    def _build(values: Dict[str, Any]) -> PlanarCompact:
        if values.get('disc') is not None:
            disc = values['disc']
            return ClosedDisc(to_complex(disc.center), disc.radius)
        if values.get('segment') is not None:
            segment = values['segment']
            return Segment(to_complex(segment.a), to_complex(segment.b))
        return FilledPolygon(tuple(to_complex(v) for v in values['polygon'].vertices))

    def to_compact(self) -> PlanarCompact:
        return self._build({'disc': self.disc, 'segment': self.segment, 'polygon': self.polygon})


class PolyTermConfig(BaseModel):
    z: List[int]
    w: List[int] = []
    coefficient: ComplexPair

    _pair = validator('coefficient', allow_reuse=True, pre=True)(_check_pair)

    @validator('z', 'w', each_item=True)
    def validate_exponent(cls, v):
        if v < 0:
            raise ValueError("exponents must be nonnegative")
        return v


TARGET_TAGS = ("zero", "one", "coordinate", "reciprocal", "exp-sum", "cauchy", "poly", "product", "sum")


class TargetConfig(BaseModel):
    tag: str
    index: Optional[int] = None
    indices: Optional[List[int]] = None
    z_index: Optional[int] = None
    w_index: Optional[int] = None
    terms: Optional[List[PolyTermConfig]] = None
    factors: Optional[List['TargetConfig']] = None

    @validator('tag')
    def validate_tag(cls, v):
        if v not in TARGET_TAGS:
            raise ValueError(f"unknown target tag '{v}', expected one of {', '.join(TARGET_TAGS)}")
        return v

    @root_validator(skip_on_failure=True)
    def validate_arguments(cls, values):
        tag = values['tag']
        required = {
            'coordinate': ('index',),
            'reciprocal': ('index',),
            'cauchy': ('z_index', 'w_index'),
            'poly': ('terms',),
            'product': ('factors',),
            'sum': ('factors',),
        }.get(tag, ())
        missing = [name for name in required if values.get(name) is None]
        if missing:
            raise ValueError(f"target '{tag}' needs {', '.join(missing)}")
        return values

    def to_target(self, n_params: int, dimension: int) -> TargetFunction:
        """Build the target; 1-based indices become 0-based here."""
        if self.tag == 'zero':
            return targets.zero_target(n_params, dimension)
        if self.tag == 'one':
            return targets.one_target(n_params, dimension)
        if self.tag == 'coordinate':
            return targets.coordinate_target(n_params, dimension, self.index - 1)
        if self.tag == 'reciprocal':
            return targets.reciprocal_target(n_params, dimension, self.index - 1)
        if self.tag == 'exp-sum':
            chosen = None if self.indices is None else [i - 1 for i in self.indices]
            return targets.exp_sum_target(n_params, dimension, chosen)
        if self.tag == 'cauchy':
            return targets.cauchy_target(n_params, dimension, self.z_index - 1, self.w_index - 1)
        if self.tag == 'poly':
            return targets.polynomial_target(self.to_polynomial(n_params, dimension))
        parts = [f.to_target(n_params, dimension) for f in self.factors]
        if self.tag == 'product':
            return targets.product_target(parts)
        return targets.sum_target(parts)

    def to_polynomial(self, n_params: int, dimension: int) -> PolyWZ:
        joint: Dict[tuple, complex] = {}
        for term in self.terms:
            w = term.w or [0] * n_params
            if len(term.z) != dimension or len(w) != n_params:
                raise ValueError(f"poly term {term.z}/{term.w} does not match d={dimension}, r={n_params}")
            key = tuple(w) + tuple(term.z)
            joint[key] = joint.get(key, 0j) + to_complex(term.coefficient)
        return PolyWZ.from_joint_terms(n_params, dimension, joint)


TargetConfig.update_forward_refs()


class EnumerationConfig(BaseModel):
    scheme: str = "graded-lex"
    table: Optional[List[List[int]]] = None


class MuConfig(BaseModel):
    scheme: str = "all"
    start: int = Field(0, ge=0)
    step: int = Field(1, ge=1)
    values: List[int] = []

    def to_mu(self) -> MuSet:
        return MuSet.from_config(self.scheme, self.start, self.step, self.values)


class TransformConfig(BaseModel):
    kind: str = "identity"
    rows: Optional[Dict[str, List[ComplexPair]]] = None

    @validator('rows')
    def validate_rows(cls, v):
        if v is None:
            return v
        for key, row in v.items():
            if not key.isdigit():
                raise ValueError(f"row key '{key}' is not a nonnegative integer")
            for entry in row:
                _check_pair(entry)
        return v

    def to_transform(self) -> SequenceTransform:
        rows = None
        if self.rows is not None:
            rows = {int(k): [to_complex(c) for c in row] for k, row in self.rows.items()}
        return make_transform(self.kind, rows)


class JobConfig(BaseModel):
    label: Optional[str] = None
    F: List[FactorConfig] = []
    T: List[FactorConfig] = Field(..., min_items=1)
    target: TargetConfig
    tol: float = Field(..., gt=0)

    def param_compact(self) -> ProductCompact:
        return ProductCompact(tuple(f.to_compact() for f in self.F))

    def variable_compact(self) -> ProductCompact:
        return ProductCompact(tuple(f.to_compact() for f in self.T))


class GridConfig(BaseModel):
    certify_multiplier: int = Field(settings.CERTIFY_MULTIPLIER, ge=1)
    verify_multiplier: int = Field(settings.VERIFY_DENSITY_MULTIPLIER, ge=1)
    samples_per_degree: int = Field(settings.SAMPLES_PER_DEGREE, ge=1)
    min_samples: int = Field(settings.MIN_SAMPLES_PER_FACTOR, ge=settings.MIN_BOUNDARY_SAMPLES)
    verify_samples: Optional[int] = Field(None, ge=settings.MIN_BOUNDARY_SAMPLES)


class BudgetConfig(BaseModel):
    max_basis: int = Field(settings.BASIS_BUDGET, ge=1)
    max_points: int = Field(settings.MAX_GRID_POINTS, ge=1)
    initial_degree: int = Field(settings.INITIAL_DEGREE, ge=0)


class RunConfig(BaseModel):
    """A complete run: series layout, schedule, densities and budgets."""
    dimension: int = Field(..., ge=1)
    parameters: int = Field(0, ge=0)
    enumeration: EnumerationConfig = EnumerationConfig()
    mu: MuConfig = MuConfig()
    transform: TransformConfig = TransformConfig()
    jobs: List[JobConfig] = Field(..., min_items=1)
    grid: GridConfig = GridConfig()
    budget: BudgetConfig = BudgetConfig()
    abort_on_failure: bool = True

    class Config:
        extra = 'forbid'

    @root_validator(skip_on_failure=True)
    def validate_run(cls, values):
        d, r = values['dimension'], values['parameters']
        enumeration = values['enumeration']
        make_enumeration(enumeration.scheme, d, enumeration.table)
        values['mu'].to_mu()
        values['transform'].to_transform()

        for index, job in enumerate(values['jobs']):
            where = f"jobs[{index}]"
            if len(job.T) != d:
                raise ValueError(f"{where}.T has {len(job.T)} factors, dimension is {d}")
            if len(job.F) != r:
                raise ValueError(f"{where}.F has {len(job.F)} factors, parameters is {r}")
            if job.variable_compact().excludes_zero() is None:
                raise ValueError(
                    f"{where}.T: every factor contains 0; at least one factor of T must exclude 0"
                )
            try:
                job.target.to_target(r, d)
            except ValueError as e:
                raise ValueError(f"{where}.target: {e}") from e
        return values

    def to_enumeration(self) -> Enumeration:
        return make_enumeration(self.enumeration.scheme, self.dimension, self.enumeration.table)

    def to_mu(self) -> MuSet:
        return self.mu.to_mu()

    def to_transform(self) -> SequenceTransform:
        return self.transform.to_transform()

    def to_jobs(self) -> List[ApproximationJob]:
        return [
            ApproximationJob(
                F=job.param_compact(),
                T=job.variable_compact(),
                target=job.target.to_target(self.parameters, self.dimension),
                tol=job.tol,
                label=job.label or f"job-{index}"
            )
            for index, job in enumerate(self.jobs)
        ]

    def approximator(self, max_points: Optional[int] = None) -> PolynomialApproximator:
        return PolynomialApproximator({
            'initial_degree': self.budget.initial_degree,
            'max_basis': self.budget.max_basis,
            'max_points': max_points or self.budget.max_points,
            'samples_per_degree': self.grid.samples_per_degree,
            'min_samples': self.grid.min_samples,
            'certify_multiplier': self.grid.certify_multiplier
        })

    def report_config(self) -> Dict[str, Any]:
        return {
            'verify_multiplier': self.grid.verify_multiplier,
            'verify_samples': self.grid.verify_samples
        }


class ConfigError(Exception):
    """Raised when a run configuration cannot be read or validated"""

    def __init__(self, message: str, diagnostics: Optional[List[str]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or []


def load_run_config(path: Union[str, Path]) -> RunConfig:
    """
    Read and validate a JSON run configuration.

    Raises:
        ConfigError: With line/column diagnostics for malformed JSON and
            field locations for validation failures
    """
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as e:
        raise ConfigError(f"Cannot read configuration {path}: {e}") from e
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        message = f"{path}: line {e.lineno}, column {e.colno}: {e.msg}"
        raise ConfigError(message, [message]) from e
    return parse_run_config(raw, source=str(path))


def parse_run_config(raw: Any, source: str = "<config>") -> RunConfig:
    try:
        return RunConfig.parse_obj(raw)
    except ValidationError as e:
        diagnostics = [
            f"{'.'.join(str(part) for part in error['loc']) or 'config'}: {error['msg']}"
            for error in e.errors()
        ]
        raise ConfigError(f"Invalid configuration {source}", diagnostics) from e
