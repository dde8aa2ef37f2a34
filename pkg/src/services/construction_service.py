"""
Construction of one coefficient sequence whose generalized partial sums
satisfy an ordered schedule of approximation jobs.

Each job freezes the coefficients written so far, divides the remaining
error by a power of a zero-free coordinate so the correcting polynomial only
touches monomials beyond the frozen prefix, and checks the result out at an
index taken from the admissible set mu.
"""
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union
import logging
import time

import numpy as np

from config.settings import settings
from src.approx.basis import ApproximationError
from src.approx.engine import PolynomialApproximator
from src.core.compacta import ClosedDisc, CompactError, ProductCompact, SampleGrid
from src.core.enumeration import Enumeration, MuSet, add_multi_indices
from src.core.series import (
    CoefficientSequence, ParamPolynomial, PolyWZ, TargetFunction, assemble_partial_sum
)
from src.core.transforms import SequenceTransform, TransformError


class JobStatus(Enum):
    """Outcome of one job in a build"""
    CERTIFIED = "certified"
    FAILED = "failed"
    REJECTED = "rejected"
    SKIPPED = "skipped"


class ConstructorError(Exception):
    """Base class for construction errors"""
    pass


class JobRejectedError(ConstructorError):
    """The job's variable compact has no factor excluding 0"""
    pass


class JobFailedError(ConstructorError):
    """A job could not be satisfied; carries the job index and diagnostics"""

    def __init__(self, job_index: int, message: str, record: Optional['JobRecord'] = None):
        super().__init__(f"Job {job_index}: {message}")
        self.job_index = job_index
        self.record = record


class InvariantViolationError(ConstructorError):
    """A runtime invariant of the construction does not hold"""
    pass


class BuildAbortedError(ConstructorError):
    """A failing job stopped the build; carries the partial result"""

    def __init__(self, job_index: int, message: str, result: 'ConstructionResult'):
        super().__init__(message)
        self.job_index = job_index
        self.result = result


@dataclass
class ApproximationJob:
    """
    One demand: sup over F x T of |S_lambda(a) - target| < tol.

    Attributes:
        F (ProductCompact): Parameter compact, no factors when r = 0
        T (ProductCompact): Variable compact, one factor per z-coordinate
        target (TargetFunction): Function to approximate
        tol (float): Required certified error
        label (str): Name used in logs and reports
    """
    F: ProductCompact
    T: ProductCompact
    target: TargetFunction
    tol: float
    label: str = ""

    def __post_init__(self):
        if not self.tol > 0:
            raise ConstructorError(f"Job tolerance must be positive, got {self.tol}")
        if (self.target.n_params, self.target.dimension) != (self.F.dimension, self.T.dimension):
            raise ConstructorError(
                f"Target {self.target.name} takes {self.target.n_params} parameters and "
                f"{self.target.dimension} variables, job has {self.F.dimension} and {self.T.dimension}"
            )

    @property
    def joint(self) -> ProductCompact:
        return ProductCompact.join(self.F, self.T)


@dataclass
class JobRecord:
    job_index: int
    label: str
    status: JobStatus
    lam: Optional[int] = None
    certified_error: Optional[float] = None
    i0: Optional[int] = None
    l_plus_1: Optional[int] = None
    M: Optional[float] = None
    degrees: List[int] = field(default_factory=list)
    frontier_before: int = -1
    inner_tolerance: Optional[float] = None
    approximation_error: Optional[float] = None
    monomials: int = 0
    written: int = 0
    rounds: List[Dict[str, Any]] = field(default_factory=list)
    verification_density: List[int] = field(default_factory=list)
    elapsed_seconds: float = 0.0
    message: str = ""

    @property
    def succeeded(self) -> bool:
        return self.status is JobStatus.CERTIFIED

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["status"] = self.status.value
        data["lambda"] = data.pop("lam")
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'JobRecord':
        data = dict(data)
        data["status"] = JobStatus(data["status"])
        data["lam"] = data.pop("lambda", None)
        known = set(cls.__dataclass_fields__)
        return cls(**{k: v for k, v in data.items() if k in known})


@dataclass
class ConstructionState:
    """
    Attributes:
        a (CoefficientSequence): Coefficients written so far
        frontier (int): Largest used series index, -1 when empty
        history (List[JobRecord]): Records of the satisfied jobs
    """
    a: CoefficientSequence
    frontier: int = -1
    history: List[JobRecord] = field(default_factory=list)

    @classmethod
    def empty(cls, n_params: int) -> 'ConstructionState':
        return cls(CoefficientSequence(n_params))


@dataclass
class ConstructionResult:
    sequence: CoefficientSequence
    records: List[JobRecord]
    frontier: int

    @property
    def lambdas(self) -> List[int]:
        return [r.lam for r in self.records if r.succeeded]

    @property
    def succeeded(self) -> bool:
        return all(r.succeeded for r in self.records)


class ResidualTarget(TargetFunction):
    """(target - S) / z_i0^power, the function the next polynomial must approximate."""

    def __init__(self, target: TargetFunction, partial_sum: PolyWZ, i0: int, power: int):
        self.base = target
        self.partial_sum = partial_sum
        self.i0 = i0
        self.power = power
        super().__init__(
            target.n_params,
            target.dimension,
            self._evaluate_points,
            guard=self._guard,
            name=f"({target.name}-S)/z{i0 + 1}^{power}"
        )

    def _guard(self, W: np.ndarray, Z: np.ndarray) -> np.ndarray:
        mask = self.base.check_domain(W, Z)
        if self.power > 0:
            mask = mask & (Z[:, self.i0] != 0)
        return mask

    def _evaluate_points(self, W: np.ndarray, Z: np.ndarray) -> np.ndarray:
        difference = self.base.evaluate(W, Z) - self.partial_sum.evaluate_points(W, Z)
        return difference / Z[:, self.i0] ** self.power

    def evaluate_grid(self, grid: SampleGrid) -> np.ndarray:
        difference = self.base.evaluate_grid(grid) - self.partial_sum.evaluate_grid(grid)
        return difference / grid.z_points[:, self.i0] ** self.power


class UniversalSeriesConstructor:
    """
    Builds coefficient sequences job by job for a fixed enumeration,
    transform and admissible index set.
    """

    def __init__(
            self,
            enumeration: Enumeration,
            transform: SequenceTransform,
            mu: MuSet,
            approximator: Optional[PolynomialApproximator] = None,
            config: Optional[Dict] = None,
            check_invariants: bool = False
    ):
        """
        Initialize the constructor.

        Args:
            enumeration: Order of the monomials z^{N_k}
            transform: Sequence transform b
            mu: Admissible check-out indices
            approximator: Polynomial approximation engine
            config: Configuration dictionary
                - inner_tol_safety: Extra divisor of the inner tolerance
                - padding_tolerance: Bound on displayed padding coefficients
                - max_points: Grid size cap for certification and verification
            check_invariants: Assert immutability, mu membership and padding after every job
        """
        self.enumeration = enumeration
        self.transform = transform
        self.mu = mu
        self.approximator = approximator or PolynomialApproximator()
        self.config = {
            'inner_tol_safety': settings.INNER_TOL_SAFETY,
            'padding_tolerance': settings.PADDING_TOLERANCE,
            'max_points': self.approximator.config['max_points']
        }
        if config:
            self.config.update({k: v for k, v in config.items() if v is not None})
        self.check_invariants = check_invariants
        self.logger = logging.getLogger(__name__)

    def extend_for_job(
            self,
            state: ConstructionState,
            job: ApproximationJob,
            job_index: int = 0
    ) -> Tuple[ConstructionState, JobRecord]:
        """
        Satisfy one job without touching coefficients at or below the frontier.

        Args:
            state: Current construction state (left unchanged)
            job: The job to satisfy
            job_index: Position of the job in its schedule

        Returns:
            Tuple[ConstructionState, JobRecord]: The new state and the job record

        Raises:
            JobRejectedError: If no factor of job.T excludes 0
            JobFailedError: If approximation or certification fails
            InvariantViolationError: If a checked invariant breaks
        """
        started = time.perf_counter()
        e, b = self.enumeration, self.transform
        if job.T.dimension != e.dimension:
            raise JobRejectedError(
                f"Job {job_index} has {job.T.dimension} variables, the enumeration has {e.dimension}"
            )
        if job.F.dimension != state.a.n_params:
            raise JobRejectedError(
                f"Job {job_index} has {job.F.dimension} parameters, the sequence has {state.a.n_params}"
            )

        i0 = job.T.excludes_zero()
        if i0 is None:
            raise JobRejectedError(
                f"Job {job_index}: every factor of T contains 0, one factor must exclude 0"
            )

        frontier = state.frontier
        l = max((e.enumerate(k)[i0] for k in range(frontier + 1)), default=-1)
        l0 = tuple(l + 1 if i == i0 else 0 for i in range(e.dimension))
        M = job.T.monomial_sup(l0)
        inner_tol = job.tol / (self.config['inner_tol_safety'] * M)

        record = JobRecord(
            job_index=job_index,
            label=job.label,
            status=JobStatus.FAILED,
            i0=i0,
            l_plus_1=l + 1,
            M=M,
            frontier_before=frontier,
            inner_tolerance=inner_tol
        )
        self.logger.info(
            "Job %d (%s): frontier %d, i0 %d, l+1 %d, M %.3e, inner tolerance %.3e",
            job_index, job.label, frontier, i0, l + 1, M, inner_tol
        )

        partial = assemble_partial_sum(state.a, b, e, frontier)
        residual = ResidualTarget(job.target, partial, i0, l + 1)
        try:
            approx = self.approximator.approximate(job.F, job.T, residual, inner_tol)
        except (ApproximationError, CompactError) as ex:
            record.rounds = list(getattr(ex, 'rounds', []))
            record.approximation_error = getattr(ex, 'best_certified_error', None)
            record.message = str(ex)
            record.elapsed_seconds = time.perf_counter() - started
            raise JobFailedError(job_index, str(ex), record) from ex

        record.degrees = list(approx.degree_used)
        record.approximation_error = approx.certified_error
        record.rounds = approx.rounds
        record.monomials = len(approx.polynomial.terms)

        prescribed: Dict[int, ParamPolynomial] = {}
        for alpha, p in approx.polynomial.terms.items():
            k = e.index_of(add_multi_indices(alpha, l0))
            if k <= frontier:
                raise InvariantViolationError(
                    f"Monomial {alpha} shifted by {l0} lands at index {k} <= frontier {frontier}"
                )
            prescribed[k] = p

        n_prime = max(prescribed, default=frontier + 1)
        lam = self.mu.next_member(max(n_prime, frontier + 1))
        zero = ParamPolynomial.zero(state.a.n_params)
        a = state.a
        try:
            for k in range(frontier + 1, lam + 1):
                c = b.solve_last(a, k, prescribed.get(k, zero))
                if not c.is_zero():
                    a = a.extended(k, c)
        except TransformError as ex:
            record.message = str(ex)
            record.elapsed_seconds = time.perf_counter() - started
            raise JobFailedError(job_index, str(ex), record) from ex
        record.written = lam - frontier

        if self.check_invariants:
            self._check_invariants(state, a, lam, prescribed)

        density = [self.approximator.config['certify_multiplier'] * c for c in approx.grid_density]
        certified = self.verify_job(a, job, lam, density)
        record.lam = lam
        record.certified_error = certified
        record.verification_density = density
        record.elapsed_seconds = time.perf_counter() - started

        if not certified < job.tol:
            record.message = f"certified error {certified:.3e} is not below {job.tol:.3e}"
            raise JobFailedError(job_index, record.message, record)

        record.status = JobStatus.CERTIFIED
        self.logger.info(
            "Job %d certified: lambda %d, error %.3e, degrees %s",
            job_index, lam, certified, record.degrees
        )
        return ConstructionState(a, lam, state.history + [record]), record

    def build(self, jobs: Sequence[ApproximationJob], abort_on_failure: bool = True) -> ConstructionResult:
        """
        Fold extend_for_job over the jobs in order.

        Raises:
            BuildAbortedError: If a job fails and abort_on_failure is set
        """
        if not jobs:
            raise ConstructorError("A build needs at least one job")
        state = ConstructionState.empty(jobs[0].F.dimension)
        records: List[JobRecord] = []

        for index, job in enumerate(jobs):
            try:
                state, record = self.extend_for_job(state, job, index)
                records.append(record)
            except (JobRejectedError, JobFailedError) as ex:
                record = getattr(ex, 'record', None) or JobRecord(
                    job_index=index,
                    label=job.label,
                    status=JobStatus.REJECTED if isinstance(ex, JobRejectedError) else JobStatus.FAILED,
                    frontier_before=state.frontier,
                    message=str(ex)
                )
                records.append(record)
                if abort_on_failure:
                    self.logger.error("Aborting build at job %d: %s", index, ex)
                    records.extend(
                        JobRecord(job_index=i, label=j.label, status=JobStatus.SKIPPED,
                                  frontier_before=state.frontier, message="not run")
                        for i, j in enumerate(jobs) if i > index
                    )
                    partial = ConstructionResult(state.a, records, state.frontier)
                    raise BuildAbortedError(index, f"Build aborted at job {index}: {ex}", partial) from ex
                self.logger.warning("Job %d failed, continuing: %s", index, ex)

        return ConstructionResult(state.a, records, state.frontier)

    def verify_job(
            self,
            a: CoefficientSequence,
            job: ApproximationJob,
            lam: int,
            density: Union[int, Sequence[int]]
    ) -> float:
        """sup |S_lam(a) - target| on a fresh boundary grid of F x T."""
        _, errors = self.grid_errors(a, job, lam, density)
        return float(np.max(errors))

    def grid_errors(
            self,
            a: CoefficientSequence,
            job: ApproximationJob,
            lam: int,
            density: Union[int, Sequence[int]]
    ) -> Tuple[SampleGrid, np.ndarray]:
        """Pointwise |S_lam(a) - target| on the half-step boundary grid of F x T."""
        grid = job.joint.boundary_grid(
            density, offset=0.5, n_params=job.F.dimension, max_points=self.config['max_points']
        )
        partial = assemble_partial_sum(a, self.transform, self.enumeration, lam)
        return grid, np.abs(job.target.evaluate_grid(grid) - partial.evaluate_grid(grid))

    def partial_sum_gap(
            self,
            a: CoefficientSequence,
            job: ApproximationJob,
            lam1: int,
            lam2: int,
            density: Union[int, Sequence[int]]
    ) -> float:
        """sup |S_lam2(a) - S_lam1(a)| on a boundary grid of the job's compacta."""
        grid = job.joint.boundary_grid(
            density, offset=0.5, n_params=job.F.dimension, max_points=self.config['max_points']
        )
        first = assemble_partial_sum(a, self.transform, self.enumeration, lam1)
        second = assemble_partial_sum(a, self.transform, self.enumeration, lam2)
        return float(np.max(np.abs(second.evaluate_grid(grid) - first.evaluate_grid(grid))))

    def _check_invariants(
            self,
            before: ConstructionState,
            a: CoefficientSequence,
            lam: int,
            prescribed: Dict[int, ParamPolynomial]
    ) -> None:
        frontier = before.frontier
        if a.below(frontier + 1) != before.a.below(frontier + 1):
            raise InvariantViolationError(f"A coefficient changed at or below the frontier {frontier}")
        if any(k > frontier for k in before.a.support()):
            raise InvariantViolationError("Support extends beyond the frontier")
        if not self.mu.contains(lam) or lam <= frontier:
            raise InvariantViolationError(f"Index {lam} is not a fresh member of mu")
        if any(k > lam for k in a.support()):
            raise InvariantViolationError(f"Support extends beyond lambda {lam}")

        zero = ParamPolynomial.zero(a.n_params)
        for k in range(frontier + 1, lam + 1):
            scale = max([1.0] + [a.get(i).max_abs() for i in range(k + 1) if i in a])
            displayed = self.transform.apply(a, k)
            deviation = (displayed - prescribed.get(k, zero)).max_abs()
            if deviation > self.config['padding_tolerance'] * scale:
                kind = "Prescribed" if k in prescribed else "Padding"
                raise InvariantViolationError(f"{kind} coefficient {k} is off by {deviation:.3e}")
        self.logger.debug("Invariants hold for indices %d..%d", frontier + 1, lam)


def exhausting_schedule(
        target: TargetFunction,
        T: ProductCompact,
        radii: Sequence[float],
        tol: float,
        label: str = "exhaust"
) -> List[ApproximationJob]:
    """
    Jobs approximating one target on growing parameter compacta
    F_p = Disc(0, R_p)^r with tolerance tol / p.
    """
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise ConstructorError("Exhausting radii must increase")
    return [
        ApproximationJob(
            F=ProductCompact(tuple(ClosedDisc(0, radius) for _ in range(target.n_params))),
            T=T,
            target=target,
            tol=tol / p,
            label=f"{label}-{p}"
        )
        for p, radius in enumerate(radii, start=1)
    ]
