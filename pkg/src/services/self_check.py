"""
Invariant suite run by `--seed-check` before a build.
"""
from dataclasses import dataclass, field
from typing import Callable, List, Optional
import logging

import numpy as np

from src.core.enumeration import Enumeration, MuSet, make_enumeration
from src.core.series import CoefficientSequence, ParamPolynomial
from src.core.transforms import CustomLowerTriangularTransform, SequenceTransform

logger = logging.getLogger(__name__)

SEED = 20240229


@dataclass
class CheckOutcome:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class SelfCheckReport:
    outcomes: List[CheckOutcome] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(o.passed for o in self.outcomes)

    def failures(self) -> List[CheckOutcome]:
        return [o for o in self.outcomes if not o.passed]


def check_enumeration_roundtrip(enumeration: Enumeration, count: int) -> Optional[str]:
    for k, m in enumerate(enumeration.prefix(count - 1)):
        if enumeration.index_of(m) != k:
            return f"{enumeration!r}: index_of(enumerate({k})) = {enumeration.index_of(m)}"
    return None


def random_param_polynomial(rng: np.random.Generator, n_params: int, terms: int = 3) -> ParamPolynomial:
    exponents = rng.integers(0, 4, size=(terms, n_params))
    values = rng.normal(size=terms) + 1j * rng.normal(size=terms)
    return ParamPolynomial(n_params, {tuple(e): v for e, v in zip(exponents, values)})


def random_lower_triangular(rng: np.random.Generator, size: int) -> CustomLowerTriangularTransform:
    """Random rows 0..size-1 with unit-modulus diagonals."""
    rows = {}
    for k in range(size):
        row = rng.normal(size=k + 1) + 1j * rng.normal(size=k + 1)
        row[k] = np.exp(2j * np.pi * rng.random())
        rows[k] = row
    return CustomLowerTriangularTransform(rows)


def check_transform_roundtrip(
        transform: SequenceTransform,
        rng: np.random.Generator,
        k: int,
        n_params: int = 1,
        tolerance: float = 1e-10
) -> Optional[str]:
    prefix = CoefficientSequence(n_params, {i: random_param_polynomial(rng, n_params) for i in range(k)})
    target = random_param_polynomial(rng, n_params)
    solved = transform.solve_last(prefix, k, target)
    deviation = (transform.apply(prefix.extended(k, solved), k) - target).max_abs()
    if deviation > tolerance:
        return f"{transform!r}: row {k} misses its target by {deviation:.3e}"
    return None


def check_mu(mu: MuSet, count: int) -> Optional[str]:
    for n in range(count):
        m = mu.next_member(n)
        if m < n or not mu.contains(m) or any(mu.contains(j) for j in range(n, m)):
            return f"mu.next_member({n}) = {m} is not the next member"
    for position, m in enumerate(mu.members(count)):
        if mu.count_below(m) != position:
            return f"mu member {m} has {mu.count_below(m)} members below it, expected {position}"
    return None


def run_self_check(
        enumeration: Enumeration,
        transform: SequenceTransform,
        mu: MuSet,
        count: int = 2000,
        transforms: int = 100
) -> SelfCheckReport:
    """
    Run the invariant suite for the configured objects plus every graded
    scheme in dimensions 1 to 3.
    """
    rng = np.random.default_rng(SEED)
    report = SelfCheckReport()

    def record(name: str, check: Callable[[], Optional[str]]) -> None:
        problem = check()
        report.outcomes.append(CheckOutcome(name, problem is None, problem or ""))
        if problem:
            logger.error("Self-check %s failed: %s", name, problem)

    record("configured enumeration roundtrip", lambda: check_enumeration_roundtrip(enumeration, count))
    for scheme in ("graded-lex", "graded-max"):
        for dimension in (1, 2, 3):
            other = make_enumeration(scheme, dimension)
            record(f"{scheme} d={dimension} roundtrip", lambda e=other: check_enumeration_roundtrip(e, count // 4))

    record("configured transform roundtrip", lambda: check_transform_roundtrip(transform, rng, 7))

    def random_roundtrips() -> Optional[str]:
        for _ in range(transforms):
            size = int(rng.integers(1, 12))
            problem = check_transform_roundtrip(random_lower_triangular(rng, size), rng, size - 1)
            if problem:
                return problem
        return None

    record("random transform roundtrips", random_roundtrips)
    record("mu next member", lambda: check_mu(mu, count // 4))

    logger.info("Self-check: %d of %d checks passed",
                sum(o.passed for o in report.outcomes), len(report.outcomes))
    return report
