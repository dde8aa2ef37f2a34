import time

import numpy as np
import pandas as pd
import pytest

from src.approx.engine import PolynomialApproximator
from src.core.compacta import ClosedDisc, ProductCompact
from src.core.enumeration import GradedLexEnumeration, GradedMaxEnumeration, MuSet
from src.core.series import ParamPolynomial, PolyWZ, TargetFunction, assemble_partial_sum
from src.core.targets import (
    cauchy_target, coordinate_target, exp_sum_target, one_target, polynomial_target, product_target,
    reciprocal_target, zero_target
)
from src.core.transforms import CesaroTransform, IdentityTransform
from src.services.construction_service import (
    ApproximationJob, BuildAbortedError, ConstructionState, ConstructorError,
    InvariantViolationError, JobRecord, JobRejectedError, JobStatus, UniversalSeriesConstructor,
    exhausting_schedule
)
from src.services.report_service import ReportError, ReportService
from src.services.self_check import run_self_check


def disc(center, radius=1.0):
    return ProductCompact((ClosedDisc(center, radius),))


def one_variable_job(target, center, tol, label=""):
    return ApproximationJob(F=ProductCompact(), T=disc(center), target=target, tol=tol, label=label)


@pytest.fixture
def reciprocal_job():
    return one_variable_job(reciprocal_target(0, 1, 0), 2, 1e-4, "reciprocal")


@pytest.fixture
def evens_constructor():
    return UniversalSeriesConstructor(
        GradedLexEnumeration(1), IdentityTransform(), MuSet.arithmetic(0, 2), check_invariants=True
    )


@pytest.fixture
def witness_jobs():
    return [
        one_variable_job(zero_target(0, 1), 10, 1e-3, "zero"),
        one_variable_job(one_target(0, 1), 10, 1e-3, "one"),
        one_variable_job(coordinate_target(0, 1, 0), 10, 1e-3, "z"),
    ]


def test_reciprocal_on_a_shifted_disc(evens_constructor, reciprocal_job):
    state, record = evens_constructor.extend_for_job(ConstructionState.empty(0), reciprocal_job)
    assert record.status is JobStatus.CERTIFIED
    assert record.lam >= 13 and record.lam % 2 == 0
    assert record.certified_error < 1e-4
    assert record.i0 == 0 and record.l_plus_1 == 0
    assert record.M == pytest.approx(1.0)
    assert record.inner_tolerance == pytest.approx(5e-5)
    assert state.frontier == record.lam
    assert evens_constructor.verify_job(state.a, reciprocal_job, record.lam, 1024) < 1e-4


def test_zero_target_writes_only_padding():
    constructor = UniversalSeriesConstructor(GradedLexEnumeration(1), IdentityTransform(), MuSet.all_naturals())
    state, record = constructor.extend_for_job(
        ConstructionState.empty(0), one_variable_job(zero_target(0, 1), 2, 1e-3)
    )
    assert record.lam == 0
    assert record.monomials == 0
    assert record.certified_error == 0.0
    assert len(state.a) == 0


def test_already_satisfied_job_adds_no_monomials():
    constructor = UniversalSeriesConstructor(GradedLexEnumeration(1), IdentityTransform(), MuSet.all_naturals())
    job = one_variable_job(one_target(0, 1), 2, 1e-3)
    state, first = constructor.extend_for_job(ConstructionState.empty(0), job)
    assert first.lam == 0
    after, second = constructor.extend_for_job(state, job, 1)
    assert second.monomials == 0
    assert second.lam == 1
    assert after.a == state.a


def test_input_state_is_left_untouched(evens_constructor, reciprocal_job):
    empty = ConstructionState.empty(0)
    evens_constructor.extend_for_job(empty, reciprocal_job)
    assert len(empty.a) == 0 and empty.frontier == -1 and empty.history == []


@pytest.mark.parametrize("transform", [IdentityTransform(), CesaroTransform()])
def test_witness_schedule(transform, witness_jobs, mocker):
    constructor = UniversalSeriesConstructor(
        GradedLexEnumeration(1), transform, MuSet.all_naturals(), check_invariants=True
    )
    spy = mocker.spy(constructor.approximator, 'approximate')
    result = constructor.build(witness_jobs)

    assert result.succeeded
    lam1, lam2, lam3 = result.lambdas
    assert lam1 < lam2 < lam3
    assert all(r.certified_error < 1e-3 for r in result.records)
    assert spy.call_args_list[1].args[3] == pytest.approx(1e-3 / 22)

    gap = constructor.partial_sum_gap(result.sequence, witness_jobs[1], lam1, lam2, 64)
    assert gap >= 1 - 2e-3


def test_parameter_free_polynomial_target_is_written_exactly():
    q = PolyWZ.from_joint_terms(0, 1, {(0,): 1, (2,): 3})
    constructor = UniversalSeriesConstructor(GradedLexEnumeration(1), IdentityTransform(), MuSet.all_naturals())
    result = constructor.build([one_variable_job(polynomial_target(q), 2, 1e-6)])

    assert result.succeeded
    assert result.records[0].certified_error < 1e-6
    assert result.sequence.get(0).coefficient(()) == pytest.approx(1, abs=1e-8)
    assert result.sequence.get(2).coefficient(()) == pytest.approx(3, abs=1e-8)


def test_unreachable_tolerance_fails_fast():
    # on Disc(2, 1) the third job needs an inner tolerance near 4e-12, beyond double precision
    jobs = [
        one_variable_job(zero_target(0, 1), 2, 1e-3, "zero"),
        one_variable_job(one_target(0, 1), 2, 1e-3, "one"),
        one_variable_job(coordinate_target(0, 1, 0), 2, 1e-3, "z"),
    ]
    constructor = UniversalSeriesConstructor(GradedLexEnumeration(1), IdentityTransform(), MuSet.all_naturals())
    started = time.perf_counter()
    result = constructor.build(jobs, abort_on_failure=False)

    assert time.perf_counter() - started < 60
    assert [r.status for r in result.records] == [JobStatus.CERTIFIED, JobStatus.CERTIFIED, JobStatus.FAILED]
    failed = result.records[2]
    assert failed.inner_tolerance < 1e-11
    assert failed.approximation_error > failed.inner_tolerance
    assert failed.rounds


def test_frozen_prefix_survives_later_jobs(witness_jobs):
    constructor = UniversalSeriesConstructor(GradedLexEnumeration(1), IdentityTransform(), MuSet.all_naturals())
    state = ConstructionState.empty(0)
    snapshots = []
    for index, job in enumerate(witness_jobs):
        before = state
        state, record = constructor.extend_for_job(state, job, index)
        assert record.frontier_before == before.frontier
        assert all(k > before.frontier for k in state.a.support() if k not in before.a)
        snapshots.append((before.frontier, before.a))
    for frontier, a in snapshots:
        for k in range(frontier + 1):
            assert state.a.get(k) == a.get(k)


@pytest.mark.parametrize("enumeration", [GradedLexEnumeration(2), GradedMaxEnumeration(2)])
def test_two_variables_with_one_zero_free_factor(enumeration):
    T = ProductCompact((ClosedDisc(3, 1), ClosedDisc(0, 1)))
    target = product_target([exp_sum_target(0, 2, [1]), reciprocal_target(0, 2, 0)])
    job = ApproximationJob(F=ProductCompact(), T=T, target=target, tol=1e-3)
    constructor = UniversalSeriesConstructor(enumeration, IdentityTransform(), MuSet.all_naturals())

    state, record = constructor.extend_for_job(ConstructionState.empty(0), job)
    assert record.i0 == 0
    assert record.certified_error < 1e-3
    assert constructor.verify_job(state.a, job, record.lam, 128) < 1e-3


def test_parameterized_cauchy_kernel():
    job = ApproximationJob(F=disc(0), T=disc(3), target=cauchy_target(1, 1, 0, 0), tol=1e-3)
    constructor = UniversalSeriesConstructor(GradedLexEnumeration(1), IdentityTransform(), MuSet.all_naturals())
    state, record = constructor.extend_for_job(ConstructionState.empty(1), job)
    assert record.certified_error < 1e-3

    partial = assemble_partial_sum(state.a, constructor.transform, constructor.enumeration, record.lam)
    Z = ClosedDisc(3, 1).boundary_samples(256, offset=0.25).reshape(-1, 1)
    for w in (0, 0.5, -0.5j, 0.9 * np.exp(1j * np.pi / 3), 1):
        W = np.full((len(Z), 1), w, dtype=complex)
        error = np.abs(partial.evaluate_points(W, Z) - 1.0 / (Z[:, 0] - w)).max()
        assert error < 2e-3


def test_jobs_need_a_zero_free_factor():
    constructor = UniversalSeriesConstructor(GradedLexEnumeration(1), IdentityTransform(), MuSet.all_naturals())
    job = one_variable_job(one_target(0, 1), 0, 1e-3)
    with pytest.raises(JobRejectedError):
        constructor.extend_for_job(ConstructionState.empty(0), job)
    result = constructor.build([job], abort_on_failure=False)
    assert result.records[0].status is JobStatus.REJECTED
    assert not result.succeeded


def test_job_validation():
    with pytest.raises(ConstructorError):
        one_variable_job(one_target(0, 1), 2, 0.0)
    with pytest.raises(ConstructorError):
        ApproximationJob(F=ProductCompact(), T=disc(2), target=one_target(0, 2), tol=1e-3)


@pytest.fixture
def failing_schedule():
    conjugate = TargetFunction(0, 1, lambda W, Z: np.conj(Z[:, 0]), name="conj")
    return [
        one_variable_job(one_target(0, 1), 2, 1e-3, "first"),
        one_variable_job(conjugate, 2, 1e-3, "conj"),
        one_variable_job(one_target(0, 1), 2, 1e-3, "last"),
    ]


@pytest.fixture
def small_budget_constructor():
    return UniversalSeriesConstructor(
        GradedLexEnumeration(1), IdentityTransform(), MuSet.all_naturals(),
        approximator=PolynomialApproximator({'max_basis': 20})
    )


def test_failed_job_aborts_the_build(small_budget_constructor, failing_schedule):
    with pytest.raises(BuildAbortedError) as e:
        small_budget_constructor.build(failing_schedule)
    partial = e.value.result
    assert e.value.job_index == 1
    assert [r.status for r in partial.records] == [JobStatus.CERTIFIED, JobStatus.FAILED, JobStatus.SKIPPED]
    assert partial.frontier == partial.records[0].lam
    assert partial.records[1].rounds


def test_failed_job_can_be_skipped(small_budget_constructor, failing_schedule):
    result = small_budget_constructor.build(failing_schedule, abort_on_failure=False)
    assert [r.status for r in result.records] == [JobStatus.CERTIFIED, JobStatus.FAILED, JobStatus.CERTIFIED]
    assert result.records[1].frontier_before == result.records[0].lam


def test_padding_violations_are_caught(mocker):
    transform = IdentityTransform()
    mocker.patch.object(transform, 'solve_last', return_value=ParamPolynomial.constant(0, 1.0))
    constructor = UniversalSeriesConstructor(
        GradedLexEnumeration(1), transform, MuSet.arithmetic(2, 1), check_invariants=True
    )
    with pytest.raises(InvariantViolationError):
        constructor.extend_for_job(ConstructionState.empty(0), one_variable_job(zero_target(0, 1), 2, 1e-3))


def test_exhausting_schedule():
    target = cauchy_target(1, 1, 0, 0)
    jobs = exhausting_schedule(target, disc(10), [0.5, 1.0], 1e-2)
    assert [job.tol for job in jobs] == pytest.approx([1e-2, 5e-3])
    assert [job.F.factors[0].radius for job in jobs] == [0.5, 1.0]
    assert [job.label for job in jobs] == ["exhaust-1", "exhaust-2"]

    constructor = UniversalSeriesConstructor(GradedLexEnumeration(1), IdentityTransform(), MuSet.all_naturals())
    result = constructor.build(jobs)
    assert result.succeeded
    assert result.lambdas[0] < result.lambdas[1]
    with pytest.raises(ConstructorError):
        exhausting_schedule(target, disc(10), [1.0, 1.0], 1e-2)


def test_job_records_keep_lambda_under_its_report_name():
    record = JobRecord(job_index=2, label="x", status=JobStatus.CERTIFIED, lam=14, certified_error=3e-5)
    data = record.to_dict()
    assert data["lambda"] == 14 and data["status"] == "certified"
    assert JobRecord.from_dict(data) == record


@pytest.fixture
def report_service():
    return ReportService()


def test_report_roundtrip_verifies(tmp_path, report_service, evens_constructor, reciprocal_job):
    result = evens_constructor.build([reciprocal_job])
    report = report_service.build_report({"note": "test"}, result, evens_constructor.enumeration, {})
    path = report_service.write_report(report, tmp_path / "run.report.json")
    loaded = report_service.load_report(path)

    assert report_service.sequence_from_report(loaded, 0) == result.sequence
    outcomes = report_service.verify(loaded, [reciprocal_job], evens_constructor)
    assert [o.passed for o in outcomes] == [True]
    assert outcomes[0].verified_error == pytest.approx(outcomes[0].recorded_error, rel=0.1)


def test_perturbed_report_fails_verification(report_service, evens_constructor, reciprocal_job):
    result = evens_constructor.build([reciprocal_job])
    report = report_service.build_report({}, result, evens_constructor.enumeration, {})
    report["coefficients"][0]["terms"][0]["re"] += 1.0
    outcomes = report_service.verify(report, [reciprocal_job], evens_constructor)
    assert not outcomes[0].passed


def test_hand_written_report(report_service):
    job = one_variable_job(zero_target(0, 1), 2, 1e-3)
    constructor = UniversalSeriesConstructor(GradedLexEnumeration(1), IdentityTransform(), MuSet.all_naturals())
    report = {"jobs": [{"job_index": 0, "lambda": 0, "certified_error": 0.0}], "coefficients": []}
    assert report_service.verify(report, [job], constructor)[0].passed
    with pytest.raises(ReportError):
        report_service.verify(report, [job, job], constructor)


def test_verification_density_respects_the_point_cap(report_service):
    T = ProductCompact((ClosedDisc(3, 1), ClosedDisc(3, 1)))
    job = ApproximationJob(F=disc(0), T=T, target=zero_target(1, 2), tol=1e-3)
    constructor = UniversalSeriesConstructor(GradedLexEnumeration(2), IdentityTransform(), MuSet.all_naturals())
    report = {
        "jobs": [{"job_index": 0, "lambda": 0, "certified_error": 0.0, "verification_density": [96, 96, 96]}],
        "coefficients": []
    }
    outcome = report_service.verify(report, [job], constructor)[0]

    assert outcome.passed
    assert all(c >= 96 for c in outcome.density)
    assert np.prod(outcome.density) <= constructor.config['max_points']


def test_grid_dump(tmp_path, report_service, evens_constructor, reciprocal_job):
    result = evens_constructor.build([reciprocal_job])
    path = report_service.dump_grid(tmp_path / "grid.csv", result, [reciprocal_job], evens_constructor)
    frame = pd.read_csv(path)
    assert {"job", "label", "z1_re", "z1_im", "abs_error"} <= set(frame.columns)
    assert len(frame) == int(np.prod(result.records[0].verification_density))
    assert frame["abs_error"].max() < 1e-4


def test_self_check_passes_for_builtin_objects():
    report = run_self_check(GradedMaxEnumeration(2), CesaroTransform(), MuSet.listed([1, 4], 10, 3), count=400)
    assert report.passed, report.failures()
