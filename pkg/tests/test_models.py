import numpy as np
import pytest

from src.core.compacta import ClosedDisc, ProductCompact, SampleGrid
from src.core.enumeration import GradedLexEnumeration, GradedMaxEnumeration
from src.core.series import (
    CoefficientSequence, ParamPolynomial, PolyWZ, SeriesError, assemble_partial_sum,
    eval_param_poly, eval_poly_wz, partial_sum_eval
)
from src.core.targets import (
    TargetError, cauchy_target, coordinate_target, exp_sum_target, one_target,
    polynomial_target, product_target, reciprocal_target, sum_target, zero_target
)
from src.core.transforms import CesaroTransform, IdentityTransform


def point_grid(*values, n_params=0):
    return SampleGrid(axes=tuple(np.array([v], dtype=complex) for v in values), n_params=n_params)


@pytest.fixture
def rng():
    return np.random.default_rng(11)


@pytest.fixture
def w_poly():
    # 2 + 3w
    return ParamPolynomial(1, {(0,): 2, (1,): 3})


def test_eval_param_poly_examples(w_poly):
    assert eval_param_poly(w_poly, [1j]) == pytest.approx(2 + 3j)
    assert eval_param_poly(ParamPolynomial.constant(0, 5), []) == 5
    assert eval_param_poly(ParamPolynomial(2, {(1, 1): 1}), [2, 3]) == pytest.approx(6)


def test_param_polynomial_drops_exact_zeros(w_poly):
    t = ParamPolynomial(1, {(4,): 1.5})
    assert ((w_poly + t) - t).terms == w_poly.terms
    assert ParamPolynomial(1, {(2,): 0}).is_zero()
    assert (w_poly - w_poly).is_zero()


def test_param_polynomial_rejects_bad_exponents():
    with pytest.raises(SeriesError):
        ParamPolynomial(1, {(1, 0): 1})
    with pytest.raises(SeriesError):
        ParamPolynomial(2, {(-1, 0): 1})


def test_param_polynomial_vectorized_matches_scalar(rng):
    p = ParamPolynomial(2, {(0, 0): 1 - 1j, (2, 1): 0.5, (0, 3): 2j})
    W = rng.normal(size=(10, 2)) + 1j * rng.normal(size=(10, 2))
    expected = [p.evaluate(w) for w in W]
    assert np.allclose(p.evaluate_many(W), expected, rtol=0, atol=1e-12)


def test_eval_poly_wz_examples():
    one = PolyWZ(0, 1, {(0,): ParamPolynomial.constant(0, 1)})
    assert eval_poly_wz(one, [], [7]) == 1
    q = PolyWZ(1, 1, {(2,): ParamPolynomial(1, {(1,): 1})})
    assert eval_poly_wz(q, [2], [3]) == pytest.approx(18)


def test_eval_poly_wz_matches_naive_sum(rng):
    terms = {}
    for _ in range(3):
        alpha = tuple(int(v) for v in rng.integers(0, 4, size=2))
        beta = tuple(int(v) for v in rng.integers(0, 3, size=1))
        terms[alpha] = ParamPolynomial(1, {beta: complex(rng.normal(), rng.normal())})
    q = PolyWZ(1, 2, terms)
    w, z = [0.3 - 0.2j], [0.9j, -0.4 + 0.1j]
    naive = sum(
        value * w[0] ** beta[0] * z[0] ** alpha[0] * z[1] ** alpha[1]
        for alpha, p in terms.items() for beta, value in p.terms.items()
    )
    assert abs(eval_poly_wz(q, w, z) - naive) < 1e-14


def test_grid_evaluation_matches_pointwise(rng):
    q = PolyWZ.from_joint_terms(1, 2, {
        (0, 0, 0): 1, (1, 2, 0): -0.5j, (3, 1, 4): 0.25, (0, 0, 2): 2 - 1j
    })
    grid = ProductCompact((ClosedDisc(0, 1), ClosedDisc(1, 0.5), ClosedDisc(-1j, 2))).boundary_grid(8, n_params=1)
    expected = q.evaluate_points(grid.w_points, grid.z_points)
    assert np.allclose(q.evaluate_grid(grid), expected, rtol=0, atol=1e-12)
    assert q.degrees() == (3, 2, 4)


def test_coefficient_tensor_roundtrip():
    q = PolyWZ.from_joint_terms(1, 1, {(0, 2): 1.5, (2, 0): -1j})
    assert PolyWZ.from_tensor(q.coefficient_tensor(), n_params=1) == q
    assert q.coefficient_distance(PolyWZ.zero(1, 1)) == pytest.approx(1.5)


def test_partial_sum_examples():
    e = GradedLexEnumeration(1)
    identity, cesaro = IdentityTransform(), CesaroTransform()
    a = CoefficientSequence(0, {0: ParamPolynomial.constant(0, 1)})
    grid = ProductCompact((ClosedDisc(0, 1),)).boundary_grid(16)
    assert np.allclose(partial_sum_eval(a, identity, e, 0, grid), 1)

    ab = CoefficientSequence(0, {0: ParamPolynomial.constant(0, 1), 1: ParamPolynomial.constant(0, 1)})
    assert partial_sum_eval(ab, identity, e, 1, point_grid(2)) == pytest.approx([3])
    assert partial_sum_eval(a, cesaro, e, 2, point_grid(1)) == pytest.approx([11 / 6])


def test_partial_sum_before_start_is_zero():
    a = CoefficientSequence(0, {0: ParamPolynomial.constant(0, 1)})
    assert assemble_partial_sum(a, IdentityTransform(), GradedLexEnumeration(1), -1).is_zero()
    with pytest.raises(SeriesError):
        partial_sum_eval(a, IdentityTransform(), GradedLexEnumeration(1), -1, point_grid(1))


def test_parameter_free_evaluation_at_many_points():
    assert ParamPolynomial.constant(0, 2.5).evaluate_many(np.zeros((3, 0))).tolist() == [2.5, 2.5, 2.5]
    assert ParamPolynomial.zero(0).evaluate_many(np.zeros((4, 0))).shape == (4,)
    q = PolyWZ.from_joint_terms(0, 1, {(0,): 1, (2,): 3})
    Z = np.array([[1.0], [2.0], [1j]])
    assert np.allclose(q.evaluate_points(np.zeros((3, 0)), Z), [4, 13, -2], rtol=0, atol=1e-12)
    with pytest.raises(SeriesError):
        ParamPolynomial.constant(2, 1).evaluate_many(np.zeros((3, 1)))


def test_identity_partial_sum_is_the_series_truncation():
    e = GradedMaxEnumeration(2)
    a = CoefficientSequence(1, {
        0: ParamPolynomial(1, {(0,): 1}),
        3: ParamPolynomial(1, {(1,): 2j}),
        5: ParamPolynomial(1, {(2,): -0.5}),
    })
    s = assemble_partial_sum(a, IdentityTransform(), e, 4)
    assert s.terms.keys() == {e.enumerate(0), e.enumerate(3)}
    assert s.terms[e.enumerate(3)] == a[3]


def test_partial_sums_are_linear(rng):
    e = GradedLexEnumeration(2)
    cesaro = CesaroTransform()
    factors = (ClosedDisc(0, 1), ClosedDisc(0.5, 1), ClosedDisc(-1, 0.5))
    grid = ProductCompact(factors).boundary_grid(8, n_params=1)

    def random_sequence():
        return CoefficientSequence(1, {
            k: ParamPolynomial(1, {(int(rng.integers(0, 3)),): complex(rng.normal(), rng.normal())})
            for k in range(6)
        })

    a1, a2 = random_sequence(), random_sequence()
    c = 0.7 - 0.2j
    combined = CoefficientSequence(1, {
        k: ParamPolynomial.combine(1, [(1, a1[k]), (c, a2[k])]) for k in range(6)
    })
    lhs = partial_sum_eval(combined, cesaro, e, 5, grid)
    rhs = partial_sum_eval(a1, cesaro, e, 5, grid) + c * partial_sum_eval(a2, cesaro, e, 5, grid)
    assert np.allclose(lhs, rhs, rtol=0, atol=1e-12)


def test_coefficient_sequence_is_canonical():
    a = CoefficientSequence(0, {2: ParamPolynomial.zero(0), 5: ParamPolynomial.constant(0, 1)})
    assert a.support() == [5]
    assert 2 not in a and a[2].is_zero()
    assert a.max_index() == 5
    assert a.extended(1, ParamPolynomial.constant(0, 2)).support() == [1, 5]
    assert a.below(5).support() == []


def test_coefficient_records_name_their_monomials():
    e = GradedLexEnumeration(2)
    a = CoefficientSequence(1, {4: ParamPolynomial(1, {(2,): 0.5 - 1j})})
    records = a.to_records(e)
    assert records == [{"k": 4, "N_k": [1, 1], "terms": [{"w_exponents": [2], "re": 0.5, "im": -1.0}]}]
    assert CoefficientSequence.from_records(1, records) == a


def test_builtin_targets():
    z = [0.5 + 0.5j, 2.0]
    assert zero_target(0, 2)([], z) == 0
    assert one_target(0, 2)([], z) == 1
    assert coordinate_target(0, 2, 1)([], z) == 2
    assert reciprocal_target(0, 2, 0)([], z) == pytest.approx(1 / (0.5 + 0.5j))
    assert exp_sum_target(0, 2)([], z) == pytest.approx(np.exp(2.5 + 0.5j))
    assert cauchy_target(1, 2, 1, 0)([0.5], z) == pytest.approx(1 / 1.5)


def test_combined_targets():
    h = product_target([exp_sum_target(0, 2, [1]), reciprocal_target(0, 2, 0)])
    assert h([], [3, 1j]) == pytest.approx(np.exp(1j) / 3)
    g = sum_target([one_target(0, 2), coordinate_target(0, 2, 0)])
    assert g([], [4, 0]) == pytest.approx(5)
    q = PolyWZ.from_joint_terms(0, 2, {(1, 1): 2})
    assert polynomial_target(q)([], [3, 1j]) == pytest.approx(6j)


def test_target_domain_guards():
    h = product_target([one_target(1, 1), cauchy_target(1, 1, 0, 0)])
    W = np.array([[0.0], [1.0]], dtype=complex)
    Z = np.array([[1.0], [1.0]], dtype=complex)
    assert h.check_domain(W, Z).tolist() == [True, False]
    assert one_target(1, 1).check_domain(W, Z).all()


def test_target_index_errors():
    with pytest.raises(TargetError):
        coordinate_target(0, 2, 2)
    with pytest.raises(TargetError):
        cauchy_target(0, 1, 0, 0)
    with pytest.raises(TargetError):
        sum_target([one_target(0, 1), one_target(0, 2)])
