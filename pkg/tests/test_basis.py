import numpy as np
import pytest

from mmqr.basis import (BasisSpec, basis_matrix, coefficient_function, eval_basis, logistic,
                        natural_spline, natural_spline_columns, parse_basis)
from mmqr.errors import DomainError, ParseError

LN_HALF = -0.6931471805599453


def test_logistic_at_half():
    np.testing.assert_allclose(eval_basis(logistic(), 0.5), [1.0, LN_HALF, LN_HALF], rtol=1e-15)


def test_logistic_extreme_levels_are_finite():
    b = eval_basis(logistic(), np.array([1e-12, 1 - 1e-12]))
    assert np.all(np.isfinite(b))
    assert b[0, 2] == pytest.approx(-1e-12, rel=1e-6)     # log1p keeps precision


def test_spline_below_first_knot():
    np.testing.assert_allclose(eval_basis(natural_spline([0.25, 0.5, 0.75]), 0.2), [1, 0.2, 0])


def test_spline_definition_by_hand():
    k = np.array([0.1, 0.3, 0.5, 0.7, 0.9])
    x = 0.95
    tp = lambda t: max(t, 0.0) ** 3
    S = [tp(x - k[l]) - tp(x - k[3]) * (k[4] - k[l]) / (k[4] - k[3])
         + tp(x - k[4]) * (k[3] - k[l]) / (k[4] - k[3]) for l in range(3)]
    np.testing.assert_allclose(natural_spline_columns(x, k), [1, x, *S], rtol=1e-14)


def test_spline_linear_beyond_last_knot():
    spec = natural_spline([0.1, 0.3, 0.5, 0.7, 0.9])
    h = 1e-4
    q = np.array([0.95 - h, 0.95, 0.95 + h])
    second = eval_basis(spec, q)[2] - 2 * eval_basis(spec, q)[1] + eval_basis(spec, q)[0]
    assert np.max(np.abs(second / h ** 2)) <= 1e-6


def test_spline_twice_continuous_at_knots():
    spec = natural_spline([0.2, 0.4, 0.6, 0.8])
    for k in spec.knots:
        h = 1e-5
        left = eval_basis(spec, np.array([k - 2 * h, k - h, k]))
        right = eval_basis(spec, np.array([k, k + h, k + 2 * h]))
        d2l = (left[2] - 2 * left[1] + left[0]) / h ** 2
        d2r = (right[2] - 2 * right[1] + right[0]) / h ** 2
        np.testing.assert_allclose(d2l, d2r, atol=1e-3)


@pytest.mark.parametrize("spec, grid, rank", [
    (logistic(), np.arange(1, 1000) / 1000, 3),
    (natural_spline([0.25, 0.5, 0.75]), [0.1, 0.4, 0.6, 0.9], 3),
])
def test_basis_matrix_rank(spec, grid, rank):
    B = basis_matrix(spec, grid)
    assert B.shape == (len(grid), spec.dim)
    assert np.linalg.matrix_rank(B) == rank


def test_basis_matrix_single_row():
    np.testing.assert_allclose(basis_matrix(logistic(), [0.5]), [[1, LN_HALF, LN_HALF]])


def test_basis_matrix_rejects_duplicates():
    with pytest.raises(DomainError):
        basis_matrix(logistic(), [0.2, 0.2])


def test_levels_outside_unit_interval():
    for q in (0.0, 1.0):
        with pytest.raises(DomainError):
            eval_basis(logistic(), q)


@pytest.mark.parametrize("knots", [[0.5, 0.6], [0.3, 0.2, 0.5], [0.0, 0.5, 0.9], [0.1, 0.5, 1.0]])
def test_bad_knots(knots):
    with pytest.raises(DomainError):
        natural_spline(knots)


def test_logistic_takes_no_knots():
    with pytest.raises(DomainError):
        BasisSpec("logistic", (0.5,))
    with pytest.raises(DomainError):
        BasisSpec("bspline")


def test_coefficient_function_examples():
    A = np.array([[1.0, 1.0, -1.0]])
    assert coefficient_function(A, logistic(), 0.5)[0] == pytest.approx(1.0, abs=1e-15)
    assert coefficient_function(A, logistic(), 0.9)[0] == pytest.approx(3.1972245773, rel=1e-10)
    np.testing.assert_array_equal(coefficient_function(np.zeros((2, 3)), logistic(),
                                                       np.array([0.1, 0.7])), np.zeros((2, 2)))
    with pytest.raises(DomainError):
        coefficient_function(np.zeros((2, 4)), logistic(), 0.5)


def test_parse_basis():
    assert parse_basis("logistic") == logistic()
    assert parse_basis("ns:0.1,0.5,0.9") == natural_spline([0.1, 0.5, 0.9])
    assert parse_basis("ns:seq3").knots == pytest.approx((0.25, 0.5, 0.75))
    assert str(parse_basis("ns:0.2,0.5,0.8")) == "ns:0.2,0.5,0.8"
    for bad in ("cubic", "ns:a,b", "ns:seqx"):
        with pytest.raises(ParseError):
            parse_basis(bad)
