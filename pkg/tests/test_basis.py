import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from missionprofile.basis import (
    BasisSystem,
    eval_basis,
    eval_basis_deriv,
    gram_matrix,
    make_bspline_basis,
    penalty_matrix,
)
from missionprofile.errors import DomainError


@pytest.mark.parametrize("order", [1, 2, 3, 4, 5])
def test_values_match_cox_de_boor(order, rng):
    b = make_bspline_basis(7.5, order + 6, order, penalty_order=0)
    ts = np.concatenate([[0.0, 7.5], rng.uniform(0, 7.5, 40), b.knots[order:-order]])
    for t in ts:
        np.testing.assert_allclose(eval_basis(b, t), oracles.cox_de_boor(b.knots, order, t),
                                   atol=1e-13)


def test_shapes_and_partition_of_unity():
    b = make_bspline_basis(10.0, 12)
    assert b.n_basis == 12 and b.degree == 3
    assert eval_basis(b, 3.3).shape == (12,)
    B = eval_basis(b, np.linspace(0, 10, 101))
    assert B.shape == (101, 12)
    assert np.all(B >= 0)
    np.testing.assert_allclose(B.sum(axis=1), 1.0, atol=1e-14)


def test_right_endpoint_uses_left_limit():
    b = make_bspline_basis(1.0, 6)
    v = eval_basis(b, 1.0)
    assert v[-1] == 1.0 and np.all(v[:-1] == 0.0)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_derivatives_match_finite_differences(d):
    b = make_bspline_basis(4.0, 9)
    h = 1e-4
    ts = np.array([0.37, 1.21, 2.9, 3.55])  # away from knots
    lower = eval_basis_deriv(b, ts - h, d - 1)
    upper = eval_basis_deriv(b, ts + h, d - 1)
    np.testing.assert_allclose(eval_basis_deriv(b, ts, d), (upper - lower) / (2 * h),
                               rtol=1e-6, atol=1e-5)


@pytest.mark.parametrize("d", [0, 1, 2])
def test_gram_and_penalty_match_dense_quadrature(d):
    b = make_bspline_basis(3.0, 8)
    # trapezoid on a fine grid, aligned with the knots
    t = np.linspace(0, 3.0, 50001)
    B = eval_basis_deriv(b, t, d)
    dense = np.array([[oracles.trapezoid(B[:, i] * B[:, k], t) for k in range(8)] for i in range(8)])
    M = gram_matrix(b) if d == 0 else penalty_matrix(b, d)
    np.testing.assert_allclose(M, dense, rtol=1e-6, atol=1e-8 * np.abs(dense).max())
    assert np.allclose(M, M.T)


def test_penalty_annihilates_low_degree_polynomials():
    b = make_bspline_basis(5.0, 11)
    # Greville abscissae reproduce linear functions exactly
    grev = np.array([b.knots[i + 1:i + b.order].mean() for i in range(b.n_basis)])
    line = 2.0 + 0.7 * grev
    R = penalty_matrix(b, 2)
    assert np.abs(R @ line).max() < 1e-10
    assert np.all(np.linalg.eigvalsh(R) > -1e-10)
    np.testing.assert_allclose(eval_basis(b, np.array([0.0, 1.3, 5.0])) @ line,
                               2.0 + 0.7 * np.array([0.0, 1.3, 5.0]), atol=1e-12)


def test_penalty_zero_is_gram_and_matrices_are_cached():
    b = make_bspline_basis(2.0, 6)
    assert penalty_matrix(b, 0) is gram_matrix(b)
    assert penalty_matrix(b, 2) is b.penalty


def test_domain_errors():
    b = make_bspline_basis(2.0, 6)
    with pytest.raises(DomainError):
        eval_basis(b, 2.0000001)
    with pytest.raises(DomainError):
        eval_basis(b, np.array([0.5, -1e-9]))
    with pytest.raises(DomainError):
        eval_basis(b, np.nan)
    with pytest.raises(DomainError):
        eval_basis_deriv(b, 0.5, 4)
    with pytest.raises(DomainError):
        penalty_matrix(b, 4)


@pytest.mark.parametrize("args", [(0.0, 6), (-1.0, 6), (1.0, 3), (1.0, 6, 4, 4)])
def test_construction_rejects_bad_arguments(args):
    with pytest.raises(DomainError):
        make_bspline_basis(*args)


def test_knot_validation():
    with pytest.raises(DomainError, match="multiplicity"):
        BasisSystem(0.0, 1.0, 4, np.array([0, 0, 0, 0.5, 1, 1, 1, 1.0]))
    with pytest.raises(DomainError, match="nondecreasing"):
        BasisSystem(0.0, 1.0, 2, np.array([0, 0, 0.7, 0.3, 1, 1.0]))


def test_dict_round_trip():
    b = make_bspline_basis(9.0, 13, order=3, penalty_order=1)
    c = BasisSystem.from_dict(b.to_dict())
    assert c.same_as(b) and c.penalty_order == 1
    assert not c.same_as(make_bspline_basis(9.0, 14, order=3))


@given(T=st.floats(0.1, 1e4), K=st.integers(4, 40), u=st.floats(0, 1))
def test_partition_of_unity_property(T, K, u):
    b = make_bspline_basis(T, K)
    v = eval_basis(b, min(u * T, T))
    assert np.all(v >= 0)
    assert abs(v.sum() - 1.0) < 1e-12
