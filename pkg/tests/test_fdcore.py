import json

import numpy as np
import pytest

import oracles
from missionprofile.basis import make_bspline_basis
from missionprofile.errors import BasisMismatchError, DegenerateScaleError, DomainError
from missionprofile.fdcore import (
    FunctionalDatum,
    FunctionalSample,
    apply_covariance_operator,
    covariance_from_json,
    covariance_function,
    covariance_to_json,
    eval_covariance,
    inner_product,
    mean_function,
    norm,
    sample_from_json,
    sample_to_json,
)

T = 3.0
FINE = np.linspace(0, T, 10_000)


def bases(p=2, K=(9, 7)):
    return tuple(make_bspline_basis(T, K[j]) for j in range(p))


def random_datum(rng, bs):
    return FunctionalDatum(bs, tuple(rng.normal(size=b.n_basis) for b in bs))


def random_sample(rng, n=12, p=2):
    bs = bases(p)
    coefs = tuple(rng.normal(size=(n, b.n_basis)) + np.linspace(0, 2, b.n_basis) for b in bs)
    return FunctionalSample(bs, coefs, [f"d{i}" for i in range(n)], ["a", "b"][:p])


def quad_inner(f, g):
    return oracles.trapezoid(np.sum(f(FINE) * g(FINE), axis=1), FINE)


def test_inner_product_matches_dense_quadrature(rng):
    bs = bases()
    for _ in range(50):
        f, g = random_datum(rng, bs), random_datum(rng, bs)
        ip, ref = inner_product(f, g), quad_inner(f, g)
        # error measured on the Cauchy-Schwarz scale |f| |g|
        assert abs(ip - ref) <= 1e-6 * norm(f) * norm(g)
        assert abs(ip) <= norm(f) * norm(g) * (1 + 1e-12)
        assert norm(f + g) <= norm(f) + norm(g) + 1e-12


def test_arithmetic_and_evaluation(rng):
    bs = bases()
    f, g = random_datum(rng, bs), random_datum(rng, bs)
    t = np.array([0.0, 1.1, 3.0])
    np.testing.assert_allclose((f + g)(t), f(t) + g(t), atol=1e-13)
    np.testing.assert_allclose((f - 2.0 * g)(t), f(t) - 2 * g(t), atol=1e-13)
    np.testing.assert_allclose((-f)(t), -f(t))
    assert f(1.1).shape == (2,) and f(t).shape == (3, 2)


def test_basis_mismatch_is_rejected(rng):
    f = random_datum(rng, bases())
    g = random_datum(rng, bases(K=(9, 8)))
    with pytest.raises(BasisMismatchError):
        f + g
    with pytest.raises(BasisMismatchError):
        inner_product(f, g)


def test_datum_shape_validation():
    with pytest.raises(DomainError):
        FunctionalDatum(bases(), (np.zeros(9), np.zeros(8)))
    with pytest.raises(DomainError):
        FunctionalSample(bases(), (np.zeros((3, 9)), np.zeros((2, 7))), ["a", "b", "c"])


def test_sample_access(rng):
    s = random_sample(rng)
    assert s.n == 12 and s.p == 2 and len(s) == 12 and s.domain == (0.0, T)
    vals = s.evaluate([0.5, 2.0])
    assert vals.shape == (12, 2, 2)
    np.testing.assert_allclose(vals[4], s[4]([0.5, 2.0]))
    sub = s.subset([3, 1])
    assert sub.device_ids == ("d3", "d1")
    np.testing.assert_array_equal(sub.coefs[1][0], s.coefs[1][3])
    assert s.coordinate_index("b") == 1 and s.coordinate_index(0) == 0
    with pytest.raises(DomainError):
        s.coordinate_index("zz")
    again = FunctionalSample.from_data(s.data())
    assert again.device_ids == s.device_ids


def test_mean_and_covariance_kernel_match_curves(rng):
    s = random_sample(rng)
    cov = covariance_function(s)
    grid = np.linspace(0, T, 25)
    X = s.evaluate(grid)
    np.testing.assert_allclose(mean_function(s)(grid), X.mean(axis=0), atol=1e-12)
    for j in range(2):
        for k in range(2):
            ref = np.cov(X[:, :, j].T, X[:, :, k].T)[:25, 25:]
            np.testing.assert_allclose(eval_covariance(cov, j, k, grid, grid), ref,
                                       rtol=1e-10, atol=1e-10)
    assert isinstance(eval_covariance(cov, 0, 1, 0.3, 1.2), float)


def test_covariance_operator_properties(rng):
    s = random_sample(rng)
    cov = covariance_function(s)
    bs = s.bases
    for _ in range(100):
        f, g = random_datum(rng, bs), random_datum(rng, bs)
        Gf, Gg = apply_covariance_operator(cov, f), apply_covariance_operator(cov, g)
        assert abs(inner_product(Gf, g) - inner_product(f, Gg)) < 1e-10
        assert inner_product(Gf, f) >= -1e-10


def test_covariance_operator_matches_quadrature(rng):
    s = random_sample(rng)
    cov = covariance_function(s)
    f = random_datum(rng, s.bases)
    Gf = apply_covariance_operator(cov, f)
    svals = np.array([0.0, 0.7, 1.9, 3.0])
    fv = f(FINE)
    for j in range(2):
        ref = np.array([sum(oracles.trapezoid(eval_covariance(cov, j, k, sv, FINE) * fv[:, k], FINE)
                            for k in range(2)) for sv in svals])
        np.testing.assert_allclose(Gf(svals)[:, j], ref, rtol=1e-5,
                                   atol=1e-7 * np.abs(ref).max())


def test_covariance_needs_two_devices(rng):
    s = random_sample(rng, n=1)
    with pytest.raises(DegenerateScaleError):
        covariance_function(s)


def test_json_round_trip_is_bitwise(rng):
    s = random_sample(rng)
    doc = json.loads(json.dumps(sample_to_json(s, {"note": 1})))
    back = sample_from_json(doc)
    assert back.device_ids == s.device_ids and back.labels == s.labels
    for a, b in zip(back.coefs, s.coefs):
        np.testing.assert_array_equal(a, b)
    assert doc["metadata"] == {"note": 1}

    cov = covariance_function(s)
    cback = covariance_from_json(json.loads(json.dumps(covariance_to_json(cov))))
    np.testing.assert_array_equal(cback.blocks[0][1], cov.blocks[0][1])
    assert cback.n == cov.n


@pytest.mark.parametrize("patch", [{"format": "x"}, {"version": 9}, {"devices": []}])
def test_json_rejects_bad_documents(rng, patch):
    doc = sample_to_json(random_sample(rng))
    doc.update(patch)
    with pytest.raises(DomainError):
        sample_from_json(doc)
