import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from missionprofile.basis import make_bspline_basis, penalty_matrix
from missionprofile.errors import DomainError, RankDeficiencyError
from missionprofile.smoothing import (
    RawSeries,
    SmoothingConfig,
    design_matrix,
    fit_coordinate,
    gcv_score,
    select_lambda_gcv,
    smooth_device,
)


def line_series(q=50, T=10.0):
    t = np.linspace(0, T, q)
    return RawSeries("d", 0, t, 3.0 - 0.4 * t)


@pytest.mark.parametrize("lam", [0.0, 1.0, 1e6])
def test_straight_line_reproduced(lam):
    s = line_series()
    b = make_bspline_basis(10.0, 12)
    c = fit_coordinate(b, s, lam)
    assert np.abs(design_matrix(b, s.times) @ c - s.values).max() < 1e-8


def test_interpolation_when_k_equals_q(rng):
    t = np.linspace(0, 1, 30)
    s = RawSeries("d", 0, t, rng.normal(size=30))
    b = make_bspline_basis(1.0, 30)
    c = fit_coordinate(b, s, 0.0)
    assert np.abs(design_matrix(b, t) @ c - s.values).max() < 1e-6


def test_design_matrix_matches_cox_de_boor(rng):
    b = make_bspline_basis(5.0, 9)
    t = np.sort(rng.uniform(0, 5, 20))
    Phi = design_matrix(b, t)
    dense = np.array([oracles.cox_de_boor(b.knots, 4, x) for x in t])
    np.testing.assert_allclose(Phi, dense, atol=1e-14)
    assert design_matrix(b, t.copy()) is Phi  # cached


def test_normal_equations_against_dense_solve(rng):
    for _ in range(50):
        q, K = 10, 5
        lam = 10.0 ** rng.uniform(-4, 4)
        t = np.sort(rng.uniform(0, 2, q))
        s = RawSeries("d", 0, t, rng.normal(size=q))
        b = make_bspline_basis(2.0, K)
        Phi = np.array([oracles.cox_de_boor(b.knots, 4, x) for x in t])
        ref = oracles.dense_penalized_fit(Phi, penalty_matrix(b, 2), s.values, lam)
        c = fit_coordinate(b, s, lam)
        assert np.linalg.norm(c - ref) <= 1e-10 * np.linalg.norm(ref)


def test_gcv_matches_explicit_hat_matrix(rng):
    t = np.linspace(0, 1, 40)
    y = np.sin(6 * t) + rng.normal(0, 0.1, 40)
    s = RawSeries("d", 0, t, y)
    b = make_bspline_basis(1.0, 15)
    Phi = design_matrix(b, t)
    R = penalty_matrix(b, 2)
    grid = [1e-6, 1e-4, 1e-2, 1.0, 100.0]
    scores = [gcv_score(b, s, lam) for lam in grid]
    ref = [oracles.brute_gcv(Phi, R, y, lam) for lam in grid]
    np.testing.assert_allclose(scores, ref, rtol=1e-8)
    assert select_lambda_gcv(b, s, grid) == grid[int(np.argmin(ref))]


def test_gcv_prefers_largest_lambda_on_exact_line():
    s = line_series()
    b = make_bspline_basis(10.0, 12)
    assert select_lambda_gcv(b, s, [1e-3, 1.0, 1e3, 1e6]) == 1e6


def test_lambda_zero_underdetermined_raises():
    s = RawSeries("d", 0, np.array([0.0, 0.1, 0.2, 0.3, 0.4]), np.arange(5.0))
    b = make_bspline_basis(1.0, 8)
    with pytest.raises(RankDeficiencyError, match="underdetermined"):
        fit_coordinate(b, s, 0.0)
    # a positive weight makes the same system well posed
    fit_coordinate(b, s, 1e-3)


def test_penalty_null_space_needs_enough_times():
    b = make_bspline_basis(1.0, 8, order=5, penalty_order=3)
    s = RawSeries("d", 0, np.array([0.1, 0.9]), np.array([1.0, 2.0]))
    with pytest.raises(RankDeficiencyError):
        fit_coordinate(b, s, 1.0)


def test_times_outside_domain_rejected():
    b = make_bspline_basis(1.0, 6)
    with pytest.raises(DomainError):
        fit_coordinate(b, RawSeries("d", 0, np.array([0.0, 1.5]), np.zeros(2)), 1.0)


@pytest.mark.parametrize("times,values", [
    ([0.0, 0.0, 1.0], [1, 2, 3]),
    ([0.0, 2.0, 1.0], [1, 2, 3]),
    ([0.0], [1.0]),
    ([0.0, 1.0], [1.0, np.nan]),
    ([0.0, 1.0], [1.0]),
])
def test_raw_series_validation(times, values):
    with pytest.raises(DomainError):
        RawSeries("d", 0, np.array(times, dtype=float), np.array(values, dtype=float))


def test_smoothing_config_validation():
    with pytest.raises(DomainError):
        SmoothingConfig(lam=-1.0)
    with pytest.raises(DomainError):
        SmoothingConfig(lambda_grid=())
    with pytest.raises(DomainError):
        SmoothingConfig(lambda_grid=(1.0, 0.0))


def test_smooth_device_handles_coordinates_on_different_grids():
    b = make_bspline_basis(4.0, 10)
    t1 = np.linspace(0, 4, 30)
    t2 = np.linspace(0, 4, 17)
    s0 = RawSeries("dev", 0, t1, 2 * t1)
    s1 = RawSeries("dev", 1, t2, 1 - t2)
    f = smooth_device(b, [s1, s0], SmoothingConfig(lambda_grid=(1e-2, 1.0)), labels=["a", "b"])
    assert f.p == 2 and f.device_id == "dev" and f.labels == ("a", "b")
    np.testing.assert_allclose(f(np.array([0.5, 3.0])), [[1.0, 0.5], [6.0, -2.0]], atol=1e-8)


def test_smooth_device_missing_coordinate():
    b = make_bspline_basis(1.0, 6)
    t = np.linspace(0, 1, 10)
    with pytest.raises(DomainError, match="missing"):
        smooth_device(b, [RawSeries("d", 1, t, t)], SmoothingConfig())
    with pytest.raises(DomainError, match="twice"):
        smooth_device(b, [RawSeries("d", 0, t, t), RawSeries("d", 0, t, t)], SmoothingConfig())


def test_rank_errors_name_the_coordinate():
    b = make_bspline_basis(1.0, 12)
    t = np.linspace(0, 0.2, 5)
    with pytest.raises(RankDeficiencyError, match="coordinate 0"):
        smooth_device(b, [RawSeries("d", 0, t, t)], SmoothingConfig(lam=0.0))


@given(a=st.floats(-100, 100), slope=st.floats(-10, 10), lam=st.floats(0, 1e6),
       q=st.integers(8, 60))
def test_linear_data_is_a_fixed_point(a, slope, lam, q):
    t = np.linspace(0, 5, q)
    s = RawSeries("d", 0, t, a + slope * t)
    b = make_bspline_basis(5.0, 8)
    c = fit_coordinate(b, s, lam)
    scale = 1 + abs(a) + 5 * abs(slope)
    # normal-equation rounding grows with the conditioning, i.e. with lambda
    assert np.abs(design_matrix(b, t) @ c - s.values).max() < 2e-14 * (1e4 + lam) * scale
