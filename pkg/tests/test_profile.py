import csv
import io
import math

import numpy as np
import pytest

import oracles
from missionprofile.basis import make_bspline_basis
from missionprofile.depth import EvaluationGrid
from missionprofile.errors import DomainError
from missionprofile.fdcore import FunctionalSample
from missionprofile.profile import (
    HistogramSpec,
    classical_profile_export,
    empirical_quantile,
    endpoint_histogram,
    pointwise_quantile_selection,
    residence_csv,
    residence_histogram,
    selection_comparison,
)

T = 10.0


def ramp_sample(slopes):
    """Curves ``x_i(t) = slope_i * t`` (exactly representable by the basis)."""
    b = make_bspline_basis(T, 6)
    grev = np.array([b.knots[i + 1:i + b.order].mean() for i in range(b.n_basis)])
    C = np.outer(slopes, grev)
    return FunctionalSample((b,), (C,), [f"r{i}" for i in range(len(slopes))], ["x"])


def random_sample(rng, n=40):
    b = make_bspline_basis(T, 9)
    C = rng.normal(size=(n, 9)).cumsum(axis=1) + 5
    return FunctionalSample((b,), (C,), [f"d{i}" for i in range(n)], ["x"])


@pytest.mark.parametrize("G", [11, 257, 1000])
def test_residence_time_is_conserved(rng, G):
    s = random_sample(rng)
    grid = EvaluationGrid.uniform(0, T, G)
    H = np.arange(0, 40, 3)
    hist = residence_histogram(s, H, HistogramSpec("x", [2.0, 4.0, 6.0, 8.0], grid))
    assert math.isclose(hist.total, len(H) * T, rel_tol=1e-12)
    assert hist.underflow > 0 and hist.overflow > 0
    np.testing.assert_allclose(hist.durations_avg * len(H), hist.durations)


def test_linear_ramp_matches_analytic_residence():
    slopes = np.array([1.0, 2.0, 0.5])
    s = ramp_sample(slopes)
    G = 2001
    grid = EvaluationGrid.uniform(0, T, G)
    edges = np.array([0.0, 1.0, 2.5, 4.0, 7.0])
    hist = residence_histogram(s, [0, 1, 2], HistogramSpec(0, edges, grid))
    h = T / (G - 1)
    for m in range(len(edges) - 1):
        exact = sum(max(0.0, min(edges[m + 1] / a, T) - min(edges[m] / a, T)) for a in slopes)
        assert abs(hist.durations[m] - exact) <= len(slopes) * h
    above = sum(max(0.0, T - edges[-1] / a) for a in slopes)
    assert abs(hist.overflow - above) <= len(slopes) * h
    assert hist.underflow == 0


def test_bins_are_half_open():
    s = ramp_sample(np.array([0.0]))  # constant zero curve
    grid = EvaluationGrid.uniform(0, T, 5)
    hist = residence_histogram(s, [0], HistogramSpec(0, [-1.0, 0.0, 1.0], grid))
    np.testing.assert_allclose(hist.durations, [0.0, T])


def test_histogram_argument_checks(rng):
    s = random_sample(rng)
    grid = EvaluationGrid.uniform(0, T, 10)
    with pytest.raises(DomainError):
        HistogramSpec(0, [1.0, 1.0], grid)
    with pytest.raises(DomainError):
        residence_histogram(s, [0, 0], HistogramSpec(0, [0.0, 1.0], grid))
    with pytest.raises(DomainError):
        residence_histogram(s, [99], HistogramSpec(0, [0.0, 1.0], grid))
    with pytest.raises(DomainError):
        residence_histogram(s, [1], HistogramSpec(0, [0.0, 1.0], EvaluationGrid.uniform(0, 11, 5)))


def test_endpoint_histogram_counts_every_device():
    s = ramp_sample(np.linspace(0.1, 1.0, 10))  # endpoints 1, 2, ..., 10
    eh = endpoint_histogram(s, np.arange(10), "x", [2.0, 5.0, 9.0])
    np.testing.assert_array_equal(eh.counts, [3, 4])
    assert (eh.underflow, eh.overflow, eh.total) == (1, 2, 10)


def test_empirical_quantile_matches_sort_oracle(rng):
    for _ in range(200):
        x = rng.normal(size=int(rng.integers(1, 60)))
        q = float(rng.uniform())
        assert empirical_quantile(x, q) == oracles.quantile7(list(x), q)
        assert empirical_quantile(x, q) == pytest.approx(np.quantile(x, q), abs=1e-12)


def test_pointwise_selection_is_the_closed_quantile_interval():
    s = ramp_sample(np.linspace(0.1, 10.0, 100))
    sel = pointwise_quantile_selection(s, "x", 0.025, 0.975)
    ends = np.sort(s.evaluate([T])[:, 0, 0])
    lo, hi = oracles.quantile7(list(ends), 0.025), oracles.quantile7(list(ends), 0.975)
    expected = [i for i, v in enumerate(s.evaluate([T])[:, 0, 0]) if lo <= v <= hi]
    np.testing.assert_array_equal(sel, expected)
    assert len(sel) == 94
    with pytest.raises(DomainError):
        pointwise_quantile_selection(s, "x", 0.9, 0.1)


def test_selection_comparison():
    s = ramp_sample(np.linspace(0.1, 1.0, 10))
    edges = [0.0, 4.0, 8.0, 12.0]
    same = selection_comparison(s, [1, 2, 3], [1, 2, 3], "x", edges)
    assert not same.difference.any() and same.underflow_difference == same.overflow_difference == 0
    diff = selection_comparison(s, [0, 1, 2], [1, 2, 9], "x", edges)
    np.testing.assert_array_equal(diff.difference, [-1, 0, 1])


def test_classical_export_and_csv(rng):
    s = random_sample(rng)
    grid = EvaluationGrid.uniform(0, T, 100)
    hist = residence_histogram(s, [0, 1, 2, 3], HistogramSpec(0, [0.0, 5.0, 10.0], grid))
    rows = classical_profile_export(hist, labels=["low", "high"])
    assert [r["label"] for r in rows if r["label"] not in ("underflow", "overflow")] == ["low", "high"]
    assert math.isclose(sum(r["share"] for r in rows), 1.0)
    assert math.isclose(sum(r["duration_sum"] for r in rows), 4 * T, rel_tol=1e-12)
    parsed = list(csv.reader(io.StringIO(residence_csv(hist))))
    assert parsed[0] == ["bin_lower", "bin_upper", "duration_sum", "duration_avg", "share"]
    assert len(parsed) == len(rows) + 1
    assert float(parsed[1][2]) == rows[0]["duration_sum"]
    with pytest.raises(DomainError):
        classical_profile_export(hist, labels=["only one"])
