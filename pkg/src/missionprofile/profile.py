"""Classical mission-profile summaries derived from functional samples.

Residence-time histograms integrate the indicator of a parameter lying in
each stress bin over time (grid quadrature on the smoothed curve) and sum
over a set of devices; endpoint histograms tally the value at the final
time.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .depth import EvaluationGrid
from .errors import DomainError
from .fdcore import FunctionalSample

__all__ = [
    "HistogramSpec",
    "MissionProfileHistogram",
    "EndpointHistogram",
    "SelectionComparison",
    "residence_histogram",
    "endpoint_histogram",
    "empirical_quantile",
    "pointwise_quantile_selection",
    "selection_comparison",
    "classical_profile_export",
    "residence_csv",
    "RESIDENCE_HEADER",
]

RESIDENCE_HEADER = ["bin_lower", "bin_upper", "duration_sum", "duration_avg", "share"]


def _check_edges(edges) -> np.ndarray:
    e = np.asarray(edges, dtype=float)
    if e.ndim != 1 or len(e) < 2:
        raise DomainError("need at least two bin edges")
    if np.any(np.diff(e) <= 0) or not np.all(np.isfinite(e)):
        raise DomainError("bin edges must be finite and strictly increasing")
    return e


def _check_set(H, n):
    H = np.asarray(H, dtype=int).ravel()
    if H.size == 0:
        raise DomainError("the device set H is empty")
    if H.min() < 0 or H.max() >= n:
        raise DomainError("H contains indices outside the sample")
    if len(np.unique(H)) != len(H):
        raise DomainError("H contains duplicate indices")
    return np.sort(H)


def _bin_index(values, edges):
    # bins are [a_{m-1}, a_m): -1 underflow, M overflow
    return np.searchsorted(edges, values, side="right") - 1


@dataclass(frozen=True)
class HistogramSpec:
    coordinate: int | str
    edges: np.ndarray
    grid: EvaluationGrid

    def __post_init__(self):
        object.__setattr__(self, "edges", _check_edges(self.edges))

    @property
    def M(self) -> int:
        return len(self.edges) - 1


@dataclass(frozen=True, eq=False)
class MissionProfileHistogram:
    """Residence durations per bin for a device set.

    ``durations`` are sums over the set; ``durations_avg`` divide by the set
    size. ``normalization`` records which of the two is meant for display.
    """

    edges: np.ndarray
    durations: np.ndarray
    underflow: float
    overflow: float
    device_count: int
    domain_length: float
    coordinate: int
    normalization: str = "per-device-average"

    @property
    def durations_avg(self) -> np.ndarray:
        return self.durations / self.device_count

    @property
    def total(self) -> float:
        return float(self.durations.sum() + self.underflow + self.overflow)


@dataclass(frozen=True, eq=False)
class EndpointHistogram:
    edges: np.ndarray
    counts: np.ndarray
    underflow: int
    overflow: int
    coordinate: int

    @property
    def total(self) -> int:
        return int(self.counts.sum() + self.underflow + self.overflow)


@dataclass(frozen=True, eq=False)
class SelectionComparison:
    pointwise: EndpointHistogram
    functional: EndpointHistogram
    difference: np.ndarray
    underflow_difference: int
    overflow_difference: int


def residence_histogram(sample: FunctionalSample, H, spec: HistogramSpec) -> MissionProfileHistogram:
    """Time spent by the devices in ``H`` inside each bin of ``spec``.

    ``durations[m] = sum_{i in H} sum_g w_g 1{x_ij(t_g) in [a_{m-1}, a_m)}``.
    """
    H = _check_set(H, sample.n)
    j = sample.coordinate_index(spec.coordinate)
    start, end = sample.domain
    if spec.grid.times[0] < start or spec.grid.times[-1] > end:
        raise DomainError("histogram grid exceeds the sample domain")
    values = sample.subset(H).evaluate(spec.grid.times)[:, :, j]
    idx = _bin_index(values, spec.edges)
    w = np.broadcast_to(spec.grid.weights, values.shape)
    M = spec.M
    # fixed-order reduction: per-device sums first, then over devices
    per_device = np.zeros((len(H), M + 2))
    for i in range(len(H)):
        per_device[i] = np.bincount(idx[i] + 1, weights=w[i], minlength=M + 2)
    acc = per_device.sum(axis=0)
    return MissionProfileHistogram(
        edges=spec.edges,
        durations=acc[1:M + 1],
        underflow=float(acc[0]),
        overflow=float(acc[M + 1]),
        device_count=len(H),
        domain_length=spec.grid.length,
        coordinate=j,
    )


def endpoint_values(sample: FunctionalSample, coordinate) -> np.ndarray:
    j = sample.coordinate_index(coordinate)
    return sample.evaluate([sample.domain[1]])[:, 0, j]


def endpoint_histogram(sample: FunctionalSample, H, coordinate, edges) -> EndpointHistogram:
    """Histogram of ``x_ik(T)`` over the devices in ``H``."""
    H = _check_set(H, sample.n)
    edges = _check_edges(edges)
    vals = endpoint_values(sample, coordinate)[H]
    idx = _bin_index(vals, edges)
    M = len(edges) - 1
    counts = np.bincount(idx + 1, minlength=M + 2)
    return EndpointHistogram(edges, counts[1:M + 1].astype(int), int(counts[0]),
                             int(counts[M + 1]), sample.coordinate_index(coordinate))


def empirical_quantile(values, q: float) -> float:
    """Linear interpolation between order statistics at ``h = (n - 1) q``."""
    xs = np.sort(np.asarray(values, dtype=float))
    n = len(xs)
    h = (n - 1) * q
    lo = int(math.floor(h))
    if lo >= n - 1:
        return float(xs[-1])
    return float(xs[lo] + (h - lo) * (xs[lo + 1] - xs[lo]))


def pointwise_quantile_selection(sample: FunctionalSample, coordinate,
                                 lower_q: float, upper_q: float) -> np.ndarray:
    """Devices whose endpoint lies in the closed empirical-quantile interval."""
    if not 0 <= lower_q < upper_q <= 1:
        raise DomainError(f"need 0 <= lower_q < upper_q <= 1, got ({lower_q}, {upper_q})")
    vals = endpoint_values(sample, coordinate)
    lo = empirical_quantile(vals, lower_q)
    hi = empirical_quantile(vals, upper_q)
    return np.nonzero((vals >= lo) & (vals <= hi))[0]


def selection_comparison(sample: FunctionalSample, H_functional, H_pointwise,
                         coordinate, edges) -> SelectionComparison:
    """Endpoint histograms of both selections and their difference (pointwise - functional)."""
    hp = endpoint_histogram(sample, H_pointwise, coordinate, edges)
    hf = endpoint_histogram(sample, H_functional, coordinate, edges)
    return SelectionComparison(hp, hf, hp.counts - hf.counts,
                               hp.underflow - hf.underflow, hp.overflow - hf.overflow)


def classical_profile_export(hist: MissionProfileHistogram,
                             labels: Sequence[str] | None = None) -> list[dict]:
    """Rows ``(label, lower, upper, duration_sum, duration_avg, share)``.

    Out-of-range rows are appended only when they carry time. Shares are
    fractions of the total emitted duration.
    """
    M = len(hist.durations)
    if labels is not None and len(labels) != M:
        raise DomainError(f"{len(labels)} labels for {M} bins")
    rows = []
    for m in range(M):
        lo, hi = float(hist.edges[m]), float(hist.edges[m + 1])
        rows.append({
            "label": labels[m] if labels is not None else f"[{lo:g}, {hi:g})",
            "lower": lo,
            "upper": hi,
            "duration_sum": float(hist.durations[m]),
        })
    if hist.underflow > 0:
        rows.insert(0, {"label": "underflow", "lower": -math.inf,
                        "upper": float(hist.edges[0]), "duration_sum": hist.underflow})
    if hist.overflow > 0:
        rows.append({"label": "overflow", "lower": float(hist.edges[-1]),
                     "upper": math.inf, "duration_sum": hist.overflow})
    total = sum(r["duration_sum"] for r in rows)
    for r in rows:
        r["duration_avg"] = r["duration_sum"] / hist.device_count
        r["share"] = r["duration_sum"] / total if total > 0 else 0.0
    return rows


def residence_csv(hist: MissionProfileHistogram) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESIDENCE_HEADER)
    for r in classical_profile_export(hist):
        w.writerow([repr(r["lower"]), repr(r["upper"]), repr(r["duration_sum"]),
                    repr(r["duration_avg"]), repr(r["share"])])
    return buf.getvalue()
