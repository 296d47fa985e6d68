"""Library-level orchestration: telemetry -> functional sample -> analysis."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .basis import BasisSystem, make_bspline_basis
from .depth import (
    DirectionSet,
    EvaluationGrid,
    FunctionalBoxplot,
    OutlyingnessReport,
    functional_boxplot,
    outlyingness_report,
)
from .errors import DomainError
from .fdcore import FunctionalSample
from .smoothing import RawSeries, SmoothingConfig, smooth_device

logger = logging.getLogger(__name__)

DEFAULT_LAMBDA_GRID = tuple(10.0 ** k for k in range(-6, 9))


def make_bases(domain_end: float, n_basis: int | Sequence[int], order: int = 4,
               penalty_order: int = 2, p: int = 1) -> tuple[BasisSystem, ...]:
    """One basis per coordinate; equal settings share a single object."""
    if isinstance(n_basis, (int, np.integer)):
        n_basis = [int(n_basis)] * p
    if len(n_basis) != p:
        raise DomainError(f"{len(n_basis)} basis sizes for {p} coordinates")
    cache = {}
    out = []
    for K in n_basis:
        if K not in cache:
            cache[K] = make_bspline_basis(domain_end, K, order, penalty_order)
        out.append(cache[K])
    return tuple(out)


def smooth_sample(series: Sequence[Sequence[RawSeries]], bases: Sequence[BasisSystem],
                  config: SmoothingConfig, device_ids: Sequence[str] | None = None,
                  labels: Sequence[str] | None = None) -> FunctionalSample:
    """Smooth every device; ``series[i]`` holds the p series of device ``i``."""
    if not series:
        raise DomainError("no devices to smooth")
    data = [smooth_device(bases, s, config, labels) for s in series]
    if device_ids is None:
        device_ids = [s[0].device_id for s in series]
    sample = FunctionalSample.from_data(data, device_ids)
    if labels is not None:
        sample = FunctionalSample(sample.bases, sample.coefs, sample.device_ids, tuple(labels))
    return sample


def reconstruction_rmse(sample: FunctionalSample, series: Sequence[Sequence[RawSeries]]) -> np.ndarray:
    """Per-coordinate RMS residual of the smoothed curves at the observation times."""
    p = sample.p
    sq = np.zeros(p)
    cnt = np.zeros(p)
    for i, dev in enumerate(series):
        datum = sample[i]
        for s in dev:
            j = s.coordinate
            fitted = datum(s.times)[:, j]
            sq[j] += float(np.sum((fitted - s.values) ** 2))
            cnt[j] += s.q
    return np.sqrt(sq / np.maximum(cnt, 1))


@dataclass(frozen=True, eq=False)
class Analysis:
    grid: EvaluationGrid
    report: OutlyingnessReport
    boxplots: tuple[FunctionalBoxplot, ...]
    curves: np.ndarray  # (n, G, p)


def analyze(sample: FunctionalSample, grid_size: int = 512, gamma: float = 0.95,
            directions: int | None = None, seed: int = 0) -> Analysis:
    start, end = sample.domain
    grid = EvaluationGrid.uniform(start, end, grid_size)
    dirs = DirectionSet.generate(sample.p, sample.n, directions, seed)
    report = outlyingness_report(sample, grid, dirs, gamma)
    curves = sample.evaluate(grid.times)
    boxplots = tuple(functional_boxplot(curves[:, :, j], grid) for j in range(sample.p))
    return Analysis(grid, report, boxplots, curves)
