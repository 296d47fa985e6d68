"""Penalized least-squares smoothing of raw telemetry onto a B-spline basis."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import linalg

from .basis import BasisSystem, eval_basis, penalty_matrix
from .errors import DomainError, RankDeficiencyError
from .fdcore import FunctionalDatum

logger = logging.getLogger(__name__)

__all__ = [
    "RawSeries",
    "SmoothingConfig",
    "fit_coordinate",
    "smooth_device",
    "select_lambda_gcv",
    "gcv_score",
    "design_matrix",
]

_DESIGN_CACHE_SIZE = 8


@dataclass(frozen=True)
class RawSeries:
    """Discrete observations of one parameter of one device."""

    device_id: str
    coordinate: int
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        y = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or y.shape != t.shape:
            raise DomainError(
                f"device {self.device_id!r} coordinate {self.coordinate}: "
                f"times and values must be 1-d of equal length"
            )
        if len(t) < 2:
            raise DomainError(f"device {self.device_id!r}: need at least 2 observations")
        if np.any(np.diff(t) <= 0):
            raise DomainError(
                f"device {self.device_id!r} coordinate {self.coordinate}: "
                "times must be strictly increasing (duplicate timestamps are rejected)"
            )
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(y))):
            raise DomainError(f"device {self.device_id!r}: non-finite observation")
        t.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", y)

    @property
    def q(self) -> int:
        return len(self.times)


@dataclass(frozen=True)
class SmoothingConfig:
    """Roughness weight, or a grid to select it from by GCV."""

    lam: float = 1.0
    penalty_order: int = 2
    lambda_grid: tuple[float, ...] | None = None

    def __post_init__(self):
        if not (np.isfinite(self.lam) and self.lam >= 0):
            raise DomainError(f"lambda must be finite and >= 0, got {self.lam}")
        if self.lambda_grid is not None:
            grid = tuple(float(x) for x in self.lambda_grid)
            if not grid:
                raise DomainError("lambda_grid must not be empty")
            if any(not (np.isfinite(x) and x > 0) for x in grid):
                raise DomainError("lambda_grid entries must be positive and finite")
            object.__setattr__(self, "lambda_grid", grid)


def design_matrix(basis: BasisSystem, times: np.ndarray) -> np.ndarray:
    """``Phi[l, k] = phi_k(t_l)``, cached per time grid."""
    times = np.asarray(times, dtype=float)
    key = ("design", times.shape, hash(times.tobytes()))
    cache = basis._cache
    hit = cache.get(key)
    if hit is not None and np.array_equal(hit[0], times):
        return hit[1]
    Phi = eval_basis(basis, times)
    Phi.setflags(write=False)
    designs = [k for k in cache if k[0] == "design"]
    if len(designs) >= _DESIGN_CACHE_SIZE:
        del cache[designs[0]]
    cache[key] = (times.copy(), Phi)
    return Phi


def _check_identifiable(basis, series, lam, d, Phi):
    """Raise if ``Phi^T Phi + lam R`` is singular.

    The system is singular exactly when some nonzero ``c`` has ``Phi c = 0``
    and (for ``lam > 0``) ``R c = 0``. The null space of ``R`` is the
    polynomials of degree < d, which ``d`` distinct times pin down.
    """
    q, K = Phi.shape
    if lam > 0:
        if q < d:
            raise RankDeficiencyError(
                f"device {series.device_id!r} coordinate {series.coordinate}: "
                f"{q} observation times cannot determine the degree-{d - 1} "
                f"polynomials left unpenalized (penalty order {d})"
            )
        return
    rank = np.linalg.matrix_rank(Phi)
    if rank < K:
        spans = np.unique(np.searchsorted(np.unique(basis.knots), series.times, side="right"))
        raise RankDeficiencyError(
            f"device {series.device_id!r} coordinate {series.coordinate}: "
            f"lambda=0 with q={q} observations covering {len(spans)} knot span(s) "
            f"leaves the K={K} coefficients underdetermined (rank {rank})"
        )


def _factor(basis, series, lam, d):
    Phi = design_matrix(basis, series.times)
    _check_identifiable(basis, series, lam, d, Phi)
    R = penalty_matrix(basis, d)
    A = Phi.T @ Phi + lam * R
    try:
        cf = linalg.cho_factor(A, lower=True, check_finite=False)
    except linalg.LinAlgError as exc:
        raise RankDeficiencyError(
            f"device {series.device_id!r} coordinate {series.coordinate}: system matrix "
            f"not positive definite (q={series.q}, K={basis.n_basis}, lambda={lam})"
        ) from exc
    return Phi, R, cf


def fit_coordinate(basis: BasisSystem, series: RawSeries, lam: float,
                   penalty_order: int | None = None) -> np.ndarray:
    """Coefficients minimizing ``||y - Phi c||^2 + lam * c^T R c``.

    Solves ``(Phi^T Phi + lam R) c = Phi^T y`` by Cholesky factorization.
    ``penalty_order`` defaults to the basis' own.
    """
    if not (np.isfinite(lam) and lam >= 0):
        raise DomainError(f"lambda must be finite and >= 0, got {lam}")
    d = basis.penalty_order if penalty_order is None else penalty_order
    _check_domain(basis, series)
    Phi, _, cf = _factor(basis, series, lam, d)
    return linalg.cho_solve(cf, Phi.T @ series.values, check_finite=False)


def _check_domain(basis, series):
    t = series.times
    if t[0] < basis.domain_start or t[-1] > basis.domain_end:
        raise DomainError(
            f"device {series.device_id!r} coordinate {series.coordinate}: times "
            f"[{t[0]}, {t[-1]}] exceed the basis domain "
            f"[{basis.domain_start}, {basis.domain_end}]"
        )


def gcv_score(basis: BasisSystem, series: RawSeries, lam: float,
              penalty_order: int | None = None) -> float:
    """``q * RSS / (q - tr H)^2`` with ``H = Phi (Phi^T Phi + lam R)^-1 Phi^T``."""
    d = basis.penalty_order if penalty_order is None else penalty_order
    Phi, _, cf = _factor(basis, series, lam, d)
    y = series.values
    c = linalg.cho_solve(cf, Phi.T @ y, check_finite=False)
    resid = y - Phi @ c
    rss = float(resid @ resid)
    # below this RSS is indistinguishable from rounding noise
    floor = 1e-16 * float(y @ y)
    if rss <= floor:
        rss = 0.0
    trace = float(np.trace(linalg.cho_solve(cf, Phi.T @ Phi, check_finite=False)))
    q = series.q
    denom = (q - trace) ** 2
    if denom <= 0:
        return 0.0 if rss == 0.0 else np.inf
    return q * rss / denom


def select_lambda_gcv(basis: BasisSystem, series: RawSeries,
                      lambda_grid: Sequence[float],
                      penalty_order: int | None = None) -> float:
    """Grid element with the smallest GCV score; ties go to the larger lambda."""
    grid = [float(x) for x in lambda_grid]
    if not grid:
        raise DomainError("lambda_grid must not be empty")
    _check_domain(basis, series)
    scores = []
    for lam in grid:
        try:
            scores.append(gcv_score(basis, series, lam, penalty_order))
        except RankDeficiencyError:
            scores.append(np.nan)
    scores = np.asarray(scores)
    if np.all(np.isnan(scores)):
        raise RankDeficiencyError(
            f"device {series.device_id!r} coordinate {series.coordinate}: "
            "every lambda in the grid gives a singular system"
        )
    best = np.nanmin(scores)
    tol = 1e-12 * abs(best)
    tied = [lam for lam, s in zip(grid, scores) if not np.isnan(s) and s <= best + tol]
    return max(tied)


def smooth_device(bases: BasisSystem | Sequence[BasisSystem],
                  series_set: Sequence[RawSeries],
                  config: SmoothingConfig,
                  labels: Sequence[str] | None = None) -> FunctionalDatum:
    """Fit every coordinate of one device independently.

    ``series_set`` must contain exactly one series per coordinate
    ``0..p-1``; coordinates may be observed on different time grids.
    """
    by_coord = {}
    for s in series_set:
        if s.coordinate in by_coord:
            raise DomainError(f"coordinate {s.coordinate} given twice")
        by_coord[s.coordinate] = s
    p = len(by_coord)
    if p == 0 or sorted(by_coord) != list(range(p)):
        missing = sorted(set(range(max(by_coord, default=-1) + 1)) - set(by_coord))
        raise DomainError(f"missing coordinate(s) {missing or [0]}")
    if isinstance(bases, BasisSystem):
        bases = (bases,) * p
    bases = tuple(bases)
    if len(bases) != p:
        raise DomainError(f"{len(bases)} bases for {p} coordinates")

    coefs = []
    for j in range(p):
        s, b = by_coord[j], bases[j]
        try:
            lam = config.lam
            if config.lambda_grid is not None:
                lam = select_lambda_gcv(b, s, config.lambda_grid, config.penalty_order)
                logger.debug("device %s coordinate %d: GCV lambda=%g", s.device_id, j, lam)
            coefs.append(fit_coordinate(b, s, lam, config.penalty_order))
        except RankDeficiencyError as exc:
            raise RankDeficiencyError(f"coordinate {j}: {exc}") from exc
    device_id = series_set[0].device_id
    return FunctionalDatum(bases, tuple(coefs), labels=tuple(labels) if labels else None,
                           device_id=device_id)
