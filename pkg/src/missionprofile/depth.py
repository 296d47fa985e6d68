"""Robust center-outward ordering of (multivariate) functional data.

The engine is the skew-adjusted projection outlyingness: a univariate
adjusted-boxplot outlyingness (medcouple-corrected whiskers) maximized over
a finite set of projection directions, then averaged over time. Directional
outlyingness (MO/VO/FO), modified band depth and the functional boxplot
build on top of it.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import (
    DegenerateCrossSectionError,
    DegenerateScaleError,
    DegenerateScaleWarning,
    DomainError,
)
from .fdcore import FunctionalSample

__all__ = [
    "EvaluationGrid",
    "DirectionSet",
    "OutlyingnessReport",
    "FunctionalBoxplot",
    "medcouple",
    "adjusted_outlyingness_1d",
    "adjusted_outlyingness_point",
    "pointwise_outlyingness",
    "functional_adjusted_outlyingness",
    "directional_outlyingness",
    "depth_from_outlyingness",
    "central_region",
    "central_region_size",
    "modified_band_depth",
    "functional_boxplot",
    "flag_outliers",
    "outlyingness_report",
]

DEFAULT_GRID_SIZE = 512
MAX_SKIPPED_FRACTION = 0.5


@dataclass(frozen=True, eq=False)
class EvaluationGrid:
    """Grid times with trapezoid weights summing to the domain length."""

    times: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if t.ndim != 1 or len(t) < 2:
            raise DomainError("an evaluation grid needs at least 2 points")
        if np.any(np.diff(t) <= 0):
            raise DomainError("grid times must be strictly increasing")
        if w.shape != t.shape or np.any(w <= 0):
            raise DomainError("grid weights must be positive, one per time")
        t.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "weights", w)

    @classmethod
    def trapezoid(cls, times) -> "EvaluationGrid":
        t = np.asarray(times, dtype=float)
        if t.ndim != 1 or len(t) < 2:
            raise DomainError("an evaluation grid needs at least 2 points")
        dt = np.diff(t)
        w = np.zeros_like(t)
        w[:-1] += dt / 2
        w[1:] += dt / 2
        return cls(t, w)

    @classmethod
    def uniform(cls, start: float, end: float, size: int = DEFAULT_GRID_SIZE) -> "EvaluationGrid":
        if size < 2:
            raise DomainError(f"grid size must be >= 2, got {size}")
        return cls.trapezoid(np.linspace(start, end, size))

    @property
    def size(self) -> int:
        return len(self.times)

    @property
    def length(self) -> float:
        """Total weight, i.e. the domain length ``T``."""
        return float(self.weights.sum())


@dataclass(frozen=True, eq=False)
class DirectionSet:
    """Seeded projection directions in ``R^p``.

    Half of the directions (``pairs``) are normalized differences of two
    cloud points and are only materialized for a concrete cloud; the other
    half are uniform on the sphere. For ``p = 1`` the set is ``{+1, -1}``.
    """

    seed: int
    count: int
    p: int
    uniform: np.ndarray
    pairs: np.ndarray

    @classmethod
    def generate(cls, p: int, n: int, count: int | None = None, seed: int = 0) -> "DirectionSet":
        """Directions for clouds of ``n`` points in ``R^p``.

        ``count`` defaults to ``max(250, 50 p)``.
        """
        if p < 1:
            raise DomainError(f"dimension must be >= 1, got {p}")
        if count is None:
            count = max(250, 50 * p)
        if count < 1:
            raise DomainError(f"direction count must be >= 1, got {count}")
        if p == 1:
            return cls(seed, 2, 1, np.array([[1.0], [-1.0]]), np.empty((0, 2), dtype=np.int64))
        rng = np.random.default_rng(seed)
        n_pairs = count // 2 if n >= 2 else 0
        g = rng.standard_normal((count - n_pairs, p))
        lengths = np.linalg.norm(g, axis=1)
        g = g[lengths > 0] / lengths[lengths > 0, None]
        pairs = np.empty((n_pairs, 2), dtype=np.int64)
        if n_pairs:
            a = rng.integers(0, n, n_pairs)
            b = (a + rng.integers(1, n, n_pairs)) % n
            pairs[:, 0], pairs[:, 1] = a, b
        return cls(seed, count, p, g, pairs)

    @classmethod
    def from_array(cls, directions) -> "DirectionSet":
        dirs = np.atleast_2d(np.asarray(directions, dtype=float))
        lengths = np.linalg.norm(dirs, axis=1)
        if np.any(lengths == 0):
            raise DomainError("zero direction vector")
        dirs = dirs / lengths[:, None]
        return cls(-1, len(dirs), dirs.shape[1], dirs, np.empty((0, 2), dtype=np.int64))

    def directions_for(self, cloud: np.ndarray) -> np.ndarray:
        """Concrete unit directions for an ``(n, p)`` cloud."""
        cloud = np.asarray(cloud, dtype=float)
        if cloud.ndim != 2 or cloud.shape[1] != self.p:
            raise DomainError(f"cloud must be (n, {self.p}), got {cloud.shape}")
        if not len(self.pairs):
            return self.uniform
        if self.pairs.max() >= len(cloud):
            raise DomainError("direction pairs reference more points than the cloud has")
        diff = cloud[self.pairs[:, 0]] - cloud[self.pairs[:, 1]]
        lengths = np.sqrt(np.sum(diff * diff, axis=1))
        keep = lengths > 0
        return np.concatenate([diff[keep] / lengths[keep, None], self.uniform])


@dataclass(frozen=True, eq=False)
class OutlyingnessReport:
    device_ids: tuple[str, ...]
    fao: np.ndarray
    depth: np.ndarray
    mo: np.ndarray
    vo: np.ndarray
    fo: np.ndarray
    outlier_flag: np.ndarray
    gamma: float
    central_set: np.ndarray
    warnings: tuple[str, ...] = ()

    @property
    def n(self) -> int:
        return len(self.device_ids)

    @property
    def in_central_set(self) -> np.ndarray:
        mask = np.zeros(self.n, dtype=bool)
        mask[self.central_set] = True
        return mask


@dataclass(frozen=True, eq=False)
class FunctionalBoxplot:
    depth: np.ndarray
    order: np.ndarray
    median_index: int
    central50_lower: np.ndarray
    central50_upper: np.ndarray
    fence_lower: np.ndarray
    fence_upper: np.ndarray
    central95_lower: np.ndarray
    central95_upper: np.ndarray
    outlier_indices: np.ndarray


# -- univariate building blocks ------------------------------------------------

def medcouple(values) -> float:
    """Medcouple of a sample of at least 3 values.

    The kernel ``((x_b - m) - (m - x_a)) / (x_b - x_a)`` is evaluated on
    every pair ``x_a <= m <= x_b`` with ``x_a < x_b``, ``m`` the sample
    median, and the median of those kernel values is returned.

    >>> medcouple([0.0, 1.0, 10.0])
    0.8
    """
    x = np.sort(np.asarray(values, dtype=float).ravel())
    if len(x) < 3:
        raise DomainError(f"medcouple needs at least 3 values, got {len(x)}")
    if x[0] == x[-1]:
        raise DegenerateScaleError("medcouple of a sample whose values are all equal")
    return float(_kernels.medcouple_sorted(x))


def _boxplot(sample):
    xs = np.sort(np.asarray(sample, dtype=float).ravel())
    if len(xs) < 4:
        raise DomainError(f"adjusted outlyingness needs at least 4 values, got {len(xs)}")
    mc = _kernels.medcouple_sorted(xs) if xs[0] != xs[-1] else math.nan
    m, w1, w2, ok = _kernels.boxplot_stats_py(xs, mc)
    if not ok:
        raise DegenerateScaleError("sample has zero interquartile range")
    return m, w1, w2


def adjusted_outlyingness_1d(z: float, sample) -> float:
    """Skew-adjusted outlyingness of ``z`` with respect to ``sample``.

    Distance to the median, scaled by the distance from the median to the
    adjusted-boxplot whisker on the side of ``z``.
    """
    m, w1, w2 = _boxplot(sample)
    return float(_kernels.ao_scalar(float(z), m, w1, w2))


def _resolve_directions(dirs, cloud):
    if isinstance(dirs, DirectionSet):
        return dirs.directions_for(cloud)
    return np.atleast_2d(np.asarray(dirs, dtype=float))


def _project(points, directions):
    # (D, m): elementwise product reduced over the coordinate axis
    return np.sum(points[None, :, :] * directions[:, None, :], axis=2)


def _ao_cross_section(cloud, points, directions, time=None, floor=0.0):
    out, skipped = _kernels.ao_max(_project(cloud, directions), _project(points, directions), floor)
    D = len(directions)
    if D == 0 or skipped > MAX_SKIPPED_FRACTION * D or not np.all(np.isfinite(out)):
        where = "" if time is None else f" at t={time:g}"
        raise DegenerateCrossSectionError(
            f"{skipped} of {D} projection directions have zero spread{where}", time=time
        )
    return out


def adjusted_outlyingness_point(x, cloud, dirs) -> float:
    """Max over ``dirs`` of the univariate adjusted outlyingness of ``a^T x``.

    Directions whose projected cloud has no scale are skipped; more than
    half skipped is an error.
    """
    cloud = np.atleast_2d(np.asarray(cloud, dtype=float))
    x = np.asarray(x, dtype=float).reshape(1, -1)
    if cloud.shape[0] < 4:
        raise DomainError(f"need at least 4 cloud points, got {cloud.shape[0]}")
    if x.shape[1] != cloud.shape[1]:
        raise DomainError("point and cloud dimensions differ")
    directions = _resolve_directions(dirs, cloud)
    return float(_ao_cross_section(cloud, x, directions)[0])


# -- functional outlyingness ---------------------------------------------------

def _check_grid(sample, grid):
    start, end = sample.domain
    if grid.times[0] < start or grid.times[-1] > end:
        raise DomainError("evaluation grid exceeds the sample domain")


def _all_identical(values):
    return bool(np.all(values == values[:1]))


def pointwise_outlyingness(sample: FunctionalSample, grid: EvaluationGrid,
                           dirs: DirectionSet | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Cross-sectional AO of every device at every grid time.

    Returns ``(values, ao)`` with ``values`` of shape ``(n, G, p)`` and
    ``ao`` of shape ``(n, G)``.
    """
    if sample.n < 4:
        raise DomainError(f"outlyingness needs at least 4 devices, got {sample.n}")
    _check_grid(sample, grid)
    if dirs is None:
        dirs = DirectionSet.generate(sample.p, sample.n)
    values = sample.evaluate(grid.times)
    # spread below this is rounding noise of the smoothed curves, not scale
    floor = _kernels.SCALE_EPS * float(np.max(np.abs(values)))
    ao = np.empty((sample.n, grid.size))
    for g in range(grid.size):
        cloud = values[:, g, :]
        directions = dirs.directions_for(cloud)
        ao[:, g] = _ao_cross_section(cloud, cloud, directions, time=float(grid.times[g]),
                                     floor=floor)
    return values, ao


def functional_adjusted_outlyingness(sample: FunctionalSample, grid: EvaluationGrid,
                                     dirs: DirectionSet | None = None) -> np.ndarray:
    """Time average ``(1/T) sum_g w_g AO(x_i(t_g))`` for every device."""
    _, ao = pointwise_outlyingness(sample, grid, dirs)
    return _time_average(ao, grid)


def _time_average(a, grid):
    # a: (n, G) or (n, G, p)
    w = grid.weights
    if a.ndim == 2:
        return a @ w / grid.length
    return np.einsum("ngp,g->np", a, w) / grid.length


def _directional(values, ao, grid):
    n, G, p = values.shape
    med = np.empty((G, p))
    xs = np.sort(values, axis=0)
    h = n // 2
    med[:] = xs[h] if n % 2 else (xs[h - 1] + xs[h]) / 2.0
    diff = values - med[None]
    lengths = np.sqrt(np.sum(diff * diff, axis=2))
    with np.errstate(invalid="ignore", divide="ignore"):
        unit = np.where(lengths[..., None] > 0, diff / lengths[..., None], 0.0)
    o = ao[..., None] * unit
    mo = _time_average(o, grid)
    dev = o - mo[:, None, :]
    vo = _time_average(np.sum(dev * dev, axis=2), grid)
    fo = np.sum(mo * mo, axis=1) + vo
    return mo, vo, fo


def directional_outlyingness(sample: FunctionalSample, grid: EvaluationGrid,
                             dirs: DirectionSet | None = None):
    """Mean directional outlyingness ``MO`` (n, p), variation ``VO`` and ``FO``.

    The signed pointwise outlyingness is ``AO(x_i(t)) u_i(t)`` with ``u_i``
    the unit vector from the coordinatewise cross-sectional median to
    ``x_i(t)``; ``FO = |MO|^2 + VO``.
    """
    values, ao = pointwise_outlyingness(sample, grid, dirs)
    return _directional(values, ao, grid)


def depth_from_outlyingness(scores) -> np.ndarray:
    """``1 / (1 + O)``."""
    o = np.asarray(scores, dtype=float)
    if np.any(o < 0) or np.any(np.isnan(o)):
        raise DomainError("outlyingness scores must be nonnegative")
    return 1.0 / (1.0 + o)


def central_region_size(n: int, gamma: float) -> int:
    """``ceil(n * gamma)``, immune to representation error such as ``10 * 0.7``."""
    if not 0 < gamma <= 1:
        raise DomainError(f"gamma must lie in (0, 1], got {gamma}")
    return min(n, math.ceil(round(n * gamma, 9)))


def central_region(scores, gamma: float) -> np.ndarray:
    """Indices of the ``ceil(n gamma)`` lowest scores, ties to the lower index."""
    scores = np.asarray(scores, dtype=float)
    k = central_region_size(len(scores), gamma)
    order = np.argsort(scores, kind="stable")
    return np.sort(order[:k])


# -- band depth and functional boxplot -----------------------------------------

def modified_band_depth(curves, grid: EvaluationGrid | None = None) -> np.ndarray:
    """Modified band depth of ``n`` univariate curves sampled on a grid.

    For each curve, the weighted proportion of time it lies inside the band
    of every pair of sample curves, averaged over the pairs.
    """
    X = np.asarray(curves, dtype=float)
    if X.ndim != 2:
        raise DomainError("curves must be an (n, G) array")
    n, G = X.shape
    if n < 2:
        raise DomainError(f"band depth needs at least 2 curves, got {n}")
    if grid is None:
        weights, length = np.ones(G), float(G)
    elif grid.size != G:
        raise DomainError("grid size does not match the curves")
    else:
        weights, length = grid.weights, grid.length
    xs = np.sort(X, axis=0)
    below = np.empty((n, G), dtype=np.int64)
    above = np.empty((n, G), dtype=np.int64)
    for g in range(G):
        below[:, g] = np.searchsorted(xs[:, g], X[:, g], side="left")
        above[:, g] = n - np.searchsorted(xs[:, g], X[:, g], side="right")
    total = n * (n - 1) // 2
    inside = total - below * (below - 1) // 2 - above * (above - 1) // 2
    return (inside.astype(float) @ weights) / (length * total)


def _envelope(X, idx):
    sub = X[idx]
    return sub.min(axis=0), sub.max(axis=0)


def functional_boxplot(curves, grid: EvaluationGrid | None = None,
                       factor: float = 1.5) -> FunctionalBoxplot:
    """Sun-Genton functional boxplot ordered by modified band depth."""
    X = np.asarray(curves, dtype=float)
    if X.ndim != 2 or X.shape[0] < 4:
        raise DomainError("functional boxplot needs at least 4 curves")
    n = X.shape[0]
    depth = modified_band_depth(X, grid)
    order = np.argsort(-depth, kind="stable")
    lo50, hi50 = _envelope(X, order[: math.ceil(n / 2)])
    width = hi50 - lo50
    fence_lo = lo50 - factor * width
    fence_hi = hi50 + factor * width
    lo95, hi95 = _envelope(X, order[: central_region_size(n, 0.95)])
    outside = np.any((X < fence_lo) | (X > fence_hi), axis=1)
    return FunctionalBoxplot(
        depth=depth,
        order=order,
        median_index=int(order[0]),
        central50_lower=lo50,
        central50_upper=hi50,
        fence_lower=fence_lo,
        fence_upper=fence_hi,
        central95_lower=lo95,
        central95_upper=hi95,
        outlier_indices=np.nonzero(outside)[0],
    )


# -- flagging and the combined report ------------------------------------------

def flag_outliers(scores) -> np.ndarray:
    """Flag scores beyond the upper adjusted-boxplot fence of the scores.

    A zero interquartile range collapses the fence onto the third quartile;
    that case, and identical scores (no flags), raise a
    :class:`DegenerateScaleWarning`.
    """
    s = np.asarray(scores, dtype=float)
    if len(s) < 4:
        raise DomainError(f"outlier flagging needs at least 4 scores, got {len(s)}")
    xs = np.sort(s)
    if xs[0] == xs[-1]:
        warnings.warn("all outlyingness scores are equal; nothing flagged",
                      DegenerateScaleWarning, stacklevel=2)
        return np.zeros(len(s), dtype=bool)
    mc = _kernels.medcouple_sorted(xs)
    q1 = _kernels._quantile_sorted_py(xs, 0.25)
    q3 = _kernels._quantile_sorted_py(xs, 0.75)
    iqr = q3 - q1
    if not iqr > 0:
        warnings.warn("outlyingness scores have zero interquartile range; "
                      "flagging everything above the third quartile",
                      DegenerateScaleWarning, stacklevel=2)
    _, f_hi = _kernels._fence_factors_py(mc)
    return s > q3 + f_hi * iqr


def outlyingness_report(sample: FunctionalSample, grid: EvaluationGrid,
                        dirs: DirectionSet | None = None, gamma: float = 0.95) -> OutlyingnessReport:
    """fAO, depth, MO/VO/FO, outlier flags and the central set in one pass.

    A sample whose curves are all identical has no spread anywhere; every
    device is then the center (all scores zero) and a warning is recorded.
    """
    notes = []
    values = sample.evaluate(grid.times)
    if sample.n >= 4 and _all_identical(values):
        n, p = sample.n, sample.p
        notes.append("all curves are identical; outlyingness is zero for every device")
        fao = np.zeros(n)
        mo, vo, fo = np.zeros((n, p)), np.zeros(n), np.zeros(n)
        flags = np.zeros(n, dtype=bool)
    else:
        _, ao = pointwise_outlyingness(sample, grid, dirs)
        fao = _time_average(ao, grid)
        mo, vo, fo = _directional(values, ao, grid)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", DegenerateScaleWarning)
            flags = flag_outliers(fao)
        notes.extend(str(w.message) for w in caught)
    return OutlyingnessReport(
        device_ids=sample.device_ids,
        fao=fao,
        depth=depth_from_outlyingness(fao),
        mo=mo,
        vo=vo,
        fo=fo,
        outlier_flag=flags,
        gamma=float(gamma),
        central_set=central_region(fao, gamma),
        warnings=tuple(notes),
    )
