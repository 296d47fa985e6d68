"""Hot loops of the outlyingness engine.

Each kernel exists twice: a numba version and a vectorized numpy version.
They evaluate the same floating-point expressions in the same order, so
results agree bitwise; ``USE_NUMBA`` picks the one used at runtime.

Conventions shared by both paths:

* median of a sorted sample: middle element, or ``(a + b) / 2``;
* quartiles: linear interpolation between order statistics
  (``h = (n - 1) q``);
* medcouple kernel ``((x_b - m) - (m - x_a)) / (x_b - x_a)`` over pairs with
  ``x_a <= m <= x_b`` and ``x_a < x_b``;
* adjusted-boxplot fences ``[Q1 - 1.5 e^{-4MC} IQR, Q3 + 1.5 e^{3MC} IQR]``
  for ``MC >= 0`` and ``[Q1 - 1.5 e^{-3MC} IQR, Q3 + 1.5 e^{4MC} IQR]``
  otherwise.
"""

import math

import numpy as np

from ._accel import USE_NUMBA, njit

FENCE = 1.5
SCALE_EPS = 1e-12


# -- scalar helpers (plain python; also compiled by numba) ---------------------

def _median_sorted_py(x):
    n = x.shape[0]
    h = n // 2
    if n % 2:
        return x[h]
    return (x[h - 1] + x[h]) / 2.0


def _quantile_sorted_py(x, q):
    n = x.shape[0]
    h = (n - 1) * q
    lo = int(math.floor(h))
    if lo >= n - 1:
        return x[n - 1]
    frac = h - lo
    return x[lo] + frac * (x[lo + 1] - x[lo])


def _fence_factors_py(mc):
    if mc >= 0:
        return FENCE * math.exp(-4.0 * mc), FENCE * math.exp(3.0 * mc)
    return FENCE * math.exp(-3.0 * mc), FENCE * math.exp(4.0 * mc)


_median_sorted_nb = njit(_median_sorted_py)
_quantile_sorted_nb = njit(_quantile_sorted_py)
_fence_factors_nb = njit(_fence_factors_py)


# -- medcouple -----------------------------------------------------------------

def medcouple_sorted_numpy(x):
    """Medcouple of an ascending array; ``nan`` if every value is equal."""
    m = _median_sorted_py(x)
    lo = x[x <= m]
    hi = x[x >= m]
    A = lo[:, None]
    B = hi[None, :]
    valid = A < B
    if not np.any(valid):
        return np.nan
    num = (B - m) - (m - A)
    den = B - A
    h = np.sort((num[valid] / den[valid]))
    return _median_sorted_py(h)


@njit
def medcouple_sorted_numba(x):
    m = _median_sorted_nb(x)
    n = x.shape[0]
    buf = np.empty(n * n)
    k = 0
    for a in range(n):
        xa = x[a]
        if xa > m:
            break
        for b in range(n - 1, -1, -1):
            xb = x[b]
            if xb < m or xb <= xa:
                break
            buf[k] = ((xb - m) - (m - xa)) / (xb - xa)
            k += 1
    if k == 0:
        return np.nan
    # quickselect; picks the same order statistics as a full sort
    return np.median(buf[:k])


def medcouple_sorted(x):
    if USE_NUMBA:
        return medcouple_sorted_numba(x)
    return medcouple_sorted_numpy(x)


# -- adjusted boxplot statistics for one sorted sample -------------------------

def boxplot_stats_py(xs, mc):
    """``(median, w_lower, w_upper, ok)`` for an ascending sample with medcouple ``mc``.

    ``ok`` is False when the sample has no usable scale (zero IQR or a
    whisker coinciding with the median).
    """
    m = _median_sorted_py(xs)
    q1 = _quantile_sorted_py(xs, 0.25)
    q3 = _quantile_sorted_py(xs, 0.75)
    iqr = q3 - q1
    if not iqr > SCALE_EPS * max(abs(q1), abs(q3)) or math.isnan(mc):
        return m, m, m, False
    f_lo, f_hi = _fence_factors_py(mc)
    lo_fence = q1 - f_lo * iqr
    hi_fence = q3 + f_hi * iqr
    w1 = xs[np.searchsorted(xs, lo_fence, side="left")]
    w2 = xs[np.searchsorted(xs, hi_fence, side="right") - 1]
    ok = w2 > m and w1 < m
    return m, w1, w2, ok


def ao_scalar(z, m, w1, w2):
    if z > m:
        return (z - m) / (w2 - m)
    if z < m:
        return (m - z) / (m - w1)
    return 0.0


# -- projected adjusted outlyingness -------------------------------------------

@njit
def ao_max_numba(proj_cloud, proj_points, floor):
    """Max over directions of the adjusted outlyingness of each point.

    ``proj_cloud`` is ``(D, n)``, ``proj_points`` ``(D, m)``. A direction is
    degenerate when its IQR does not exceed ``floor`` or ``SCALE_EPS`` times
    the quartile magnitudes. Returns the per-point maximum and the number of
    degenerate (skipped) directions.
    """
    D, n = proj_cloud.shape
    m_pts = proj_points.shape[1]
    out = np.full(m_pts, -np.inf)
    skipped = 0
    for d in range(D):
        xs = np.sort(proj_cloud[d])
        mc = medcouple_sorted_numba(xs)
        med = _median_sorted_nb(xs)
        q1 = _quantile_sorted_nb(xs, 0.25)
        q3 = _quantile_sorted_nb(xs, 0.75)
        iqr = q3 - q1
        if not iqr > max(SCALE_EPS * max(abs(q1), abs(q3)), floor) or math.isnan(mc):
            skipped += 1
            continue
        f_lo, f_hi = _fence_factors_nb(mc)
        lo_fence = q1 - f_lo * iqr
        hi_fence = q3 + f_hi * iqr
        w1 = xs[np.searchsorted(xs, lo_fence, side="left")]
        w2 = xs[np.searchsorted(xs, hi_fence, side="right") - 1]
        if not (w2 > med and w1 < med):
            skipped += 1
            continue
        for i in range(m_pts):
            z = proj_points[d, i]
            if z > med:
                ao = (z - med) / (w2 - med)
            elif z < med:
                ao = (med - z) / (med - w1)
            else:
                ao = 0.0
            if ao > out[i]:
                out[i] = ao
    return out, skipped


def _medcouple_rows_numpy(xs, med):
    """Row-wise medcouple of a ``(D, n)`` array of ascending rows."""
    D, n = xs.shape
    A = xs[:, :, None]
    B = xs[:, None, :]
    m = med[:, None, None]
    valid = (A <= m) & (B >= m) & (A < B)
    with np.errstate(invalid="ignore", divide="ignore"):
        h = ((B - m) - (m - A)) / (B - A)
    h = np.where(valid, h, np.nan).reshape(D, n * n)
    h.sort(axis=1)
    k = valid.reshape(D, n * n).sum(axis=1)
    out = np.full(D, np.nan)
    rows = np.nonzero(k > 0)[0]
    kk = k[rows]
    half = kk // 2
    odd = kk % 2 == 1
    mid = h[rows, half]
    lower = h[rows, np.maximum(half - 1, 0)]
    out[rows] = np.where(odd, mid, (lower + mid) / 2.0)
    return out


def _quantile_rows_numpy(xs, q):
    n = xs.shape[1]
    h = (n - 1) * q
    lo = int(math.floor(h))
    if lo >= n - 1:
        return xs[:, n - 1]
    frac = h - lo
    return xs[:, lo] + frac * (xs[:, lo + 1] - xs[:, lo])


def ao_max_numpy(proj_cloud, proj_points, floor):
    D, n = proj_cloud.shape
    xs = np.sort(proj_cloud, axis=1)
    h = n // 2
    med = xs[:, h] if n % 2 else (xs[:, h - 1] + xs[:, h]) / 2.0
    q1 = _quantile_rows_numpy(xs, 0.25)
    q3 = _quantile_rows_numpy(xs, 0.75)
    iqr = q3 - q1
    mc = _medcouple_rows_numpy(xs, med)
    ok = (iqr > np.maximum(SCALE_EPS * np.maximum(np.abs(q1), np.abs(q3)), floor)) & ~np.isnan(mc)
    factors = np.array([_fence_factors_py(v) if not math.isnan(v) else (0.0, 0.0)
                        for v in mc.tolist()]).reshape(D, 2)
    lo_fence = q1 - factors[:, 0] * iqr
    hi_fence = q3 + factors[:, 1] * iqr
    i_lo = np.array([np.searchsorted(xs[d], lo_fence[d], side="left") for d in range(D)])
    i_hi = np.array([np.searchsorted(xs[d], hi_fence[d], side="right") - 1 for d in range(D)])
    rows = np.arange(D)
    w1 = xs[rows, np.clip(i_lo, 0, n - 1)]
    w2 = xs[rows, np.clip(i_hi, 0, n - 1)]
    ok &= (w2 > med) & (w1 < med)
    skipped = int(D - ok.sum())
    if not ok.any():
        return np.full(proj_points.shape[1], -np.inf), skipped
    z = proj_points[ok]
    med, w1, w2 = med[ok, None], w1[ok, None], w2[ok, None]
    with np.errstate(invalid="ignore", divide="ignore"):
        up = (z - med) / (w2 - med)
        down = (med - z) / (med - w1)
    ao = np.where(z > med, up, np.where(z < med, down, 0.0))
    return ao.max(axis=0), skipped


def ao_max(proj_cloud, proj_points, floor=0.0):
    proj_cloud = np.ascontiguousarray(proj_cloud, dtype=np.float64)
    proj_points = np.ascontiguousarray(proj_points, dtype=np.float64)
    if USE_NUMBA:
        return ao_max_numba(proj_cloud, proj_points, float(floor))
    return ao_max_numpy(proj_cloud, proj_points, float(floor))
