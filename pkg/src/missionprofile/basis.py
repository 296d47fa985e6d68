"""Clamped B-spline basis systems with exact Gram and roughness matrices."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BSpline

from .errors import DomainError

__all__ = [
    "BasisSystem",
    "make_bspline_basis",
    "eval_basis",
    "eval_basis_deriv",
    "penalty_matrix",
    "gram_matrix",
]


@dataclass(frozen=True, eq=False)
class BasisSystem:
    """A family of ``n_basis`` B-splines of a given ``order`` on ``[0, T]``.

    Attributes
    ----------
    domain_start, domain_end : float
        Domain of the basis. ``domain_start`` is 0 for bases built by
        :func:`make_bspline_basis`.
    order : int
        Polynomial degree + 1.
    knots : ndarray
        Full knot vector, boundary knots repeated ``order`` times.
    penalty_order : int
        Derivative order used for :attr:`penalty`.
    """

    domain_start: float
    domain_end: float
    order: int
    knots: np.ndarray
    penalty_order: int = 2
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float)
        knots.setflags(write=False)
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "domain_start", float(self.domain_start))
        object.__setattr__(self, "domain_end", float(self.domain_end))
        _check_knots(knots, self.order, self.domain_start, self.domain_end)
        if not 0 <= self.penalty_order < self.order:
            raise DomainError(
                f"penalty_order must satisfy 0 <= d < order={self.order}, "
                f"got {self.penalty_order}; the penalty would vanish identically"
            )

    @property
    def n_basis(self) -> int:
        return len(self.knots) - self.order

    @property
    def degree(self) -> int:
        return self.order - 1

    @property
    def gram(self) -> np.ndarray:
        return gram_matrix(self)

    @property
    def penalty(self) -> np.ndarray:
        return penalty_matrix(self, self.penalty_order)

    def _spline(self, d: int) -> BSpline:
        key = ("spline", d)
        if key not in self._cache:
            spl = BSpline(self.knots, np.eye(self.n_basis), self.degree, extrapolate=False)
            if d:
                spl = spl.derivative(d)
            self._cache[key] = spl
        return self._cache[key]

    def same_as(self, other: "BasisSystem") -> bool:
        return self is other or (
            self.order == other.order
            and self.domain_start == other.domain_start
            and self.domain_end == other.domain_end
            and self.knots.shape == other.knots.shape
            and bool(np.all(self.knots == other.knots))
        )

    def to_dict(self) -> dict:
        return {
            "kind": "bspline",
            "domain": [self.domain_start, self.domain_end],
            "order": self.order,
            "penalty_order": self.penalty_order,
            "knots": self.knots.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BasisSystem":
        if d.get("kind", "bspline") != "bspline":
            raise DomainError(f"unsupported basis kind {d.get('kind')!r}")
        start, end = d["domain"]
        return cls(start, end, int(d["order"]), np.asarray(d["knots"], dtype=float),
                   int(d.get("penalty_order", 2)))


def _check_knots(knots, order, start, end):
    if order < 1:
        raise DomainError(f"order must be >= 1, got {order}")
    if not end > start:
        raise DomainError(f"empty domain [{start}, {end}]")
    if knots.ndim != 1 or len(knots) < 2 * order:
        raise DomainError("knot vector too short for the requested order")
    if np.any(np.diff(knots) < 0):
        raise DomainError("knots must be nondecreasing")
    if knots[0] != start or knots[-1] != end:
        raise DomainError("boundary knots must coincide with the domain ends")
    n_lo = int(np.sum(knots == start))
    n_hi = int(np.sum(knots == end))
    if n_lo != order or n_hi != order:
        raise DomainError(
            f"boundary knots must have multiplicity exactly {order}, got {n_lo} and {n_hi}"
        )


def make_bspline_basis(T: float, K: int, order: int = 4, penalty_order: int = 2) -> BasisSystem:
    """Clamped B-spline basis on ``[0, T]`` with uniform interior knots.

    Raises
    ------
    DomainError
        If ``T <= 0``, ``K < order`` or ``penalty_order >= order``.
    """
    if not T > 0:
        raise DomainError(f"T must be positive, got {T}")
    if order < 1:
        raise DomainError(f"order must be >= 1, got {order}")
    if K < order:
        raise DomainError(f"need K >= order, got K={K}, order={order}")
    if not 0 <= penalty_order < order:
        raise DomainError(
            f"penalty_order must satisfy 0 <= d < order={order}, got {penalty_order}"
        )
    interior = np.linspace(0.0, T, K - order + 2)[1:-1]
    knots = np.concatenate([np.zeros(order), interior, np.full(order, float(T))])
    return BasisSystem(0.0, float(T), int(order), knots, int(penalty_order))


def _as_times(basis: BasisSystem, t) -> tuple[np.ndarray, bool]:
    arr = np.asarray(t, dtype=float)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    if arr.size and (np.any(arr < basis.domain_start) or np.any(arr > basis.domain_end)
                     or np.any(np.isnan(arr))):
        bad = arr[(arr < basis.domain_start) | (arr > basis.domain_end) | np.isnan(arr)][0]
        raise DomainError(
            f"t={bad} outside basis domain [{basis.domain_start}, {basis.domain_end}]"
        )
    return arr, scalar


def eval_basis_deriv(basis: BasisSystem, t, d: int) -> np.ndarray:
    """``d``-th derivatives of all basis functions at ``t``.

    A scalar ``t`` gives a ``(K,)`` vector, an array gives ``(len(t), K)``.
    """
    if not 0 <= d < basis.order:
        raise DomainError(f"derivative order d={d} not in [0, {basis.order})")
    arr, scalar = _as_times(basis, t)
    out = basis._spline(d)(arr)
    out = np.nan_to_num(out, nan=0.0)
    if d == 0:
        np.clip(out, 0.0, 1.0, out=out)
    return out[0] if scalar else out


def eval_basis(basis: BasisSystem, t) -> np.ndarray:
    """Values ``(phi_1(t), ..., phi_K(t))``; the right endpoint uses the left limit."""
    return eval_basis_deriv(basis, t, 0)


def _span_quadrature(basis: BasisSystem) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes/weights on every nonempty knot span."""
    nodes, weights = np.polynomial.legendre.leggauss(basis.order + 1)
    breaks = np.unique(basis.knots)
    a, b = breaks[:-1], breaks[1:]
    half = 0.5 * (b - a)
    t = (0.5 * (a + b))[:, None] + half[:, None] * nodes[None, :]
    w = half[:, None] * weights[None, :]
    return t.ravel(), w.ravel()


def _integrate_products(basis: BasisSystem, d: int) -> np.ndarray:
    t, w = _span_quadrature(basis)
    B = eval_basis_deriv(basis, t, d)
    M = (B * w[:, None]).T @ B
    return 0.5 * (M + M.T)


def gram_matrix(basis: BasisSystem) -> np.ndarray:
    """``G[k, m] = integral of phi_k * phi_m`` over the domain."""
    key = ("gram",)
    if key not in basis._cache:
        G = _integrate_products(basis, 0)
        G.setflags(write=False)
        basis._cache[key] = G
    return basis._cache[key]


def penalty_matrix(basis: BasisSystem, d: int) -> np.ndarray:
    """``R[k, m] = integral of phi_k^(d) * phi_m^(d)`` over the domain.

    Per-span Gauss-Legendre with ``order + 1`` nodes integrates these
    piecewise polynomials exactly.
    """
    if not 0 <= d < basis.order:
        raise DomainError(
            f"penalty derivative order d={d} must be < order={basis.order}"
        )
    if d == 0:
        return gram_matrix(basis)
    key = ("penalty", d)
    if key not in basis._cache:
        R = _integrate_products(basis, d)
        R.setflags(write=False)
        basis._cache[key] = R
    return basis._cache[key]
