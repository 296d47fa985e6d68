"""Multivariate functional data in coefficient space.

Every integral (inner products, the covariance operator) is evaluated
exactly through per-coordinate Gram matrices; nothing here performs
runtime quadrature.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .basis import BasisSystem, eval_basis
from .errors import BasisMismatchError, DegenerateScaleError, DomainError

__all__ = [
    "FunctionalDatum",
    "FunctionalSample",
    "CovarianceModel",
    "evaluate",
    "inner_product",
    "norm",
    "mean_function",
    "covariance_function",
    "eval_covariance",
    "apply_covariance_operator",
    "sample_to_json",
    "sample_from_json",
    "covariance_to_json",
    "covariance_from_json",
    "SAMPLE_FORMAT",
]

SAMPLE_FORMAT = "missionprofile.functional-sample"
COVARIANCE_FORMAT = "missionprofile.covariance-model"
FORMAT_VERSION = 1


def _check_bases(bases):
    bases = tuple(bases)
    if not bases:
        raise DomainError("need at least one coordinate")
    start, end = bases[0].domain_start, bases[0].domain_end
    for b in bases[1:]:
        if b.domain_start != start or b.domain_end != end:
            raise DomainError("all coordinates must share one domain [0, T]")
    return bases


def _same_bases(a, b):
    return len(a) == len(b) and all(x.same_as(y) for x, y in zip(a, b))


@dataclass(frozen=True, eq=False)
class FunctionalDatum:
    """One device's smoothed p-variate function.

    ``coefs[j]`` holds the basis coefficients of coordinate ``j`` on
    ``bases[j]``.
    """

    bases: tuple[BasisSystem, ...]
    coefs: tuple[np.ndarray, ...]
    labels: tuple[str, ...] | None = None
    device_id: str | None = None

    def __post_init__(self):
        bases = _check_bases(self.bases)
        if len(self.coefs) != len(bases):
            raise DomainError(f"{len(self.coefs)} coefficient rows for {len(bases)} bases")
        coefs = []
        for j, (b, c) in enumerate(zip(bases, self.coefs)):
            c = np.array(c, dtype=float)
            if c.shape != (b.n_basis,):
                raise DomainError(
                    f"coordinate {j}: expected {b.n_basis} coefficients, got shape {c.shape}"
                )
            c.setflags(write=False)
            coefs.append(c)
        object.__setattr__(self, "bases", bases)
        object.__setattr__(self, "coefs", tuple(coefs))

    @property
    def p(self) -> int:
        return len(self.bases)

    @property
    def domain(self) -> tuple[float, float]:
        return self.bases[0].domain_start, self.bases[0].domain_end

    @property
    def coefficients(self) -> np.ndarray:
        """``p x K`` coefficient matrix (all coordinates must share K)."""
        return np.vstack(self.coefs)

    def _binary(self, other, op):
        if not _same_bases(self.bases, other.bases):
            raise BasisMismatchError("operands live on different bases")
        return FunctionalDatum(self.bases, tuple(op(a, b) for a, b in zip(self.coefs, other.coefs)),
                               self.labels)

    def __add__(self, other):
        return self._binary(other, np.add)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __mul__(self, scalar):
        return FunctionalDatum(self.bases, tuple(c * float(scalar) for c in self.coefs), self.labels)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __call__(self, t):
        return evaluate(self, t)


@dataclass(frozen=True, eq=False)
class FunctionalSample:
    """``n`` functional data on shared bases.

    ``coefs[j]`` is an ``(n, K_j)`` array stacking coordinate ``j`` of every
    device.
    """

    bases: tuple[BasisSystem, ...]
    coefs: tuple[np.ndarray, ...]
    device_ids: tuple[str, ...]
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        bases = _check_bases(self.bases)
        n = len(self.device_ids)
        if n < 1:
            raise DomainError("a functional sample needs at least one device")
        if len(self.coefs) != len(bases):
            raise DomainError(f"{len(self.coefs)} coefficient blocks for {len(bases)} bases")
        coefs = []
        for j, (b, c) in enumerate(zip(bases, self.coefs)):
            c = np.array(c, dtype=float)
            if c.shape != (n, b.n_basis):
                raise DomainError(f"coordinate {j}: expected shape {(n, b.n_basis)}, got {c.shape}")
            c.setflags(write=False)
            coefs.append(c)
        if self.labels is not None and len(self.labels) != len(bases):
            raise DomainError("one label per coordinate required")
        object.__setattr__(self, "bases", bases)
        object.__setattr__(self, "coefs", tuple(coefs))
        object.__setattr__(self, "device_ids", tuple(str(d) for d in self.device_ids))
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(self.labels))

    @classmethod
    def from_data(cls, data: Sequence[FunctionalDatum],
                  device_ids: Sequence[str] | None = None) -> "FunctionalSample":
        if not data:
            raise DomainError("a functional sample needs at least one device")
        first = data[0]
        for d in data[1:]:
            if not _same_bases(first.bases, d.bases):
                raise BasisMismatchError("all data of a sample must share their bases")
        if device_ids is None:
            device_ids = [d.device_id if d.device_id is not None else str(i)
                          for i, d in enumerate(data)]
        coefs = tuple(np.vstack([d.coefs[j] for d in data]) for j in range(first.p))
        return cls(first.bases, coefs, tuple(device_ids), first.labels)

    @property
    def n(self) -> int:
        return len(self.device_ids)

    @property
    def p(self) -> int:
        return len(self.bases)

    @property
    def domain(self) -> tuple[float, float]:
        return self.bases[0].domain_start, self.bases[0].domain_end

    def __len__(self):
        return self.n

    def __getitem__(self, i: int) -> FunctionalDatum:
        return FunctionalDatum(self.bases, tuple(c[i] for c in self.coefs), self.labels,
                               self.device_ids[i])

    def data(self) -> list[FunctionalDatum]:
        return [self[i] for i in range(self.n)]

    def subset(self, idx) -> "FunctionalSample":
        idx = np.asarray(idx, dtype=int)
        return FunctionalSample(self.bases, tuple(c[idx] for c in self.coefs),
                                tuple(self.device_ids[i] for i in idx), self.labels)

    def evaluate(self, times) -> np.ndarray:
        """Values at ``times`` as an ``(n, G, p)`` array."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        out = np.empty((self.n, len(times), self.p))
        for j, (b, c) in enumerate(zip(self.bases, self.coefs)):
            out[:, :, j] = c @ eval_basis(b, times).T
        return out

    def coordinate_index(self, key) -> int:
        if isinstance(key, (int, np.integer)):
            if not 0 <= key < self.p:
                raise DomainError(f"coordinate index {key} out of range 0..{self.p - 1}")
            return int(key)
        if self.labels is None or key not in self.labels:
            raise DomainError(f"unknown coordinate {key!r}")
        return self.labels.index(key)


@dataclass(frozen=True, eq=False)
class CovarianceModel:
    """Coefficient covariance blocks ``C[j][k]`` (``K_j x K_k``) plus the mean."""

    blocks: tuple[tuple[np.ndarray, ...], ...]
    mean: FunctionalDatum
    n: int

    @property
    def bases(self) -> tuple[BasisSystem, ...]:
        return self.mean.bases

    @property
    def p(self) -> int:
        return self.mean.p


def evaluate(datum: FunctionalDatum, t) -> np.ndarray:
    """``(x_1(t), ..., x_p(t))``; an array ``t`` gives shape ``(len(t), p)``."""
    arr = np.asarray(t, dtype=float)
    cols = [eval_basis(b, arr) @ c for b, c in zip(datum.bases, datum.coefs)]
    return np.stack(cols, axis=-1)


def _require_same(f, g):
    if not _same_bases(f.bases, g.bases):
        raise BasisMismatchError("inner product of functions on different bases")


def inner_product(f: FunctionalDatum, g: FunctionalDatum) -> float:
    """``sum_j integral f_j g_j dt`` computed as ``sum_j f_j^T G_j g_j``."""
    _require_same(f, g)
    return float(sum(cf @ b.gram @ cg for b, cf, cg in zip(f.bases, f.coefs, g.coefs)))


def norm(f: FunctionalDatum) -> float:
    return float(np.sqrt(max(inner_product(f, f), 0.0)))


def mean_function(sample: FunctionalSample) -> FunctionalDatum:
    if sample.n < 1:
        raise DomainError("mean of an empty sample")
    return FunctionalDatum(sample.bases, tuple(c.mean(axis=0) for c in sample.coefs),
                           sample.labels, "mean")


def covariance_function(sample: FunctionalSample) -> CovarianceModel:
    """Unbiased (``1/(n-1)``) estimate of the cross-covariance blocks."""
    if sample.n < 2:
        raise DegenerateScaleError(f"covariance needs n >= 2 devices, got {sample.n}")
    mean = mean_function(sample)
    centered = [c - m for c, m in zip(sample.coefs, mean.coefs)]
    p = sample.p
    blocks = [[None] * p for _ in range(p)]
    for j in range(p):
        for k in range(j, p):
            C = centered[j].T @ centered[k] / (sample.n - 1)
            if j == k:
                C = 0.5 * (C + C.T)
            blocks[j][k] = C
            blocks[k][j] = C.T
    return CovarianceModel(tuple(tuple(row) for row in blocks), mean, sample.n)


def eval_covariance(cov: CovarianceModel, j: int, k: int, s, t) -> np.ndarray | float:
    """``Sigma_jk(s, t) = phi_j(s)^T C_jk phi_k(t)``; arrays give an outer grid."""
    p = cov.p
    if not (0 <= j < p and 0 <= k < p):
        raise DomainError(f"coordinate indices ({j}, {k}) out of range 0..{p - 1}")
    Bs = eval_basis(cov.bases[j], s)
    Bt = eval_basis(cov.bases[k], t)
    out = Bs @ cov.blocks[j][k] @ Bt.T
    return float(out) if np.ndim(out) == 0 else out


def apply_covariance_operator(cov: CovarianceModel, f: FunctionalDatum) -> FunctionalDatum:
    """``(Gamma f)_j = sum_k integral Sigma_jk(., t) f_k(t) dt``.

    In coefficient space row ``j`` is ``sum_k C_jk G_k c_k``.
    """
    if not _same_bases(cov.bases, f.bases):
        raise BasisMismatchError("operator and argument live on different bases")
    p = cov.p
    rows = []
    for j in range(p):
        rows.append(sum(cov.blocks[j][k] @ (f.bases[k].gram @ f.coefs[k]) for k in range(p)))
    return FunctionalDatum(f.bases, tuple(rows), f.labels)


# -- serialization -----------------------------------------------------------

def _bases_to_json(bases):
    return [b.to_dict() for b in bases]


def _bases_from_json(items):
    # identical descriptors share one BasisSystem so caches are reused
    out, seen = [], {}
    for item in items:
        key = json.dumps(item, sort_keys=True)
        if key not in seen:
            seen[key] = BasisSystem.from_dict(item)
        out.append(seen[key])
    return tuple(out)


def sample_to_json(sample: FunctionalSample, extra: dict | None = None) -> dict:
    """Coefficient-exchange document for a sample.

    Floats are written with ``repr`` precision so a round trip is bitwise.
    """
    doc = {
        "format": SAMPLE_FORMAT,
        "version": FORMAT_VERSION,
        "coordinates": list(sample.labels) if sample.labels else
        [str(j) for j in range(sample.p)],
        "bases": _bases_to_json(sample.bases),
        "devices": [
            {"device_id": did, "coefficients": [c[i].tolist() for c in sample.coefs]}
            for i, did in enumerate(sample.device_ids)
        ],
    }
    if extra:
        doc["metadata"] = extra
    return doc


def sample_from_json(doc: dict) -> FunctionalSample:
    if doc.get("format") != SAMPLE_FORMAT:
        raise DomainError(f"not a functional-sample document: format={doc.get('format')!r}")
    if doc.get("version") != FORMAT_VERSION:
        raise DomainError(f"unsupported functional-sample version {doc.get('version')!r}")
    bases = _bases_from_json(doc["bases"])
    devices = doc["devices"]
    if not devices:
        raise DomainError("functional-sample document contains no devices")
    p = len(bases)
    for dev in devices:
        if len(dev["coefficients"]) != p:
            raise DomainError(f"device {dev['device_id']!r}: expected {p} coefficient rows")
    coefs = tuple(np.array([dev["coefficients"][j] for dev in devices], dtype=float)
                  for j in range(p))
    return FunctionalSample(bases, coefs, tuple(dev["device_id"] for dev in devices),
                            tuple(doc["coordinates"]))


def covariance_to_json(cov: CovarianceModel) -> dict:
    return {
        "format": COVARIANCE_FORMAT,
        "version": FORMAT_VERSION,
        "n": cov.n,
        "bases": _bases_to_json(cov.bases),
        "mean": [c.tolist() for c in cov.mean.coefs],
        "blocks": [[blk.tolist() for blk in row] for row in cov.blocks],
    }


def covariance_from_json(doc: dict) -> CovarianceModel:
    if doc.get("format") != COVARIANCE_FORMAT:
        raise DomainError(f"not a covariance document: format={doc.get('format')!r}")
    bases = _bases_from_json(doc["bases"])
    mean = FunctionalDatum(bases, tuple(np.asarray(c, dtype=float) for c in doc["mean"]),
                           device_id="mean")
    blocks = tuple(tuple(np.asarray(b, dtype=float) for b in row) for row in doc["blocks"])
    return CovarianceModel(blocks, mean, int(doc["n"]))
