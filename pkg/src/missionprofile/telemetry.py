"""Canonical telemetry CSV: long format ``device_id,coordinate,t,value``.

``t`` is in hours. Files are UTF-8 with LF line endings; floats are written
with the shortest round-tripping representation.
"""

from __future__ import annotations

import csv
import math
from collections import OrderedDict
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import MissionProfileError
from .smoothing import RawSeries

__all__ = [
    "TELEMETRY_HEADER",
    "LABELS_HEADER",
    "InputError",
    "Telemetry",
    "write_telemetry_csv",
    "read_telemetry_csv",
    "write_labels_csv",
    "read_labels_csv",
]

TELEMETRY_HEADER = ["device_id", "coordinate", "t", "value"]
LABELS_HEADER = ["device_id", "group"]


class InputError(MissionProfileError, ValueError):
    """Malformed input file."""


class Telemetry:
    """Parsed telemetry: per device, one :class:`RawSeries` per coordinate."""

    def __init__(self, device_ids, coordinates, series):
        self.device_ids = tuple(device_ids)
        self.coordinates = tuple(coordinates)
        self.series = tuple(tuple(s) for s in series)

    @property
    def n(self) -> int:
        return len(self.device_ids)

    @property
    def domain_end(self) -> float:
        return max(float(s.times[-1]) for dev in self.series for s in dev)


def _fmt(x: float) -> str:
    return repr(float(x))


def write_telemetry_csv(path, device_ids: Sequence[str], coordinates: Sequence[str],
                        series: Iterable[Sequence[RawSeries]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TELEMETRY_HEADER)
        for did, dev in zip(device_ids, series):
            for s in dev:
                name = coordinates[s.coordinate]
                for t, v in zip(s.times.tolist(), s.values.tolist()):
                    w.writerow([did, name, _fmt(t), _fmt(v)])


def read_telemetry_csv(path) -> Telemetry:
    """Parse and validate a telemetry file.

    Raises
    ------
    InputError
        On a bad header, malformed rows (reported with line numbers), an
        empty device set, duplicate or decreasing timestamps, or a device
        lacking one of the coordinates.
    """
    path = Path(path)
    try:
        fh = open(path, encoding="utf-8", newline="")
    except OSError as exc:
        raise InputError(f"{path}: cannot open ({exc.strerror})") from exc
    data: "OrderedDict[str, OrderedDict[str, list]]" = OrderedDict()
    coords: list[str] = []
    problems = []
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != TELEMETRY_HEADER:
            raise InputError(f"{path}:1: expected header {','.join(TELEMETRY_HEADER)}, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 4:
                problems.append(f"{path}:{lineno}: expected 4 fields, got {len(row)}")
                continue
            did, coord, t, v = row
            try:
                t, v = float(t), float(v)
            except ValueError:
                problems.append(f"{path}:{lineno}: non-numeric t or value")
                continue
            if not (math.isfinite(t) and math.isfinite(v)) or not did or not coord:
                problems.append(f"{path}:{lineno}: empty id/coordinate or non-finite number")
                continue
            if coord not in coords:
                coords.append(coord)
            data.setdefault(did, OrderedDict()).setdefault(coord, []).append((lineno, t, v))
    if problems:
        shown = "\n".join(problems[:20])
        more = f"\n... and {len(problems) - 20} more" if len(problems) > 20 else ""
        raise InputError(f"malformed telemetry rows:\n{shown}{more}")
    if not data:
        raise InputError(f"{path}: no devices in telemetry")
    series = []
    for did, by_coord in data.items():
        missing = [c for c in coords if c not in by_coord]
        if missing:
            raise InputError(f"{path}: device {did!r} has no rows for coordinate(s) {missing}")
        dev = []
        for j, c in enumerate(coords):
            rows = by_coord[c]
            times = np.array([r[1] for r in rows])
            bad = np.nonzero(np.diff(times) <= 0)[0]
            if len(bad):
                lineno = rows[bad[0] + 1][0]
                raise InputError(
                    f"{path}:{lineno}: device {did!r} coordinate {c!r}: timestamps must be "
                    "strictly increasing (duplicates are rejected)"
                )
            if len(rows) < 2:
                raise InputError(f"{path}: device {did!r} coordinate {c!r} has fewer than 2 rows")
            dev.append(RawSeries(did, j, times, np.array([r[2] for r in rows])))
        series.append(dev)
    return Telemetry(list(data), coords, series)


def write_labels_csv(path, device_ids: Sequence[str], groups: Sequence[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LABELS_HEADER)
        for did, g in zip(device_ids, groups):
            w.writerow([did, g])


def read_labels_csv(path) -> dict[str, str]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        if next(reader, None) != LABELS_HEADER:
            raise InputError(f"{path}:1: expected header {','.join(LABELS_HEADER)}")
        return {row[0]: row[1] for row in reader}
