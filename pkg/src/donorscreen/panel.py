"""Panel data model, CSV ingestion, and pre-analysis series transforms.

A panel is a rectangular unit-by-time block of outcomes with one treated
unit and an intervention cut ``t0`` (index of the last pre-period). Time is
re-indexed to 0..T-1 on ingestion; the original labels are retained so
reports can translate back.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, NumericalError, UsageError


@dataclass(frozen=True)
class TimeSeries:
    """A scalar outcome series on a unit-step integer time grid."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.int64)
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        if times.ndim != 1 or values.ndim != 1 or len(times) != len(values):
            raise DataError("times and values must be 1-d and of equal length")
        if len(times) == 0:
            raise DataError("series must have length >= 1")
        if len(times) > 1 and not np.all(np.diff(times) == 1):
            raise DataError("times must be strictly increasing with step 1")
        if not np.all(np.isfinite(values)):
            raise DataError("series values must be finite")

    def __len__(self) -> int:
        return len(self.values)

    def with_values(self, values) -> "TimeSeries":
        return TimeSeries(self.times.copy(), np.asarray(values, dtype=np.float64))

    def window(self, start: int, stop: int) -> "TimeSeries":
        """Sub-series over time indices [start, stop)."""
        mask = (self.times >= start) & (self.times < stop)
        if not mask.any():
            raise UsageError(f"window [{start}, {stop}) selects no points")
        return TimeSeries(self.times[mask], self.values[mask])


def series(values, start_time: int = 0) -> TimeSeries:
    """Convenience constructor on the grid start_time, start_time+1, ..."""
    values = np.asarray(values, dtype=np.float64)
    return TimeSeries(start_time + np.arange(len(values)), values)


@dataclass(frozen=True)
class Panel:
    """Units sharing one time grid, one of which is the treated unit.

    ``labels`` maps internal time indices back to the ingested time labels;
    generated panels default to the stringified indices.
    """

    units: tuple
    treated_id: str
    labels: tuple = ()

    def __post_init__(self):
        units = tuple((str(uid), s) for uid, s in self.units)
        object.__setattr__(self, "units", units)
        if not units:
            raise DataError("panel needs at least one unit")
        ids = [uid for uid, _ in units]
        if len(set(ids)) != len(ids):
            raise DataError("unit ids must be unique")
        if sum(uid == self.treated_id for uid in ids) != 1:
            raise DataError(f"exactly one unit must match treated id {self.treated_id!r}")
        grids = {tuple(s.times.tolist()) for _, s in units}
        if len(grids) != 1:
            raise DataError("all series must share an identical time grid")
        labels = self.labels or tuple(str(t) for t in units[0][1].times)
        if len(labels) != len(units[0][1]):
            raise DataError("labels must cover the time grid")
        object.__setattr__(self, "labels", tuple(str(x) for x in labels))

    @property
    def T(self) -> int:
        return len(self.units[0][1])

    @property
    def times(self) -> np.ndarray:
        return self.units[0][1].times

    @property
    def unit_ids(self) -> tuple:
        return tuple(uid for uid, _ in self.units)

    @property
    def control_ids(self) -> tuple:
        return tuple(uid for uid, _ in self.units if uid != self.treated_id)

    def get(self, unit_id: str) -> TimeSeries:
        for uid, s in self.units:
            if uid == unit_id:
                return s
        raise UsageError(f"unknown unit id {unit_id!r}")

    @property
    def treated(self) -> TimeSeries:
        return self.get(self.treated_id)

    def values_of(self, ids) -> np.ndarray:
        """Stacked (len(ids), T) value matrix in the given id order."""
        return np.stack([self.get(uid).values for uid in ids])


@dataclass(frozen=True)
class PanelData(Panel):
    """Full panel with an intervention index t0 (last pre-period, 0-based)."""

    t0: int = field(default=-1)

    def __post_init__(self):
        super().__post_init__()
        if not (0 < self.t0 <= self.T - 2):
            raise DataError(
                f"t0={self.t0} must leave both periods nonempty (0 < t0 <= T-2 with T={self.T})"
            )
        if not self.control_ids:
            raise DataError("panel needs at least one control unit")

    def label_of(self, index: int) -> str:
        return self.labels[index]


def load_panel(path, treated_id: str, t0) -> PanelData:
    """Read a long-format CSV (header ``unit,time,value``) into a PanelData.

    Time labels may be integers or sortable strings; they are re-indexed to
    0..T-1. ``t0`` is given as a time label (e.g. a year) and mapped to its
    grid index.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"panel file not found: {path}")
    by_unit: dict = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["unit", "time", "value"]:
            raise DataError("expected CSV header exactly 'unit,time,value'")
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 3:
                raise DataError(f"line {lineno}: expected 3 columns, got {len(row)}")
            unit, tlabel, raw = row[0].strip(), row[1].strip(), row[2].strip()
            try:
                value = float(raw)
            except ValueError:
                raise DataError(f"line {lineno}: non-numeric value {raw!r}") from None
            if not math.isfinite(value):
                raise DataError(f"line {lineno}: non-finite value {raw!r}")
            slots = by_unit.setdefault(unit, {})
            if tlabel in slots:
                raise DataError(f"duplicate observation for unit {unit!r} at time {tlabel!r}")
            slots[tlabel] = value
    if treated_id not in by_unit:
        raise DataError(f"unknown treated id {treated_id!r}")

    label_sets = {frozenset(slots) for slots in by_unit.values()}
    if len(label_sets) != 1:
        raise DataError("ragged panel: units do not share an identical time grid")
    labels = sorted(next(iter(label_sets)), key=_label_key)

    t0_label = str(t0).strip()
    if t0_label not in labels:
        raise DataError(f"t0 label {t0_label!r} not on the time grid")
    t0_index = labels.index(t0_label)

    units = tuple(
        (unit, series([by_unit[unit][lab] for lab in labels]))
        for unit in sorted(by_unit, key=lambda u: (u != treated_id, u))
    )
    return PanelData(units=units, treated_id=treated_id, labels=tuple(labels), t0=t0_index)


def _label_key(label: str):
    try:
        return (0, float(label), label)
    except ValueError:
        return (1, 0.0, label)


def write_panel_long(panel: Panel, path) -> None:
    """Long-format export; floats use repr so ingest round-trips exactly."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["unit", "time", "value"])
        for uid, s in panel.units:
            for label, v in zip(panel.labels, s.values):
                writer.writerow([uid, label, repr(float(v))])


def write_panel_wide(panel: Panel, path) -> None:
    """Wide export for plotting: header ``time,<unit1>,<unit2>,...``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["time", *panel.unit_ids])
        columns = [s.values for _, s in panel.units]
        for i, label in enumerate(panel.labels):
            writer.writerow([label, *(format(c[i], ".12g") for c in columns)])


def normalize_zscore(s: TimeSeries) -> TimeSeries:
    """Center and scale to sample mean 0 / sample sd 1 (ddof=1)."""
    if len(s) < 2:
        raise NumericalError("zero variance: need at least 2 points to z-score")
    sd = float(np.std(s.values, ddof=1))
    if sd == 0.0:
        raise NumericalError("zero variance: cannot z-score a constant series")
    return s.with_values((s.values - s.values.mean()) / sd)


def normalize_base_log(s: TimeSeries, base_range) -> TimeSeries:
    """log(value / mean over base positions), base_range = (start, stop) half-open."""
    start, stop = base_range
    if not (0 <= start < stop <= len(s)):
        raise UsageError(f"base range ({start}, {stop}) out of bounds for length {len(s)}")
    if np.any(s.values <= 0.0):
        raise NumericalError("log normalization requires strictly positive values")
    base = float(s.values[start:stop].mean())
    return s.with_values(np.log(s.values / base))


def smooth_window(s: TimeSeries, half_width: int) -> TimeSeries:
    """Centered moving average; the window shrinks at the boundaries so the
    output keeps the input length."""
    if half_width < 0:
        raise UsageError("half_width must be >= 0")
    n = len(s)
    if n <= 2 * half_width:
        raise UsageError(f"series length {n} must exceed 2*half_width={2 * half_width}")
    if half_width == 0:
        return s.with_values(s.values.copy())
    csum = np.concatenate([[0.0], np.cumsum(s.values)])
    idx = np.arange(n)
    lo = np.maximum(idx - half_width, 0)
    hi = np.minimum(idx + half_width, n - 1)
    out = (csum[hi + 1] - csum[lo]) / (hi - lo + 1)
    return s.with_values(out)


def split_pre_post(p: PanelData):
    """Pre view covers indices [0, t0], post view covers (t0, T-1]."""
    cut = p.t0 + 1
    pre_units = tuple((uid, TimeSeries(s.times[:cut], s.values[:cut])) for uid, s in p.units)
    post_units = tuple((uid, TimeSeries(s.times[cut:], s.values[cut:])) for uid, s in p.units)
    pre = Panel(units=pre_units, treated_id=p.treated_id, labels=p.labels[:cut])
    post = Panel(units=post_units, treated_id=p.treated_id, labels=p.labels[cut:])
    return pre, post
