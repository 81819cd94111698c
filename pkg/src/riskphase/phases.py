"""Risk-phase diagram data: period groups, group centers, trajectories and events."""

from __future__ import annotations

import csv
import datetime as dt
import io
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .collectivity import CollectivityRecord, Label

log = logging.getLogger(__name__)

UNASSIGNED = "unassigned"

# x = market-mode collectivity, y = sector collectivity
AXES = {
    "cov": ("cov_BLE", "cov_B", "cov_label"),
    "corr": ("cov_LLE", "cov_L", "corr_label"),
    "cov2": ("cov_BLE", "cov_B2", "cov_label"),
    "corr2": ("cov_LLE", "cov_L2", "corr_label"),
}


@dataclass(frozen=True)
class Period:
    label: str
    description: str
    start: dt.date
    end: dt.date

    def __contains__(self, day: dt.date) -> bool:
        return self.start <= day <= self.end


@dataclass(frozen=True)
class Event:
    label: str
    description: str
    date: dt.date


_d = dt.date.fromisoformat

DEFAULT_PERIODS: tuple[Period, ...] = (
    Period("P1", "Nineties", _d("1990-01-31"), _d("2000-02-08")),
    Period("P2", "Post Dot-com bubble burst", _d("2000-02-09"), _d("2002-10-09")),
    Period("P3", "Pre-Lehman crash", _d("2002-10-10"), _d("2007-10-31")),
    Period("PA", "Precursor period", _d("2007-11-01"), _d("2008-08-14")),
    Period("P4", "Post-Lehman crash", _d("2008-08-15"), _d("2015-08-18")),
    Period("P5", "Post-China crisis", _d("2015-08-19"), _d("2020-01-22")),
    Period("P6", "Post 2020 stock market crash", _d("2020-01-23"), _d("2021-07-08")),
)

DEFAULT_EVENTS: tuple[Event, ...] = (
    Event("ER", "Early 1990s recession", _d("1990-07-15")),
    Event("AC", "Asian financial crisis", _d("1997-10-27")),
    Event("RC", "Russian financial crisis", _d("1998-08-17")),
    Event("DC", "Dot-com bubble (before burst)", _d("2000-03-10")),
    Event("MD", "Stock market downturn of 2002", _d("2002-10-09")),
    Event("A", "Precursor start", _d("2007-11-01")),
    Event("LB", "Lehman Brothers crash", _d("2008-09-16")),
    Event("ED", "European debt crisis", _d("2010-04-27")),
    Event("AF", "August 2011 stock markets fall", _d("2011-08-01")),
    Event("FC", "The Great Fall of China", _d("2015-08-18")),
    Event("CO", "2020 stock market crash", _d("2020-02-24")),
)

TRAJECTORY_RANGE = (_d("2007-11-01"), _d("2008-12-31"))


def validate_periods(periods: Sequence[Period]) -> None:
    for p in periods:
        if p.end < p.start:
            raise ValueError(f"period {p.label} ends before it starts")
    ordered = sorted(periods, key=lambda p: p.start)
    for a, b in zip(ordered, ordered[1:]):
        if b.start <= a.end:
            raise ValueError(f"periods {a.label} and {b.label} overlap")
    labels = [p.label for p in periods]
    if len(set(labels)) != len(labels):
        raise ValueError("duplicate period labels")


def _table_rows(text: str) -> list[dict[str, str]]:
    first = text.splitlines()[0] if text.strip() else ""
    delimiter = "\t" if first.count("\t") > first.count(",") else ","
    reader = csv.DictReader(io.StringIO(text), delimiter=delimiter)
    reader.fieldnames = [f.strip().lower() for f in reader.fieldnames or ()]
    return [{k: (v or "").strip() for k, v in row.items()} for row in reader]


def load_periods(path: str | Path) -> list[Period]:
    """Read ``label,description,start,end`` rows; overlapping periods are rejected."""
    periods = [
        Period(r["label"], r.get("description", ""), _d(r["start"]), _d(r["end"]))
        for r in _table_rows(Path(path).read_text(encoding="utf-8"))
    ]
    validate_periods(periods)
    return periods


def load_events(path: str | Path) -> list[Event]:
    """Read ``label,description,date`` rows."""
    return [
        Event(r["label"], r.get("description", ""), _d(r["date"]))
        for r in _table_rows(Path(path).read_text(encoding="utf-8"))
    ]


def assign_period(day: dt.date, periods: Sequence[Period] = DEFAULT_PERIODS) -> str | None:
    for p in periods:
        if day in p:
            return p.label
    return None


@dataclass(frozen=True)
class PhasePoint:
    date: dt.date
    x: float | None
    y: float | None
    label: str
    period: str | None

    @property
    def x_log10(self) -> float | None:
        if self.x is None or self.x <= 0:
            return None
        return math.log10(self.x)


def phase_points(
    records: Sequence[CollectivityRecord],
    axes: str = "cov",
    periods: Sequence[Period] = DEFAULT_PERIODS,
    y_values: Sequence[float | None] | None = None,
) -> list[PhasePoint]:
    """One point per record. ``y_values`` replaces the sector axis, e.g. with
    regression residual collectivities."""
    x_field, y_field, label_field = AXES[axes]
    if y_values is not None and len(y_values) != len(records):
        raise ValueError("y_values must match the records")
    points = []
    for i, rec in enumerate(records):
        y = y_values[i] if y_values is not None else getattr(rec, y_field)
        points.append(
            PhasePoint(
                rec.center_date,
                getattr(rec, x_field),
                y,
                getattr(rec, label_field).value,
                assign_period(rec.center_date, periods),
            )
        )
    return points


def group_of(point: PhasePoint, exclude_labeled: bool = True) -> str:
    """Criterion label if the point meets a criterion, else its period, else 'unassigned'."""
    if exclude_labeled and point.label != Label.NONE.value:
        return point.label
    return point.period or UNASSIGNED


@dataclass(frozen=True)
class GroupMean:
    group: str
    x: float
    y: float
    count: int


def group_means(
    points: Sequence[PhasePoint],
    periods: Sequence[Period] = DEFAULT_PERIODS,
    exclude_labeled: bool = True,
) -> list[GroupMean]:
    """Arithmetic means of (x, y) per criterion group and per period group.

    With ``exclude_labeled`` (default) a window meeting a criterion counts only in
    its criterion group; otherwise period groups hold every window in the period
    and criterion groups are reported as well. Points without a defined y are
    skipped; empty groups are omitted and logged.
    """
    buckets: dict[str, list[PhasePoint]] = {}
    for pt in points:
        if pt.x is None or pt.y is None:
            continue
        names = [group_of(pt, exclude_labeled)]
        if not exclude_labeled and pt.label != Label.NONE.value:
            names.append(pt.label)
        for name in names:
            buckets.setdefault(name, []).append(pt)

    order = [lab.value for lab in (Label.HIGH_COL, Label.LOW_COL, Label.HIGH_VAL)]
    order += [p.label for p in periods] + [UNASSIGNED]
    out = []
    for name in order:
        members = buckets.get(name)
        if not members:
            if name != UNASSIGNED:
                log.info("group %s is empty; omitted", name)
            continue
        xs = [p.x for p in members]
        ys = [p.y for p in members]
        out.append(GroupMean(name, math.fsum(xs) / len(xs), math.fsum(ys) / len(ys), len(members)))
    return out


@dataclass(frozen=True)
class TrajectoryStep:
    date: dt.date
    x: float
    y: float
    dx: float
    dy: float


def trajectory(points: Sequence[PhasePoint], start: dt.date, end: dt.date) -> list[TrajectoryStep]:
    """Chronological points in [start, end], each with the step to its successor."""
    if end < start:
        raise ValueError("trajectory range ends before it starts")
    inside = sorted(
        (p for p in points if start <= p.date <= end and p.x is not None and p.y is not None),
        key=lambda p: p.date,
    )
    steps = []
    for cur, nxt in zip(inside, inside[1:] + inside[-1:]):
        steps.append(TrajectoryStep(cur.date, cur.x, cur.y, nxt.x - cur.x, nxt.y - cur.y))
    return steps


@dataclass(frozen=True)
class EventMarker:
    event: Event
    window_index: int
    center_date: dt.date


def annotate_events(center_dates: Sequence[dt.date], events: Sequence[Event] = DEFAULT_EVENTS) -> list[EventMarker]:
    """Map each event to the window whose center date is nearest; ties go to the earlier window.

    Events before the first or after the last center are dropped with a warning.
    """
    markers = []
    if not center_dates:
        for ev in events:
            log.warning("event %s outside data range; dropped", ev.label)
        return markers
    first, last = min(center_dates), max(center_dates)
    for ev in events:
        if not first <= ev.date <= last:
            log.warning("event %s (%s) outside data range; dropped", ev.label, ev.date.isoformat())
            continue
        best = min(
            range(len(center_dates)),
            key=lambda i: (abs((center_dates[i] - ev.date).days), center_dates[i], i),
        )
        markers.append(EventMarker(ev, best, center_dates[best]))
    return markers
