"""Reading preemption-lifetime CSV files and slicing them into cohorts.

Canonical columns::

    vm_type,zone,launch_timestamp,lifetime_hours,workload_tag,cohort_size

Timestamps are ISO-8601 in UTC; ``cohort_size`` may be empty.  Files with other
column names are adapted with a JSON mapping ``{"their name": "our name"}``
(map a column to ``null`` to drop it).
"""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, Optional, Sequence
from zoneinfo import ZoneInfo

from .fitting import EmpiricalCdf, build_empirical_cdf

__all__ = [
    "COLUMNS",
    "MAX_LIFETIME_HOURS",
    "SchemaError",
    "EmptyCohortError",
    "RowError",
    "LifetimeRecord",
    "ParsedDataset",
    "CohortFilter",
    "parse_dataset",
    "load_column_map",
    "write_dataset",
    "local_time",
    "time_of_day",
    "group_and_build",
    "select",
]

COLUMNS = ("vm_type", "zone", "launch_timestamp", "lifetime_hours", "workload_tag", "cohort_size")
REQUIRED = ("vm_type", "zone", "launch_timestamp", "lifetime_hours")
MAX_LIFETIME_HOURS = 24.5

# GCP region -> IANA zone, used for day/night classification in local time
REGION_TZ = {
    "us-east1": "America/New_York",
    "us-east4": "America/New_York",
    "us-central1": "America/Chicago",
    "us-west1": "America/Los_Angeles",
    "us-west2": "America/Los_Angeles",
    "northamerica-northeast1": "America/Montreal",
    "southamerica-east1": "America/Sao_Paulo",
    "europe-west1": "Europe/Brussels",
    "europe-west2": "Europe/London",
    "europe-west3": "Europe/Berlin",
    "europe-west4": "Europe/Amsterdam",
    "europe-north1": "Europe/Helsinki",
    "asia-east1": "Asia/Taipei",
    "asia-east2": "Asia/Hong_Kong",
    "asia-northeast1": "Asia/Tokyo",
    "asia-south1": "Asia/Kolkata",
    "asia-southeast1": "Asia/Singapore",
    "australia-southeast1": "Australia/Sydney",
}

DAY_START, DAY_END = 8, 20


class SchemaError(ValueError):
    """The file's header does not match the expected columns."""


class EmptyCohortError(ValueError):
    """No record matched the cohort filter."""


@dataclass(frozen=True)
class RowError:
    line: int  # 1-based, header is line 1
    message: str

    def __str__(self):
        return f"line {self.line}: {self.message}"


@dataclass(frozen=True)
class LifetimeRecord:
    vm_type: str
    zone: str
    launch_timestamp: datetime
    lifetime_hours: float
    workload_tag: str = "idle"
    cohort_size: Optional[int] = None

    def __post_init__(self):
        if not self.vm_type or not self.zone:
            raise ValueError("vm_type and zone must be non-empty")
        if not 0 < self.lifetime_hours <= MAX_LIFETIME_HOURS:
            raise ValueError(f"lifetime_hours={self.lifetime_hours} outside (0, {MAX_LIFETIME_HOURS}]")
        if self.launch_timestamp.tzinfo is None:
            raise ValueError("launch_timestamp must be timezone-aware")
        if self.cohort_size is not None and self.cohort_size < 1:
            raise ValueError("cohort_size must be >= 1")

    @property
    def region(self) -> str:
        return region_of(self.zone)


@dataclass
class ParsedDataset:
    records: list = field(default_factory=list)
    errors: list = field(default_factory=list)

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.records)


def region_of(zone: str) -> str:
    parts = zone.rsplit("-", 1)
    return parts[0] if len(parts) == 2 and len(parts[1]) == 1 else zone


def _parse_timestamp(s: str) -> datetime:
    s = s.strip()
    if s.endswith("Z"):
        s = s[:-1] + "+00:00"
    ts = datetime.fromisoformat(s)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def load_column_map(path) -> dict:
    with open(path) as fh:
        m = json.load(fh)
    if not isinstance(m, dict):
        raise SchemaError("column map must be a JSON object")
    return m


def _open_text(source):
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(source.decode("utf-8")), True
    if hasattr(source, "read"):
        data = source.read()
        if isinstance(data, bytes):
            data = data.decode("utf-8")
        return io.StringIO(data), True
    return open(os.fspath(source), newline="", encoding="utf-8"), True


def parse_dataset(source, column_map: Optional[dict] = None) -> ParsedDataset:
    """Parse a lifetime CSV from a path, bytes or file object.

    Header problems raise :class:`SchemaError`.  Bad rows are collected as
    :class:`RowError` entries and do not stop the parse.
    """
    fh, close = _open_text(source)
    try:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError("empty input") from None
        cmap = column_map or {}
        names = []
        for h in header:
            h = h.strip()
            names.append(cmap[h] if h in cmap else h)
        unknown = [n for n in names if n is not None and n not in COLUMNS]
        if unknown:
            raise SchemaError(f"unknown columns: {', '.join(unknown)}")
        missing = [c for c in REQUIRED if c not in names]
        if missing:
            raise SchemaError(f"missing columns: {', '.join(missing)}")
        out = ParsedDataset()
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(names):
                out.errors.append(RowError(lineno, f"expected {len(names)} fields, got {len(row)}"))
                continue
            vals = {n: v.strip() for n, v in zip(names, row) if n is not None}
            try:
                out.records.append(_record(vals))
            except ValueError as exc:
                out.errors.append(RowError(lineno, str(exc)))
        return out
    finally:
        if close:
            fh.close()


def _record(v: dict) -> LifetimeRecord:
    try:
        ts = _parse_timestamp(v["launch_timestamp"])
    except ValueError:
        raise ValueError(f"unparseable timestamp {v['launch_timestamp']!r}") from None
    try:
        life = float(v["lifetime_hours"])
    except ValueError:
        raise ValueError(f"unparseable lifetime {v['lifetime_hours']!r}") from None
    cs = v.get("cohort_size", "")
    return LifetimeRecord(
        vm_type=v["vm_type"],
        zone=v["zone"],
        launch_timestamp=ts,
        lifetime_hours=life,
        workload_tag=v.get("workload_tag") or "idle",
        cohort_size=int(cs) if cs else None,
    )


def write_dataset(records: Iterable[LifetimeRecord], dest) -> None:
    """Write records in the canonical schema to a path or text file object."""
    own = not hasattr(dest, "write")
    fh = open(os.fspath(dest), "w", newline="", encoding="utf-8") if own else dest
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in records:
            w.writerow([
                r.vm_type,
                r.zone,
                r.launch_timestamp.astimezone(timezone.utc).isoformat().replace("+00:00", "Z"),
                repr(float(r.lifetime_hours)),
                r.workload_tag,
                "" if r.cohort_size is None else r.cohort_size,
            ])
    finally:
        if own:
            fh.close()


def local_time(record: LifetimeRecord) -> datetime:
    """Launch time in the VM's local time zone (UTC if the region is unknown)."""
    tz = REGION_TZ.get(record.region)
    return record.launch_timestamp.astimezone(ZoneInfo(tz) if tz else timezone.utc)


def time_of_day(record: LifetimeRecord) -> str:
    h = local_time(record).hour
    return "day" if DAY_START <= h < DAY_END else "night"


@dataclass(frozen=True)
class CohortFilter:
    """Conjunctive record filter; ``None`` fields match everything."""

    vm_type: Optional[frozenset] = None
    zone: Optional[frozenset] = None
    time_of_day: Optional[str] = None
    days_of_week: Optional[frozenset] = None  # 0 = Monday, local time
    workload_tag: Optional[frozenset] = None

    def __post_init__(self):
        for name in ("vm_type", "zone", "workload_tag", "days_of_week"):
            v = getattr(self, name)
            if isinstance(v, (str, int)):
                object.__setattr__(self, name, frozenset([v]))
            elif v is not None:
                object.__setattr__(self, name, frozenset(v))
        if self.time_of_day not in (None, "day", "night"):
            raise ValueError(f"time_of_day must be 'day' or 'night', got {self.time_of_day!r}")
        if self.days_of_week is not None and not all(
            isinstance(d, int) and 0 <= d <= 6 for d in self.days_of_week
        ):
            raise ValueError("days_of_week entries must be integers 0..6")

    @classmethod
    def from_json(cls, d: Optional[dict]) -> "CohortFilter":
        d = dict(d or {})
        allowed = {"vm_type", "zone", "time_of_day", "days_of_week", "workload_tag"}
        extra = set(d) - allowed
        if extra:
            raise ValueError(f"unknown filter keys: {', '.join(sorted(extra))}")
        return cls(**d)

    def matches(self, r: LifetimeRecord) -> bool:
        if self.vm_type is not None and r.vm_type not in self.vm_type:
            return False
        if self.zone is not None and r.zone not in self.zone:
            return False
        if self.workload_tag is not None and r.workload_tag not in self.workload_tag:
            return False
        if self.time_of_day is not None and time_of_day(r) != self.time_of_day:
            return False
        if self.days_of_week is not None and local_time(r).weekday() not in self.days_of_week:
            return False
        return True


def select(records: Sequence[LifetimeRecord], flt: Optional[CohortFilter] = None) -> list:
    flt = flt or CohortFilter()
    return [r for r in records if flt.matches(r)]


def group_and_build(records: Sequence[LifetimeRecord], flt: Optional[CohortFilter] = None,
                    deadline: Optional[float] = None) -> EmpiricalCdf:
    """Empirical CDF of the lifetimes of the records matching ``flt``."""
    chosen = select(records, flt)
    if not chosen:
        raise EmptyCohortError("no records match the filter")
    return build_empirical_cdf([r.lifetime_hours for r in chosen], deadline=deadline)
