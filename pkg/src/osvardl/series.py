"""Aggregation of event rows into the five pooled malware time series."""

from __future__ import annotations

import csv
import datetime as dt
import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .osv import STUDIED_ECOSYSTEMS, Ecosystem, EventRow

DEFAULT_WINDOW = (dt.date(2022, 1, 1), dt.date(2025, 3, 31))
SERIES_NAMES = ("mal_freq", "mal_share", "eco", "adv", "art")
SERIES_CSV_HEADER = ("period",) + SERIES_NAMES


class Granularity(str, enum.Enum):
    DAILY = "daily"
    WEEKLY = "weekly"
    MONTHLY = "monthly"


def period_start(day: dt.date, granularity: Granularity) -> dt.date:
    """First calendar day of the period that contains ``day``."""
    if granularity is Granularity.DAILY:
        return day
    if granularity is Granularity.WEEKLY:
        return day - dt.timedelta(days=day.weekday())
    return day.replace(day=1)


def next_period(start: dt.date, granularity: Granularity) -> dt.date:
    if granularity is Granularity.DAILY:
        return start + dt.timedelta(days=1)
    if granularity is Granularity.WEEKLY:
        return start + dt.timedelta(days=7)
    if start.month == 12:
        return dt.date(start.year + 1, 1, 1)
    return dt.date(start.year, start.month + 1, 1)


def period_label(start: dt.date, granularity: Granularity) -> str:
    if granularity is Granularity.DAILY:
        return start.isoformat()
    if granularity is Granularity.WEEKLY:
        year, week, _ = start.isocalendar()
        return f"{year}-W{week:02d}"
    return f"{start.year:04d}-{start.month:02d}"


def parse_period_label(label: str, granularity: Granularity) -> dt.date:
    if granularity is Granularity.DAILY:
        return dt.date.fromisoformat(label)
    if granularity is Granularity.WEEKLY:
        year, week = label.split("-W")
        return dt.date.fromisocalendar(int(year), int(week), 1)
    year, month = label.split("-")
    return dt.date(int(year), int(month), 1)


def period_index(
    window_start: dt.date,
    window_end: dt.date,
    granularity: Granularity,
    partial_weeks: bool = False,
) -> list[dt.date]:
    """Gap-free list of period start dates covering the window.

    Weeks are ISO weeks (Monday start). Unless ``partial_weeks`` is set, only
    weeks lying entirely inside the window are kept, so the first week is the
    first ISO week starting on or after ``window_start`` and the last is the
    last one ending on or before ``window_end``.
    """
    if window_start > window_end:
        raise ValueError(f"window start {window_start} is after window end {window_end}")
    granularity = Granularity(granularity)
    first = period_start(window_start, granularity)
    if granularity is Granularity.WEEKLY and not partial_weeks and first < window_start:
        first += dt.timedelta(days=7)
    periods = []
    cursor = first
    while cursor <= window_end:
        if (
            granularity is Granularity.WEEKLY
            and not partial_weeks
            and cursor + dt.timedelta(days=6) > window_end
        ):
            break
        periods.append(cursor)
        cursor = next_period(cursor, granularity)
    return periods


@dataclass
class SeriesBundle:
    granularity: Granularity
    periods: list[str]
    mal_freq: np.ndarray
    mal_share: np.ndarray
    eco: np.ndarray
    adv: np.ndarray
    art: np.ndarray
    # Rows that fell between window bounds but outside every period (trimmed partial weeks).
    excluded_rows: int = field(default=0, compare=False)

    def __post_init__(self):
        self.granularity = Granularity(self.granularity)
        self.mal_freq = np.asarray(self.mal_freq, dtype=np.int64)
        self.mal_share = np.asarray(self.mal_share, dtype=float)
        self.eco = np.asarray(self.eco, dtype=np.int64)
        self.adv = np.asarray(self.adv, dtype=np.int64)
        self.art = np.asarray(self.art, dtype=np.int64)
        n = len(self.periods)
        for name in SERIES_NAMES:
            if len(getattr(self, name)) != n:
                raise ValueError(f"series {name} has length {len(getattr(self, name))}, expected {n}")

    def __len__(self) -> int:
        return len(self.periods)

    @property
    def T(self) -> int:
        return len(self.periods)

    def series(self, name: str) -> np.ndarray:
        if name not in SERIES_NAMES:
            raise KeyError(name)
        return getattr(self, name)

    def slice(self, start: int, stop: int | None = None) -> "SeriesBundle":
        sl = slice(start, stop)
        return SeriesBundle(
            self.granularity, self.periods[sl],
            *(getattr(self, name)[sl] for name in SERIES_NAMES),
        )


def aggregate(
    rows: Iterable[EventRow],
    granularity: Granularity | str,
    window_start: dt.date = DEFAULT_WINDOW[0],
    window_end: dt.date = DEFAULT_WINDOW[1],
    partial_weeks: bool = False,
) -> SeriesBundle:
    """Aggregate event rows into a :class:`SeriesBundle`.

    ``mal_share`` is the percentage of malware rows among all rows of a period
    and is 0 for periods without any rows. ``adv`` and ``art`` sum reference
    counts over malware rows only.
    """
    granularity = Granularity(granularity)
    starts = period_index(window_start, window_end, granularity, partial_weeks)
    position = {start: i for i, start in enumerate(starts)}
    T = len(starts)

    mal = np.zeros(T, dtype=np.int64)
    total = np.zeros(T, dtype=np.int64)
    adv = np.zeros(T, dtype=np.int64)
    art = np.zeros(T, dtype=np.int64)
    ecosystems: list[set[Ecosystem]] = [set() for _ in range(T)]
    excluded = 0

    for row in rows:
        if row.date < window_start or row.date > window_end:
            continue
        i = position.get(period_start(row.date, granularity))
        if i is None:
            excluded += 1
            continue
        total[i] += 1
        if row.is_malware:
            mal[i] += 1
            adv[i] += row.advisory_count
            art[i] += row.article_count
            ecosystems[i].add(row.ecosystem)

    share = np.zeros(T, dtype=float)
    nonempty = total > 0
    share[nonempty] = 100.0 * mal[nonempty] / total[nonempty]
    eco = np.array([len(s) for s in ecosystems], dtype=np.int64)
    return SeriesBundle(
        granularity,
        [period_label(s, granularity) for s in starts],
        mal, share, eco, adv, art,
        excluded_rows=excluded,
    )


def moving_average(values: Sequence[float], window: int = 9) -> np.ndarray:
    """Centered moving average; edge windows are truncated to the available points."""
    if window < 1:
        raise ValueError("window must be positive")
    x = np.asarray(values, dtype=float)
    half_lo = (window - 1) // 2
    half_hi = window - 1 - half_lo
    csum = np.concatenate(([0.0], np.cumsum(x)))
    n = len(x)
    idx = np.arange(n)
    lo = np.maximum(idx - half_lo, 0)
    hi = np.minimum(idx + half_hi + 1, n)
    return (csum[hi] - csum[lo]) / (hi - lo)


@dataclass
class SeriesSummary:
    name: str
    median: float
    mean: float
    min: float
    max: float


@dataclass
class DescriptiveReport:
    granularity: Granularity
    T: int
    summaries: list[SeriesSummary]
    share_moving_average: np.ndarray
    ma_window: int

    def summary(self, name: str) -> SeriesSummary:
        for s in self.summaries:
            if s.name == name:
                return s
        raise KeyError(name)


def descriptive_report(bundle: SeriesBundle, ma_window: int = 9) -> DescriptiveReport:
    if bundle.T < 1:
        raise ValueError("descriptive report needs at least one period")
    summaries = []
    for name in SERIES_NAMES:
        x = bundle.series(name).astype(float)
        summaries.append(
            SeriesSummary(name, float(np.median(x)), float(np.mean(x)), float(x.min()), float(x.max()))
        )
    return DescriptiveReport(
        bundle.granularity, bundle.T, summaries,
        moving_average(bundle.mal_share, ma_window), ma_window,
    )


@dataclass(frozen=True)
class BreakdownRow:
    ecosystem: Ecosystem
    all_entries: int
    malware_entries: int

    @property
    def malware_share(self) -> float:
        if self.all_entries == 0:
            return 0.0
        return 100.0 * self.malware_entries / self.all_entries


def ecosystem_breakdown(rows: Iterable[EventRow]) -> list[BreakdownRow]:
    """Per-ecosystem entry counts over all rows, in alphabetical ecosystem order."""
    counts = {eco: [0, 0] for eco in STUDIED_ECOSYSTEMS}
    for row in rows:
        if row.ecosystem not in counts:
            continue
        counts[row.ecosystem][0] += 1
        if row.is_malware:
            counts[row.ecosystem][1] += 1
    return [BreakdownRow(eco, *counts[eco]) for eco in STUDIED_ECOSYSTEMS]


def write_series_csv(bundle: SeriesBundle, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SERIES_CSV_HEADER)
        for t, label in enumerate(bundle.periods):
            writer.writerow(
                (label, int(bundle.mal_freq[t]), repr(float(bundle.mal_share[t])),
                 int(bundle.eco[t]), int(bundle.adv[t]), int(bundle.art[t]))
            )


def read_series_csv(path: str | Path, granularity: Granularity | str) -> SeriesBundle:
    cols: dict[str, list] = {name: [] for name in SERIES_CSV_HEADER}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != SERIES_CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        for line in reader:
            cols["period"].append(line["period"])
            cols["mal_share"].append(float(line["mal_share"]))
            for name in ("mal_freq", "eco", "adv", "art"):
                cols[name].append(int(line[name]))
    return SeriesBundle(Granularity(granularity), cols["period"], *(cols[n] for n in SERIES_NAMES))
