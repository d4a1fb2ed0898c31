"""Trading calendar with close-to-close session assignment.

A message posted after the close of trading day t-1 and at or before the
close of day t belongs to day t.  Weekend and holiday messages therefore
roll forward into the next trading day.  The first day of a calendar only
anchors the opening boundary and never receives messages itself.
"""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass, field
from zoneinfo import ZoneInfo

import numpy as np

from .errors import ConfigError, OutOfCalendar

DEFAULT_TZ = "America/New_York"
REGULAR_CLOSE = dt.time(16, 0)
EARLY_CLOSE = dt.time(13, 0)

# NYSE-style sessions spanning the default sample window with margin.
US_HOLIDAYS = frozenset(
    {
        dt.date(2019, 11, 28),  # Thanksgiving
        dt.date(2019, 12, 25),  # Christmas
        dt.date(2020, 1, 1),    # New Year's Day
        dt.date(2020, 1, 20),   # MLK Day
        dt.date(2020, 2, 17),   # Washington's Birthday
        dt.date(2020, 4, 10),   # Good Friday
    }
)
US_EARLY_CLOSES = {
    dt.date(2019, 11, 29): EARLY_CLOSE,
    dt.date(2019, 12, 24): EARLY_CLOSE,
}


@dataclass(frozen=True)
class TradingCalendar:
    """Ordered trading days plus the UTC epoch second of each day's close."""

    tz_name: str
    days: tuple[dt.date, ...]
    close_epochs: np.ndarray = field(repr=False)  # int64, ascending

    def __post_init__(self):
        if len(self.days) < 2:
            raise ConfigError("calendar needs at least two trading days")
        if len(self.days) != len(self.close_epochs):
            raise ConfigError("calendar days and closes differ in length")
        if not np.all(np.diff(self.close_epochs) > 0):
            raise ConfigError("calendar closes must be strictly increasing")

    def __len__(self) -> int:
        return len(self.days)

    def index_of(self, day: dt.date) -> int:
        """Index of a trading day, or -1 if `day` is not a session."""
        i = int(np.searchsorted(self._day_ordinals(), day.toordinal()))
        if i < len(self.days) and self.days[i] == day:
            return i
        return -1

    def _day_ordinals(self) -> np.ndarray:
        return np.fromiter((d.toordinal() for d in self.days), np.int64, len(self.days))

    def assign_index(self, ts_epoch: int) -> int:
        """Trading-day index owning a UTC epoch second.

        Raises OutOfCalendar for timestamps at or before the first close
        (the previous session boundary is unknown) or after the last close.
        """
        i = int(np.searchsorted(self.close_epochs, ts_epoch, side="left"))
        if i == 0 or i >= len(self.close_epochs):
            raise OutOfCalendar(f"timestamp {ts_epoch} outside calendar coverage")
        return i

    def assign(self, ts_epoch: int) -> dt.date:
        return self.days[self.assign_index(ts_epoch)]

    def assign_index_many(self, ts_epochs: np.ndarray) -> np.ndarray:
        """Vectorized assign_index; out-of-coverage rows get -1."""
        idx = np.searchsorted(self.close_epochs, ts_epochs, side="left")
        idx = idx.astype(np.int32)
        idx[(idx == 0) | (idx >= len(self.close_epochs))] = -1
        return idx

    def range_indices(self, start: dt.date, end: dt.date) -> tuple[int, int]:
        """[lo, hi) index range of trading days with start <= day <= end."""
        ords = self._day_ordinals()
        lo = int(np.searchsorted(ords, start.toordinal(), side="left"))
        hi = int(np.searchsorted(ords, end.toordinal(), side="right"))
        return lo, hi


def _close_epoch(day: dt.date, close_time: dt.time, tz: ZoneInfo) -> int:
    return int(dt.datetime.combine(day, close_time, tzinfo=tz).timestamp())


def build_calendar(
    sessions: list[tuple[dt.date, dt.time]], tz_name: str = DEFAULT_TZ
) -> TradingCalendar:
    """Build a calendar from (day, local close time) pairs."""
    tz = ZoneInfo(tz_name)
    ordered = sorted(sessions)
    days = tuple(d for d, _ in ordered)
    if len(set(days)) != len(days):
        raise ConfigError("calendar contains duplicate session dates")
    closes = np.fromiter(
        (_close_epoch(d, t, tz) for d, t in ordered), np.int64, len(ordered)
    )
    return TradingCalendar(tz_name=tz_name, days=days, close_epochs=closes)


def default_us_calendar(
    start: dt.date = dt.date(2019, 11, 1), end: dt.date = dt.date(2020, 4, 30)
) -> TradingCalendar:
    """Weekday sessions minus US holidays, 16:00 ET close (13:00 early closes)."""
    sessions = []
    day = start
    while day <= end:
        if day.weekday() < 5 and day not in US_HOLIDAYS:
            sessions.append((day, US_EARLY_CLOSES.get(day, REGULAR_CLOSE)))
        day += dt.timedelta(days=1)
    return build_calendar(sessions)


def load_calendar_csv(path) -> TradingCalendar:
    """Read a calendar file: a `timezone,<name>` row, a header, then sessions.

    Example::

        timezone,America/New_York
        date,close_time_local
        2019-12-02,16:00:00
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if len(rows) < 3 or rows[0][0].strip().lower() != "timezone":
        raise ConfigError(f"{path}: first row must be 'timezone,<IANA name>'")
    tz_name = rows[0][1].strip()
    try:
        ZoneInfo(tz_name)
    except Exception as exc:
        raise ConfigError(f"{path}: unknown timezone {tz_name!r}") from exc
    header = [c.strip().lower() for c in rows[1]]
    if header != ["date", "close_time_local"]:
        raise ConfigError(f"{path}: expected header date,close_time_local")
    sessions = []
    for r in rows[2:]:
        if len(r) != 2:
            raise ConfigError(f"{path}: malformed session row {r!r}")
        try:
            day = dt.date.fromisoformat(r[0].strip())
            close = dt.time.fromisoformat(r[1].strip())
        except ValueError as exc:
            raise ConfigError(f"{path}: bad session row {r!r}: {exc}") from exc
        sessions.append((day, close))
    return build_calendar(sessions, tz_name)


def save_calendar_csv(cal: TradingCalendar, path) -> None:
    """Write a calendar in the load_calendar_csv format."""
    tz = ZoneInfo(cal.tz_name)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timezone", cal.tz_name])
        w.writerow(["date", "close_time_local"])
        for day, close_epoch in zip(cal.days, cal.close_epochs):
            local = dt.datetime.fromtimestamp(int(close_epoch), tz)
            w.writerow([day.isoformat(), local.time().isoformat()])
