"""Working calendar: maps continuous working time to wall-clock instants.

The line works ``open``..``close`` on the weekdays in ``weekmask``.  The
simulator runs on a working-time axis (ms of worked time since the first
opening) and converts to UTC instants at the end; analyses convert back
to measure worked durations.
"""
from dataclasses import dataclass

import numpy as np

from .eventlog import parse_ts

DAY_MS = 86_400_000


def _hhmm_to_ms(text):
    h, m = text.split(":")
    return (int(h) * 60 + int(m)) * 60_000


@dataclass(frozen=True)
class Calendar:
    start_date: str = "2017-01-02"   # first working day (a Monday)
    open: str = "08:00"
    close: str = "17:00"
    weekmask: str = "1111100"

    def __post_init__(self):
        if self.day_ms <= 0:
            raise ValueError("calendar closes before it opens")
        if not np.is_busday(np.datetime64(self.start_date, "D"), weekmask=self.weekmask):
            raise ValueError(f"start date {self.start_date} is not a working day")

    @property
    def open_ms(self):
        return _hhmm_to_ms(self.open)

    @property
    def day_ms(self):
        return _hhmm_to_ms(self.close) - _hhmm_to_ms(self.open)

    @property
    def origin_ms(self):
        return parse_ts(self.start_date)

    def to_wall(self, work_ms):
        """Working-time ms -> UTC ms.  Day boundaries map to the next opening."""
        w = np.asarray(work_ms, dtype=np.int64)
        day = w // self.day_ms
        off = w - day * self.day_ms
        start = np.datetime64(self.start_date, "D")
        dates = np.busday_offset(start, day, roll="forward", weekmask=self.weekmask)
        date_ms = dates.astype("datetime64[ms]").astype(np.int64)
        out = date_ms + self.open_ms + off
        return out if out.ndim else int(out)

    def to_work(self, wall_ms):
        """UTC ms -> working-time ms; off-calendar instants clamp to the
        nearest preceding working moment."""
        t = np.asarray(wall_ms, dtype=np.int64)
        date_ms = (t // DAY_MS) * DAY_MS
        dates = date_ms.astype("datetime64[ms]").astype("datetime64[D]")
        start = np.datetime64(self.start_date, "D")
        ndays = np.busday_count(start, dates, weekmask=self.weekmask)
        tod = t - date_ms - self.open_ms
        busy = np.is_busday(dates, weekmask=self.weekmask)
        tod = np.where(busy, np.clip(tod, 0, self.day_ms), 0)
        out = ndays.astype(np.int64) * self.day_ms + tod
        return out if out.ndim else int(out)

    def worked_ms(self, start_ms, end_ms):
        """Worked time between two wall instants (off-calendar time excluded)."""
        return self.to_work(end_ms) - self.to_work(start_ms)

    def is_open(self, wall_ms):
        """True where the instant lies inside working hours (bounds inclusive)."""
        t = np.asarray(wall_ms, dtype=np.int64)
        date_ms = (t // DAY_MS) * DAY_MS
        dates = date_ms.astype("datetime64[ms]").astype("datetime64[D]")
        tod = t - date_ms
        ok = np.is_busday(dates, weekmask=self.weekmask)
        ok &= (tod >= self.open_ms) & (tod <= self.open_ms + self.day_ms)
        return ok if ok.ndim else bool(ok)

    def to_dict(self):
        return {"start_date": self.start_date, "open": self.open,
                "close": self.close, "weekmask": self.weekmask}
