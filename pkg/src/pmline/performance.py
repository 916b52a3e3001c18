"""Service, waiting and sojourn times per station; bottlenecks; rolling series.

All durations are worked time: the part of an interval that falls outside
the working calendar is not counted.  Values are in seconds.
"""
import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .calendar import Calendar
from .kernels import rolling_mean

METRICS = ("service", "waiting", "sojourn")


@dataclass
class Visits:
    """Paired visits of one station, in completion order."""
    station: str
    cases: list
    start: np.ndarray        # wall ms
    complete: np.ndarray     # wall ms
    waiting: np.ndarray      # seconds
    service: np.ndarray      # seconds

    @property
    def sojourn(self):
        return self.waiting + self.service


def _summary(x):
    if len(x) == 0:
        return {"n": 0, "mean": None, "median": None, "p95": None}
    return {"n": int(len(x)), "mean": float(np.mean(x)), "median": float(np.median(x)),
            "p95": float(np.percentile(x, 95))}


@dataclass
class StationStats:
    visits: dict                           # station -> Visits
    unpaired: dict = field(default_factory=dict)

    def mean(self, station, metric):
        if metric not in METRICS:
            raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")
        v = self.visits[station]
        x = getattr(v, metric)
        return float(np.mean(x)) if len(x) else float("nan")

    def to_dict(self):
        out = {}
        for s in sorted(self.visits):
            v = self.visits[s]
            out[s] = {m: _summary(getattr(v, m)) for m in METRICS}
            out[s]["unpaired"] = self.unpaired.get(s, 0)
        return out

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["station", "n", "unpaired"] + [f"{m}_{k}" for m in METRICS
                                                     for k in ("mean", "median", "p95")])
        for s, row in self.to_dict().items():
            vals = [row[m][k] for m in METRICS for k in ("mean", "median", "p95")]
            w.writerow([s, row["service"]["n"], row["unpaired"]]
                       + ["" if v is None else repr(v) for v in vals])
        return buf.getvalue()


def station_stats(log, calendar=None, upstream=None) -> StationStats:
    """Per-station time statistics.

    Waiting runs from the completion of the car at its upstream station
    (``upstream`` maps station -> predecessor, None for line heads) to the
    start at this station; without a map the instance completed last before
    the start acts as upstream.  Line heads wait from the case's first event.
    """
    cal = calendar or Calendar()
    rows = []        # (station, case, start, complete, ref)
    unpaired = {}
    for case in log.cases:
        inst = log.instances(case)
        first = log.traces[case][0].timestamp
        done = {}
        finished = []
        for ins in sorted((i for i in inst if i.start is not None and i.complete is not None),
                          key=lambda i: (i.complete, i.start)):
            done.setdefault(ins.activity, ins.complete)
        for ins in inst:
            if ins.start is None or ins.complete is None:
                unpaired[ins.activity] = unpaired.get(ins.activity, 0) + 1
                continue
            ref = None
            if upstream is not None:
                up = upstream.get(ins.activity)
                while up is not None and up not in done:
                    up = upstream.get(up)
                ref = done.get(up) if up is not None else None
            else:
                prior = [c for c in finished if c <= ins.start]
                ref = max(prior) if prior else None
            rows.append((ins.activity, case, ins.start, ins.complete,
                         first if ref is None else min(ref, ins.start)))
            finished.append(ins.complete)
    visits = {}
    if rows:
        st = np.array([r[2] for r in rows], dtype=np.int64)
        co = np.array([r[3] for r in rows], dtype=np.int64)
        rf = np.array([r[4] for r in rows], dtype=np.int64)
        w_st, w_co, w_rf = cal.to_work(st), cal.to_work(co), cal.to_work(rf)
        service = (w_co - w_st) / 1000.0
        waiting = np.maximum(w_st - w_rf, 0) / 1000.0
        by = {}
        for k, r in enumerate(rows):
            by.setdefault(r[0], []).append(k)
        for s, idx in by.items():
            idx = np.array(sorted(idx, key=lambda k: (co[k], rows[k][1])))
            visits[s] = Visits(s, [rows[k][1] for k in idx], st[idx], co[idx],
                               waiting[idx], service[idx])
    return StationStats(visits, unpaired)


def bottleneck_ranking(stats: StationStats, metric: str = "service"):
    """Stations by descending mean of ``metric``; ties broken by label."""
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")
    if not stats.visits:
        raise ValueError("no station statistics to rank")
    return sorted(stats.visits, key=lambda s: (-stats.mean(s, metric), s))


@dataclass
class RollingSeries:
    station: str
    window: int
    points: list     # (car ordinal, rolling mean sojourn seconds)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["car", "seconds"])
        for k, v in self.points:
            w.writerow([k, repr(float(v))])
        return buf.getvalue()


def sojourn_series(log, station, calendar=None, upstream=None, stats=None):
    """Per-car sojourn seconds at ``station`` in completion order."""
    stats = stats or station_stats(log, calendar, upstream)
    v = stats.visits.get(station)
    return np.empty(0) if v is None else v.sojourn


def rolling_sojourn(log, station, window=10, calendar=None, upstream=None, stats=None):
    if window < 1:
        raise ValueError("window must be >= 1")
    x = sojourn_series(log, station, calendar, upstream, stats)
    if len(x) < window:
        return RollingSeries(station, window, [])
    m = rolling_mean(x, window)
    return RollingSeries(station, window, list(zip(range(window, len(x) + 1), m.tolist())))
