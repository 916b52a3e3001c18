"""Change points in per-car sojourn series via a sliding two-window rank test."""
import json
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .kernels import rank_sum_scan
from .performance import rolling_sojourn, station_stats


class SeriesTooShortError(DataError):
    pass


@dataclass(frozen=True)
class DriftParams:
    window: int = 50
    threshold: float = 5.0      # on the standardised rank-sum statistic
    min_segment: int = 50
    consecutive: int = 3

    def __post_init__(self):
        if self.window < 5:
            raise ValueError("window must be >= 5")
        if self.consecutive < 1:
            raise ValueError("consecutive must be >= 1")
        if self.threshold <= 0 or self.min_segment < 1:
            raise ValueError("threshold and min_segment must be positive")


@dataclass(frozen=True)
class ChangePoint:
    station: str
    ordinal: int        # cars before the change
    direction: str
    magnitude: float    # post-segment mean / pre-segment mean
    statistic: float
    kind: str = "sudden"

    def to_dict(self):
        return {"station": self.station, "ordinal": self.ordinal, "direction": self.direction,
                "magnitude": self.magnitude, "statistic": self.statistic, "kind": self.kind}


def detect_change_points(series, params: DriftParams = DriftParams(), station=""):
    x = np.asarray(series, dtype=np.float64)
    w = params.window
    if len(x) < 2 * w:
        raise SeriesTooShortError(f"series of {len(x)} values is shorter than 2 x window ({2 * w})")
    z = rank_sum_scan(x, w)          # z[k] compares x[k:k+w] with x[k+w:k+2w]
    hits = []
    for sign in (1.0, -1.0):
        over = sign * z >= params.threshold
        k = 0
        while k < len(z):
            if not over[k]:
                k += 1
                continue
            j = k
            while j < len(z) and over[j]:
                j += 1
            if j - k >= params.consecutive:
                best = k + int(np.argmax(sign * z[k:j]))
                hits.append((float(abs(z[best])), best + w, j - k))
            k = j
    hits.sort(key=lambda h: (-h[0], h[1]))
    kept = []
    for stat, t, run in hits:
        if all(abs(t - o) >= params.min_segment for _, o, _ in kept):
            kept.append((stat, t, run))
    kept.sort(key=lambda h: h[1])
    bounds = [0] + [t for _, t, _ in kept] + [len(x)]
    out = []
    for i, (stat, t, run) in enumerate(kept):
        pre = x[bounds[i]:t].mean()
        post = x[t:bounds[i + 2]].mean()
        mag = post / pre if pre > 0 else float("inf")
        out.append(ChangePoint(station, t, "increase" if post > pre else "decrease",
                               float(mag), stat, "gradual" if run > 2 * w else "sudden"))
    return out


@dataclass
class DriftReport:
    change_points: dict     # station -> [ChangePoint]
    series: dict            # station -> RollingSeries

    @property
    def flagged(self):
        return sorted(s for s, cps in self.change_points.items() if cps)

    def to_json(self):
        rows = [cp.to_dict() for s in sorted(self.change_points) for cp in self.change_points[s]]
        return json.dumps(rows, indent=1, sort_keys=True) + "\n"


def drift_report(log, stations, params: DriftParams = DriftParams(), calendar=None,
                 upstream=None, rolling_window=10) -> DriftReport:
    stats = station_stats(log, calendar, upstream)
    cps = {}
    series = {}
    for s in stations:
        v = stats.visits.get(s)
        x = v.sojourn if v is not None else np.empty(0)
        cps[s] = detect_change_points(x, params, s)
        series[s] = rolling_sojourn(log, s, rolling_window, stats=stats)
    return DriftReport(cps, series)


def split_cases(log, station, ordinal, calendar=None, upstream=None):
    """Cases visiting ``station`` before / from the ``ordinal``-th car on."""
    v = station_stats(log, calendar, upstream).visits[station]
    pre = set(v.cases[:ordinal])
    return sorted(pre), sorted(set(log.cases) - pre)
