"""SD-logs, lagged relations, and a stock-flow model of the line.

Windows are wall-clock by default.  With a calendar they are measured in
worked time instead, so one window can be one working day and nights or
weekends do not create empty steps.
"""
import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .config import BufferSpec, LineConfig, apply_injection
from .errors import DataError
from .eventlog import build_traces

log = logging.getLogger(__name__)

HOUR_MS = 3_600_000
DAY_MS = 24 * HOUR_MS
VARIABLES = ("arrival_rate", "production_rate", "avg_service_time", "wip", "avg_flow_time")


@dataclass
class SDLog:
    window_ms: int
    start_ms: int
    worked: bool                      # windows on the worked-time axis
    columns: dict                     # name -> np.ndarray, one entry per window

    @property
    def n_rows(self):
        return len(self.columns["arrival_rate"])

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        names = list(VARIABLES)
        w.writerow(["window"] + names)
        for i in range(self.n_rows):
            w.writerow([i] + [repr(float(self.columns[n][i])) for n in names])
        return buf.getvalue()


def extract_sdlog(tlog, window_ms=DAY_MS, calendar=None) -> SDLog:
    """Aggregate a trace log per window.

    arrival_rate: cases whose first event falls in the window; production_rate:
    cases whose last event does; avg_service_time: mean seconds of instances
    completed in the window; wip: time-weighted mean of cases in flight;
    avg_flow_time: mean first-to-last seconds of cases finished in the window.
    Empty windows report zero rates and NaN averages.
    """
    if window_ms < HOUR_MS:
        raise DataError("window must be at least one hour")
    axis = (lambda t: calendar.to_work(np.asarray(t, dtype=np.int64))) if calendar \
        else (lambda t: np.asarray(t, dtype=np.int64))
    cases = [c for c in tlog.cases if tlog.traces[c]]
    if not cases:
        raise DataError("empty log")
    first = axis([tlog.traces[c][0].timestamp for c in cases])
    last = axis([tlog.traces[c][-1].timestamp for c in cases])
    start = (int(first.min()) // window_ms) * window_ms
    span = int(last.max()) - int(first.min())
    if window_ms > span:
        raise DataError(f"window ({window_ms} ms) longer than the log span ({span} ms)")
    n = (int(last.max()) - start) // window_ms + 1
    arr = np.bincount((first - start) // window_ms, minlength=n).astype(float)
    prod = np.bincount((last - start) // window_ms, minlength=n).astype(float)
    flow = (last - first) / 1000.0
    fsum = np.bincount((last - start) // window_ms, weights=flow, minlength=n)
    with np.errstate(invalid="ignore", divide="ignore"):
        avg_flow = np.where(prod > 0, fsum / np.maximum(prod, 1), np.nan)
    lo = start + np.arange(n, dtype=np.int64) * window_ms
    hi = lo + window_ms
    ov = np.clip(np.minimum(last[:, None], hi[None, :]) - np.maximum(first[:, None], lo[None, :]),
                 0, None)
    wip = ov.sum(axis=0) / window_ms
    st, co = [], []
    for c in cases:
        for ins in tlog.instances(c):
            if ins.start is not None and ins.complete is not None:
                st.append(ins.start)
                co.append(ins.complete)
    if st:
        st_a, co_a = axis(st), axis(co)
        if calendar is not None:
            svc = (co_a - st_a) / 1000.0
        else:
            svc = (np.asarray(co) - np.asarray(st)) / 1000.0
        idx = (co_a - start) // window_ms
        ssum = np.bincount(idx, weights=svc, minlength=n)
        scnt = np.bincount(idx, minlength=n)
        with np.errstate(invalid="ignore", divide="ignore"):
            avg_svc = np.where(scnt > 0, ssum / np.maximum(scnt, 1), np.nan)
    else:
        avg_svc = np.full(n, np.nan)
    cols = {"arrival_rate": arr, "production_rate": prod, "avg_service_time": avg_svc,
            "wip": wip, "avg_flow_time": avg_flow}
    return SDLog(int(window_ms), int(start), calendar is not None, cols)


# ------------------------------------------------------------ relations


@dataclass(frozen=True)
class Relation:
    source: str
    target: str
    lag: int          # windows by which the source leads
    strength: float   # Pearson r

    def to_dict(self):
        return {"source": self.source, "target": self.target, "lag": self.lag,
                "strength": self.strength}


def detect_relations(sdlog: SDLog, max_lag=3, threshold=0.7, variables=VARIABLES):
    """Strongest lagged Pearson correlation per ordered variable pair."""
    if max_lag < 0:
        raise ValueError("max_lag must be >= 0")
    if sdlog.n_rows < max_lag + 10:
        raise DataError(f"need at least {max_lag + 10} windows, got {sdlog.n_rows}")
    out = []
    for a in variables:
        for b in variables:
            if a == b:
                continue
            best = None
            for lag in range(max_lag + 1):
                x = sdlog.columns[a][:len(sdlog.columns[a]) - lag]
                y = sdlog.columns[b][lag:]
                ok = np.isfinite(x) & np.isfinite(y)
                x, y = x[ok], y[ok]
                if len(x) < 3 or np.ptp(x) == 0 or np.ptp(y) == 0:
                    log.info("skipping %s -> %s at lag %d: constant or too short", a, b, lag)
                    continue
                r = float(np.corrcoef(x, y)[0, 1])
                if best is None or abs(r) > abs(best[1]):
                    best = (lag, r)
            if best is not None and abs(best[1]) >= threshold:
                out.append(Relation(a, b, best[0], best[1]))
    return out


# ------------------------------------------------------------ stock-flow model

STOCK = "cars_in_line"
INFLOW = "arrival_rate"
OUTFLOW = "production_rate"
DURATION = "average_production_duration"


@dataclass
class StockFlowModel:
    """The line as one stock fed by arrivals and drained by production.

    production_rate = min(capacity, cars_in_line / average_production_duration)
    average_production_duration = duration_a + duration_b * cars_in_line
    (windows; ``duration_b`` is 0 unless a WIP -> flow-time relation was found)
    """
    parameters: dict
    initial: dict = field(default_factory=dict)
    window_ms: int = DAY_MS
    worked: bool = False

    def to_dict(self):
        return {
            "stocks": {STOCK: {"initial": self.initial.get(STOCK, 0.0), "unit": "cars"}},
            "flows": {INFLOW: {"into": STOCK, "unit": "cars/step"},
                      OUTFLOW: {"from": STOCK, "unit": "cars/step"}},
            "variables": {DURATION: {"unit": "steps"}},
            "links": [[STOCK, OUTFLOW], [DURATION, OUTFLOW], [STOCK, DURATION]],
            "equations": {
                OUTFLOW: f"min(capacity, {STOCK} / {DURATION})",
                DURATION: f"duration_a + duration_b * {STOCK}",
                INFLOW: "arrival",
            },
            "parameters": dict(sorted(self.parameters.items())),
            "window_ms": self.window_ms,
            "worked_time_windows": self.worked,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(dict(d["parameters"]), {STOCK: float(d["stocks"][STOCK]["initial"])},
                       int(d.get("window_ms", DAY_MS)), bool(d.get("worked_time_windows", False)))
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"bad stock-flow model: {exc}") from exc


def build_stock_flow(sdlog: SDLog, relations=()) -> StockFlowModel:
    cols = sdlog.columns
    for name in ("arrival_rate", "production_rate", "wip", "avg_flow_time"):
        if name not in cols:
            raise DataError(f"SD-log lacks mandatory variable {name!r}")
    step_s = sdlog.window_ms / 1000.0
    flow = cols["avg_flow_time"] / step_s
    wip = cols["wip"]
    ok = np.isfinite(flow)
    if not ok.any():
        raise DataError("no finished cases to fit the production duration")
    a, b = float(np.mean(flow[ok])), 0.0
    linked = any(r.source == "wip" and r.target == "avg_flow_time" for r in relations)
    if linked and ok.sum() >= 3 and np.ptp(wip[ok]) > 0:
        b, a = (float(v) for v in np.polyfit(wip[ok], flow[ok], 1))
        if a + b * float(np.min(wip[ok])) <= 0:
            a, b = float(np.mean(flow[ok])), 0.0
    arr = cols["arrival_rate"]
    active = arr[:int(np.nonzero(arr)[0].max()) + 1] if arr.any() else arr
    params = {"arrival": float(np.mean(active)),
              "capacity": float(np.max(cols["production_rate"])),
              "duration_a": a, "duration_b": b}
    return StockFlowModel(params, {STOCK: float(np.mean(wip))}, sdlog.window_ms, sdlog.worked)


@dataclass
class SDRun:
    columns: dict        # name -> list per step
    clamps: list         # steps at which the stock was clamped to 0

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        names = ["stock_before", STOCK, INFLOW, OUTFLOW, DURATION, "clamped"]
        w.writerow(["step"] + names)
        for i in range(len(self.columns[STOCK])):
            w.writerow([i] + [repr(self.columns[n][i]) if n != "clamped" else
                              int(self.columns[n][i]) for n in names])
        return buf.getvalue()


def _series(value, steps, name):
    if np.ndim(value) == 0:
        return [float(value)] * steps
    v = [float(x) for x in value]
    if len(v) < steps:
        raise DataError(f"override series {name!r} shorter than {steps} steps")
    return v


def simulate_sd(model: StockFlowModel, steps: int, scenario=None) -> SDRun:
    """Forward Euler with one window per step.

    ``scenario`` overrides parameters; ``arrival`` may be a per-step series,
    ``duration_scale`` and ``capacity_scale`` multiply the fitted values, and
    ``production`` (scalar or series) replaces the outflow equation.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    p = dict(model.parameters)
    p.update(scenario or {})
    arrivals = _series(p["arrival"], steps, "arrival")
    fixed_out = _series(p["production"], steps, "production") if "production" in p else None
    cap = float(p["capacity"]) * float(p.get("capacity_scale", 1.0))
    scale = float(p.get("duration_scale", 1.0))
    s = float(p.get("initial", model.initial.get(STOCK, 0.0)))
    cols = {k: [] for k in ("stock_before", STOCK, INFLOW, OUTFLOW, DURATION, "clamped")}
    clamps = []
    for t in range(steps):
        dur = scale * (float(p["duration_a"]) + float(p["duration_b"]) * s)
        out = min(cap, s / dur) if dur > 0 else cap
        if fixed_out is not None:
            out = fixed_out[t]
        inn = arrivals[t]
        nxt = s + (inn - out)
        clamped = nxt < 0
        if clamped:
            clamps.append(t)
            nxt = 0.0
        for v in (s, inn, out, dur, nxt):
            if not math.isfinite(v):
                raise DataError(f"non-finite value at step {t}")
        cols["stock_before"].append(s)
        cols[STOCK].append(nxt)
        cols[INFLOW].append(inn)
        cols[OUTFLOW].append(out)
        cols[DURATION].append(dur)
        cols["clamped"].append(clamped)
        s = nxt
    return SDRun(cols, clamps)


# ------------------------------------------------------------ what-if


@dataclass
class WhatIf:
    baseline: SDRun
    scenario: SDRun
    period: int
    duration_ratio: float
    capacity_ratio: float

    def period_totals(self, run):
        prod = run.columns[OUTFLOW]
        return [sum(prod[i:i + self.period]) for i in range(0, len(prod), self.period)]

    @property
    def deltas(self):
        return [b - a for a, b in zip(self.period_totals(self.baseline),
                                      self.period_totals(self.scenario))]

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["period", "baseline_production", "scenario_production", "delta"])
        for i, (a, b) in enumerate(zip(self.period_totals(self.baseline),
                                       self.period_totals(self.scenario))):
            w.writerow([i, repr(a), repr(b), repr(b - a)])
        return buf.getvalue()


def _fit(config, seed, horizon, window_ms, calendar):
    from .simulator import simulate
    res = simulate(config, seed, horizon, objects=False)
    sdl = extract_sdlog(build_traces(res.log), window_ms, calendar)
    return build_stock_flow(sdl)


def whatif_buffer(baseline: StockFlowModel, buffer: BufferSpec, config: LineConfig,
                  seed=0, horizon=450, steps=22, period=22) -> WhatIf:
    """Production with and without a sub-assembly buffer.

    The buffer's decoupling effect is calibrated on a pair of line
    simulations (seed + 10000) with and without the buffer; their ratio of
    fitted production durations (and capacities) is applied to ``baseline``.
    """
    if buffer.sa_station not in config.sa_stations:
        raise DataError(f"buffer target {buffer.sa_station!r} is not a modeled SA station")
    base_run = simulate_sd(baseline, steps)
    if buffer.capacity == 0:
        return WhatIf(base_run, simulate_sd(baseline, steps), period, 1.0, 1.0)
    calendar = config.calendar if baseline.worked else None
    ref = _fit(config, seed + 10000, horizon, baseline.window_ms, calendar)
    buf = _fit(apply_injection(config, buffer), seed + 10000, horizon, baseline.window_ms, calendar)
    d_ratio = buf.parameters["duration_a"] / ref.parameters["duration_a"]
    c_ratio = buf.parameters["capacity"] / ref.parameters["capacity"]
    scn = simulate_sd(baseline, steps, {"duration_scale": d_ratio, "capacity_scale": c_ratio})
    return WhatIf(base_run, scn, period, d_ratio, c_ratio)
