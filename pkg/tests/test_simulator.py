from collections import defaultdict
from dataclasses import replace

import numpy as np
import pytest

from pmline import scenarios
from pmline.calendar import Calendar
from pmline.config import (BufferSpec, DeviationSpec, DriftSpec, HoldSpec, LineConfig,
                           apply_injection, injection_from_dict)
from pmline.errors import ConfigError
from pmline.eventlog import build_traces, write_csv_log
from pmline.performance import station_stats
from pmline.simulator import simulate


def _instances(log):
    """(car, station) -> (start, complete, resource)."""
    out = {}
    for e in log:
        key = (e.case_id, e.activity)
        s, c, r = out.get(key, (None, None, None))
        if e.lifecycle == "start":
            out[key] = (e.timestamp, c, e.resource)
        else:
            out[key] = (s, e.timestamp, r)
    return out


def test_default_topology():
    cfg = LineConfig.default()
    assert len(cfg.ga_stations) == 28 and len(cfg.sa_stations) == 33
    for sa, ga in (("SA9", "GA17"), ("SA1", "GA14"), ("SA4", "GA16"), ("SA7", "GA24")):
        assert sa in cfg.prerequisites[ga]
    chain = cfg.chain_of("SA7")
    i = chain.index("SA7")
    assert chain[i - 1:i + 2] == ("SA6", "SA7", "SA8")


def test_config_json_roundtrip():
    cfg = scenarios.drift()
    assert LineConfig.from_dict(cfg.to_dict()) == cfg


def test_zero_horizon_empty():
    res = simulate(scenarios.baseline(), 1, 0)
    assert len(res.log) == 0 and len(res.ocel.events) == 0


def test_one_car_61_stations():
    res = simulate(scenarios.baseline(), 5, 1)
    assert len({e.activity for e in res.log}) == 61


def test_every_visit_has_start_and_complete(base_sim):
    inst = _instances(base_sim.log)
    assert len(inst) == 50 * 61
    assert all(s is not None and c is not None and s <= c for s, c, _ in inst.values())


def test_station_exclusivity(base_sim):
    by_station = defaultdict(list)
    for (car, st), (s, c, _) in _instances(base_sim.log).items():
        by_station[st].append((s, c))
    for ivs in by_station.values():
        ivs.sort()
        for (s0, c0), (s1, c1) in zip(ivs, ivs[1:]):
            assert c0 <= s1


def test_flow_conservation(base_sim):
    cfg = base_sim.config
    inst = _instances(base_sim.log)
    cars = {car for car, _ in inst}
    for car in cars:
        starts = [inst[(car, g)][0] for g in cfg.ga_stations]
        assert starts == sorted(starts)
        for chain in cfg.sa_chains:
            cs = [inst[(car, s)][0] for s in chain]
            assert cs == sorted(cs)
        for g, pre in cfg.prerequisites.items():
            for s in pre:
                assert inst[(car, s)][1] <= inst[(car, g)][0]


def test_operators_belong_to_section_pool(base_sim):
    pool = {s: set(sec.operators) for sec in base_sim.config.sections for s in sec.stations}
    for e in base_sim.log:
        assert e.resource in pool[e.activity]


def test_calendar_confinement(base_sim):
    cal = base_sim.config.calendar
    ts = np.array([e.timestamp for e in base_sim.log])
    assert cal.is_open(ts).all()


def test_determinism():
    a = simulate(scenarios.baseline(), 11, 20)
    b = simulate(scenarios.baseline(), 11, 20)
    assert write_csv_log(a.log) == write_csv_log(b.log)
    from pmline.ocpm import ocel_to_json
    assert ocel_to_json(a.ocel) == ocel_to_json(b.ocel)
    c = simulate(scenarios.baseline(), 12, 20)
    assert write_csv_log(a.log) != write_csv_log(c.log)


def test_skip_window_27_cars():
    tl = build_traces(simulate(scenarios.skip_window("SA4", 27), 2, 60, objects=False).log)
    missing = [c for c, t in tl if "SA4" not in {e.activity for e in t}]
    assert len(missing) == 27
    assert sorted(missing) == sorted(tl.cases)[:27]


def test_apply_injection_is_pure_and_validates():
    cfg = scenarios.baseline()
    new = apply_injection(cfg, DriftSpec("GA5", 600, 1.5))
    assert cfg.injections == () and len(new.injections) == 1
    with pytest.raises(ConfigError):
        apply_injection(cfg, DriftSpec("GA99", 1, 1.5))
    with pytest.raises(ConfigError):
        apply_injection(cfg, BufferSpec("GA3", 2))
    with pytest.raises(ConfigError):
        DeviationSpec("SA4", 1.5)
    with pytest.raises(ConfigError):
        DriftSpec("GA5", 0, 0.0)
    with pytest.raises(ConfigError):
        BufferSpec("SA7", -1)
    with pytest.raises(ConfigError):
        injection_from_dict({"kind": "nope"})
    assert injection_from_dict({"kind": "buffer", "sa_station": "SA7", "capacity": 3}) \
        == BufferSpec("SA7", 3)


def test_invalid_configs_rejected():
    cfg = scenarios.baseline()
    with pytest.raises(ConfigError):   # prerequisite outside every chain
        replace(cfg, prerequisites={**cfg.prerequisites, "GA3": ("SA99",)}).validate()
    with pytest.raises(ConfigError):   # duplicate label
        replace(cfg, sa_chains=cfg.sa_chains + (("SA1",),)).validate()
    from pmline.config import Operator
    with pytest.raises(ConfigError):
        replace(cfg, operators={**cfg.operators, "GF01": Operator("GF01", 0.0)}).validate()


def test_zero_buffer_is_identity():
    base = simulate(scenarios.baseline(), 4, 40, objects=False)
    buf = simulate(scenarios.with_buffer(scenarios.baseline(), "SA7", 0), 4, 40, objects=False)
    assert write_csv_log(base.log) == write_csv_log(buf.log)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_buffer_never_reduces_monthly_output(seed):
    month = 22 * 540
    for cfg in (scenarios.baseline(), scenarios.saturated()):
        a = simulate(cfg, seed, 300, objects=False)
        b = simulate(scenarios.with_buffer(cfg), seed, 300, objects=False)
        assert b.completed_by(month) >= a.completed_by(month)


def test_drift_raises_ga5_sojourn():
    cfg = scenarios.drift((("GA5", 150),), 1.5)
    res = simulate(cfg, 3, 300, objects=False)
    tl = build_traces(res.log)
    st = station_stats(tl, cfg.calendar, cfg.upstream_map())
    v = st.visits["GA5"]
    order = np.argsort(v.complete)
    soj = v.sojourn[order]
    assert soj[160:].mean() > 1.2 * soj[:140].mean()


def test_hold_scenario_long_tail():
    from pmline.discovery import dotted_chart
    res = simulate(scenarios.batch_delay(), 5, 200, objects=False)
    tl = build_traces(res.log)
    dc = dotted_chart(tl, "duration")
    dur = {c: (t[-1].timestamp - t[0].timestamp) for c, t in tl}
    top = dc.rows[:40]
    rest = dc.rows[40:]
    cal = res.config.calendar
    worked = {c: cal.worked_ms(tl.traces[c][0].timestamp, tl.traces[c][-1].timestamp)
              for c in tl.cases}
    # the parked cars dominate the slow fifth
    assert np.median([worked[c] for c in top]) > 1.5 * np.median([worked[c] for c in rest])
    assert min(dur[c] for c in top) >= max(dur[c] for c in rest)


def test_hold_must_follow_last_consumer():
    with pytest.raises(ConfigError):
        apply_injection(scenarios.baseline(), HoldSpec("GA3", 0.5, 60))


def test_calendar_mapping():
    cal = Calendar()
    # 9 worked hours per day: day 5 (Monday week 2) 08:00
    from pmline.eventlog import parse_ts
    assert cal.to_wall(5 * 9 * 3_600_000) == parse_ts("2017-01-09T08:00:00Z")
    t = parse_ts("2017-01-06T16:50:00Z")
    u = parse_ts("2017-01-09T08:10:00Z")
    assert cal.worked_ms(t, u) == 20 * 60_000
    assert cal.to_work(cal.to_wall(123_456)) == 123_456
    with pytest.raises(ValueError):
        Calendar(start_date="2017-01-01")
