import pytest
from hypothesis import HealthCheck, settings

from pmline import scenarios
from pmline.eventlog import Event, EventLog, build_traces
from pmline.simulator import simulate

settings.register_profile(
    "pmline", max_examples=60, deadline=None,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("pmline")

MIN = 60_000


def ev(eid, act, ts, case="c1", lc="complete", res=None, **attrs):
    return Event(eid, act, ts, lc, res, case, attrs)


def trace_log(*seqs, gap=MIN):
    """TraceLog of complete-only events, one trace per sequence."""
    evs = []
    for ci, seq in enumerate(seqs):
        for j, a in enumerate(seq):
            evs.append(ev(f"c{ci}-{j}", a, j * gap, case=f"c{ci}"))
    return build_traces(EventLog(evs))


@pytest.fixture(scope="session")
def base_sim():
    return simulate(scenarios.baseline(), 7, 50)


@pytest.fixture(scope="session")
def base_traces(base_sim):
    return build_traces(base_sim.log)
