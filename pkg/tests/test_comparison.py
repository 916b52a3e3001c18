import random

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pmline import scenarios
from pmline.comparison import (DurationDistribution, VariantDistribution, compare_report,
                               duration_emd, normalized_edit_distance, pair_table,
                               peak_count, summarize, variant_emd)
from pmline.eventlog import EventLog, build_traces
from pmline.simulator import simulate

from conftest import ev, trace_log
from oracles import duration_emd_lp, variant_emd_lp

samples = st.lists(st.floats(0, 1e4, allow_nan=False), min_size=1, max_size=20)


def test_identical_and_point_masses():
    assert duration_emd([1.0, 2.0, 3.0], [3.0, 1.0, 2.0]) == 0
    assert duration_emd([0.0], [10.0]) == 10
    with pytest.raises(ValueError):
        duration_emd([], [1.0])
    with pytest.raises(ValueError):
        DurationDistribution("GA5", [-1.0])


def test_duration_emd_matches_lp():
    rng = np.random.default_rng(0)
    for _ in range(30):
        a = rng.lognormal(3, 1, 20)
        b = rng.lognormal(3.2, 0.8, rng.integers(1, 25))
        assert duration_emd(a, b) == pytest.approx(duration_emd_lp(a, b), abs=1e-9, rel=1e-12)


@given(samples, samples, samples)
def test_duration_emd_metric(a, b, c):
    ab, ba = duration_emd(a, b), duration_emd(b, a)
    assert ab >= 0 and ab == pytest.approx(ba, abs=1e-9)
    assert duration_emd(a, a) == 0
    assert ab <= duration_emd(a, c) + duration_emd(c, b) + 1e-7


@given(samples, samples, st.floats(-100, 100))
def test_duration_emd_translation(a, b, shift):
    a, b = np.array(a), np.array(b)
    d = duration_emd(a, b)
    assert duration_emd(a + 200 + shift, b + 200 + shift) == pytest.approx(d, abs=1e-7)
    assert abs(duration_emd(a + 200 + shift, b + 200) - d) <= abs(shift) + 1e-7


def test_variant_examples():
    assert variant_emd({("A",): 1.0}, {("B",): 1.0}) == 1.0
    d = {("A", "B"): 0.3, ("B",): 0.7}
    assert variant_emd(d, d) == 0
    assert normalized_edit_distance(("A", "B", "C"), ("A", "C")) == pytest.approx(1 / 3)
    with pytest.raises(ValueError):
        VariantDistribution({("A",): 0.5})


variants = st.dictionaries(st.lists(st.sampled_from("ABC"), min_size=1, max_size=4).map(tuple),
                           st.integers(1, 9), min_size=1, max_size=4)


@given(variants, variants)
def test_variant_emd_matches_lp(p, q):
    tp, tq = sum(p.values()), sum(q.values())
    pf = {k: v / tp for k, v in p.items()}
    qf = {k: v / tq for k, v in q.items()}
    ref = variant_emd_lp(pf, qf)
    assert variant_emd(p, q) == pytest.approx(ref, abs=1e-9)      # counts
    assert variant_emd(pf, qf) == pytest.approx(ref, abs=1e-8)    # frequencies


@given(variants, variants, variants)
def test_variant_emd_metric(p, q, r):
    pq = variant_emd(p, q)
    assert 0 <= pq <= 1 + 1e-12
    assert pq == pytest.approx(variant_emd(q, p), abs=1e-12)
    assert variant_emd(p, p) == 0
    assert pq <= variant_emd(p, r) + variant_emd(r, q) + 1e-9


@given(variants, variants, st.permutations("ABC"))
def test_variant_emd_relabel_invariant(p, q, perm):
    m = dict(zip("ABC", perm))
    rp = {tuple(m[a] for a in k): v for k, v in p.items()}
    rq = {tuple(m[a] for a in k): v for k, v in q.items()}
    assert variant_emd(rp, rq) == pytest.approx(variant_emd(p, q), abs=1e-12)


def test_variant_from_log():
    tl = trace_log("AB", "AB", "B")
    vd = VariantDistribution.from_log(tl)
    assert vd.frequencies == {("A", "B"): 2 / 3, ("B",): 1 / 3}


def test_pair_table_single_case():
    t = 1483347600000      # 2017-01-02 09:00 UTC
    evs = [ev("1", "GA4", t, lc="start"), ev("2", "GA4", t + 60_000),
           ev("3", "GA5", t + 60_000, lc="start"), ev("4", "GA5", t + 180_000),
           ev("5", "GA4", t, case="c2", lc="start"), ev("6", "GA4", t + 1000, case="c2")]
    pt = pair_table(build_traces(EventLog(evs)), "GA4", "GA5")
    assert pt.rows == [("c1", 60.0, 120.0)] and pt.excluded == 1
    assert np.isnan(pt.spearman()[0])
    assert pt.to_csv().splitlines() == ["case_id,GA4,GA5", "c1,60.0,120.0"]


def test_peak_count():
    rng = np.random.default_rng(3)
    assert peak_count(rng.normal(0, 1, 2000)) == 1
    assert peak_count(rng.uniform(0, 1, 50)) >= 1
    # a plateau counts once
    assert peak_count([1.0] * 10 + [2.0] * 10) == 1
    assert peak_count(np.concatenate([rng.normal(0, 1, 1000), rng.normal(10, 1, 1000)])) == 2
    assert peak_count([5.0, 5.0]) == 1 and peak_count([]) == 0


def test_summarize_tail():
    s = summarize(np.arange(1, 101, dtype=float))
    assert s["p50"] == 50.5 and s["tail_index"] == pytest.approx(95.05 / 50.5)


def test_self_comparison(base_traces):
    rep = compare_report(base_traces, base_traces, stations=["GA4", "GA5", "GA6"])
    assert rep.variant_emd == 0
    for row in rep.stations.values():
        assert row["emd"] == 0 and row["flags"] == []


def test_two_factory_single_seed():
    nl_cfg, be_cfg = scenarios.two_factory()
    nl = build_traces(simulate(nl_cfg, 5, 500, objects=False).log)
    be = build_traces(simulate(be_cfg, 1005, 500, objects=False).log)
    rep = compare_report(nl, be, stations=["GA4", "GA5", "GA6"], calendar=nl_cfg.calendar)
    assert rep.stations["GA4"]["a"]["peaks"] == 2
    assert "longer tail in a" in rep.stations["GA5"]["flags"]
    pair = rep.pairs["GA4~GA5"]
    assert pair["a"]["rho"] < 0 and pair["a"]["related"]
