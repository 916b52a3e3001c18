import random
import warnings
from collections import Counter

import pytest
from hypothesis import given, strategies as st

from pmline.cube import (CubeError, apply_query, attribute_dimension, build_cube,
                         default_locations, dice, drill_down, hierarchy_dimension,
                         parse_hierarchy, roll_up, slice, time_dimension)
from pmline.eventlog import Event, EventLog, from_ms, parse_ts

CITIES = ["Brussels", "Antwerp", "Amsterdam", "Rotterdam", "Aachen"]
COLORS = ["white", "blue", "red"]
YEARS = [2016, 2017, 2018, 2019]


def random_log(rnd, n=None):
    n = rnd.randint(1, 1000) if n is None else n
    evs = []
    for i in range(n):
        y = rnd.choice(YEARS)
        ts = parse_ts(f"{y}-{rnd.randint(1, 12):02d}-{rnd.randint(1, 28):02d}T10:00:00Z")
        evs.append(Event(f"e{i:04d}", rnd.choice("ABC"), ts, "complete", None,
                         f"car{rnd.randint(0, n // 3):03d}",
                         {"color": rnd.choice(COLORS), "city": rnd.choice(CITIES)}))
    return EventLog(evs)


def dims():
    return [attribute_dimension("color"),
            hierarchy_dimension("location", "city", default_locations(), ("city", "country")),
            time_dimension(level="year")]


def ids(evs):
    return Counter(e.event_id for e in evs)


def test_white_brussels_2017_cell(base_sim):
    cube = build_cube(base_sim.log, dims())
    cells = cube.cells()
    key = ("white", "Brussels", 2017)
    want = [e for e in base_sim.log if e.attrs["color"] == "white"
            and e.attrs["city"] == "Brussels" and from_ms(e.timestamp).year == 2017]
    assert want and cells[key] == want


def test_zero_dimensions_single_cell(base_sim):
    cube = build_cube(base_sim.log)
    assert list(cube.cells()) == [()]
    tl = cube.materialize(())
    assert tl.n_events == len(base_sim.log)


def test_degenerate_dimension():
    rnd = random.Random(2)
    log = random_log(rnd, 200)
    log = EventLog([Event(e.event_id, e.activity, e.timestamp, e.lifecycle, None,
                          e.case_id, {**e.attrs, "plant": "x"}) for e in log])
    a = build_cube(log, dims())
    b = build_cube(log, dims() + [attribute_dimension("plant")])
    assert [k + ("x",) for k in a.cells()] == list(b.cells())
    assert list(a.cells().values()) == list(b.cells().values())


def test_unknown_attribute_and_ocel():
    log = random_log(random.Random(0), 10)
    from pmline.errors import UnknownAttributeError
    with pytest.raises(UnknownAttributeError):
        build_cube(log, [attribute_dimension("shape")])
    from pmline.ocpm import ObjectCentricLog
    with pytest.raises(CubeError):
        build_cube(ObjectCentricLog([], {}), [])


def test_incomplete_hierarchy_rejected():
    log = random_log(random.Random(0), 50)
    with pytest.raises(CubeError):
        build_cube(log, [hierarchy_dimension("location", "city", {"Brussels": "Belgium"})])


def test_slice_two_years():
    log = random_log(random.Random(3), 400)
    cube = slice(build_cube(log, dims()), "time", {2017, 2018})
    assert [d.name for d in cube.dims] == ["color", "location"]
    assert ids(cube.events()) == ids(e for e in log if from_ms(e.timestamp).year in (2017, 2018))


def test_slice_single_valued():
    log = random_log(random.Random(4), 100)
    log = log.with_events([e for e in log if e.attrs["color"] == "red"])
    cube = build_cube(log, dims())
    s = slice(cube, "color", "red")
    assert ids(s.events()) == ids(cube.events()) and len(s.dims) == 2


def test_dice_two_colors_two_years():
    log = random_log(random.Random(5), 500)
    cube = dice(build_cube(log, dims()), {"color": {"white", "blue"}, "time": {2017, 2018}})
    assert len(cube.dims) == 3
    want = [e for e in log if e.attrs["color"] in ("white", "blue")
            and from_ms(e.timestamp).year in (2017, 2018)]
    assert cube.events() == want
    assert dice(build_cube(log, dims()), {}).events() == list(log)


def test_errors():
    cube = build_cube(random_log(random.Random(6), 50), dims())
    with pytest.raises(CubeError):
        slice(cube, "shape", "x")
    with pytest.raises(CubeError):
        slice(cube, "color", "purple")
    with pytest.raises(CubeError):
        drill_down(cube, "location")
    with pytest.raises(CubeError):
        roll_up(roll_up(cube, "location"), "location")
    with pytest.raises(CubeError):
        apply_query(cube, "pivot color")


def test_rollup_merges_dutch_cities():
    log = random_log(random.Random(7), 600)
    cube = build_cube(log, dims())
    up = roll_up(cube, "location")
    assert set(up.values("location")) <= {"Belgium", "Netherlands", "Germany"}
    for (color, country, year), evs in up.cells().items():
        if country == "Netherlands":
            parts = [cube.cells().get((color, c, year), []) for c in ("Amsterdam", "Rotterdam")]
            assert ids(evs) == ids(parts[0] + parts[1])
    assert drill_down(up, "location").cells() == cube.cells()


def test_time_hierarchy():
    log = random_log(random.Random(8), 100)
    cube = build_cube(log, [time_dimension(level="day")])
    month = roll_up(cube, "time")
    assert all(len(k[0]) == 7 for k in month.cells())
    year = roll_up(month, "time")
    assert set(year.values("time")) <= set(YEARS)


def test_filter_survives_rollup():
    log = random_log(random.Random(9), 300)
    cube = slice(build_cube(log, dims()), "location", "Amsterdam")
    cube2 = dice(build_cube(log, dims()), {"location": {"Amsterdam"}})
    up = roll_up(cube2, "location")
    assert ids(up.events()) == ids(cube.events())
    assert list(up.cells()) and all(k[1] == "Netherlands" for k in up.cells())


def test_materialize_cells_union_and_empty():
    log = random_log(random.Random(10), 300)
    cube = roll_up(build_cube(log, dims()), "location")
    union = Counter()
    for key in cube.cells():
        union += Counter(e.event_id for e in cube.materialize(key).events())
    assert union == ids(log)
    with pytest.warns(UserWarning):
        tl = cube.materialize(("white", "Germany", 1999))
    assert len(tl) == 0


def test_query_language():
    log = random_log(random.Random(11), 300)
    cube = build_cube(log, dims())
    q = apply_query(cube, "rollup location; slice time=2017; dice color=white,blue")
    ref = dice(slice(roll_up(cube, "location"), "time", 2017), {"color": {"white", "blue"}})
    assert q.cells() == ref.cells()


def test_parse_hierarchy():
    assert parse_hierarchy("child,parent\na,x\nb,x\n") == {"a": "x", "b": "x"}
    assert parse_hierarchy("a,x\n") == {"a": "x"}
    with pytest.raises(CubeError):
        parse_hierarchy("a,x,y\n")


def test_split_cases_flagged():
    evs = [Event("1", "A", parse_ts("2017-03-01"), case_id="c", attrs={"color": "red"}),
           Event("2", "B", parse_ts("2018-03-01"), case_id="c", attrs={"color": "red"})]
    cube = build_cube(EventLog(evs), [time_dimension(level="year")])
    assert cube.split_cases() == ["c"]


# ------------------------------------------------------------ laws (randomised)


@given(st.randoms(use_true_random=False))
def test_cube_laws(rnd):
    log = random_log(rnd)
    cube = build_cube(log, dims())
    if rnd.random() < 0.5:
        cube = roll_up(cube, "location")
    if rnd.random() < 0.5:
        cube = roll_up(drill_down(cube, "time"), "time")
    # partition: disjoint and exhaustive
    seen = Counter()
    for evs in cube.cells().values():
        seen += ids(evs)
    assert seen == ids(cube.events()) and max(seen.values()) == 1
    # slice commutes
    a, b = rnd.sample(["color", "location", "time"], 2)
    pick = rnd.choice(cube.events())
    va, vb = cube.dim(a).at(pick), cube.dim(b).at(pick)
    ab = slice(slice(cube, a, va), b, vb)
    ba = slice(slice(cube, b, vb), a, va)
    assert ids(ab.events()) == ids(ba.events())
    # slice = dice + removal
    d = dice(cube, {a: {va}})
    assert ids(slice(cube, a, va).events()) == ids(d.events())
    # roll-up conserves events and case membership
    up = roll_up(build_cube(log, dims()), "location")
    assert ids(up.events()) == ids(log)
    assert Counter(e.case_id for e in up.events()) == Counter(e.case_id for e in log)
    # dice == sequence of single-dimension dices
    colors = cube.values("color")
    picked = set(rnd.sample(colors, min(2, len(colors))))
    first = dice(cube, {"color": picked})
    filt = {"color": picked, "time": {rnd.choice(first.values("time"))}}
    seqd = dice(first, {"time": filt["time"]})
    assert ids(dice(cube, filt).events()) == ids(seqd.events())
