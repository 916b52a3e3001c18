"""Process cubes: slice, dice, roll-up and drill-down over event attributes."""
import csv
import io
import warnings
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

from .errors import DataError, UnknownAttributeError
from .eventlog import EventLog, TraceLog, build_traces, from_ms


class CubeError(DataError):
    pass


@dataclass(frozen=True)
class Dimension:
    """An attribute seen through a hierarchy of levels.

    ``maps[i]`` takes a level-i value to its level-(i+1) parent; it is either
    a dict or a callable.  ``base`` turns the raw attribute into a level-0
    value (identity when omitted).
    """
    name: str
    attribute: str
    levels: tuple = ("value",)
    maps: tuple = ()
    level: int = 0
    base: Optional[Callable] = None

    def __post_init__(self):
        if len(self.maps) != len(self.levels) - 1:
            raise CubeError(f"dimension {self.name}: need one map per level step")
        if not 0 <= self.level < len(self.levels):
            raise CubeError(f"dimension {self.name}: level out of range")

    @property
    def level_name(self):
        return self.levels[self.level]

    def at(self, event, level=None):
        level = self.level if level is None else level
        v = event.get(self.attribute)
        if self.base is not None:
            v = self.base(v)
        for m in self.maps[:level]:
            try:
                v = m[v] if isinstance(m, dict) else m(v)
            except KeyError:
                raise CubeError(f"dimension {self.name}: no parent for {v!r}") from None
        return v


def _day(ms):
    return from_ms(ms).date().isoformat()


def time_dimension(name="time", attribute="timestamp", level="year"):
    levels = ("day", "month", "year")
    return Dimension(name, attribute, levels, (lambda d: d[:7], lambda m: int(m[:4])),
                     levels.index(level), _day)


def attribute_dimension(name, attribute=None):
    return Dimension(name, attribute or name)


def hierarchy_dimension(name, attribute, hierarchy, levels=None):
    """One-step hierarchy from a child -> parent mapping."""
    return Dimension(name, attribute, tuple(levels or (attribute, "parent")), (dict(hierarchy),))


def parse_hierarchy(text):
    """``child,parent`` rows (a header row is optional) -> mapping."""
    out = {}
    for i, row in enumerate(csv.reader(io.StringIO(text))):
        if not row:
            continue
        if len(row) != 2:
            raise CubeError(f"hierarchy line {i + 1}: expected child,parent")
        if i == 0 and [c.strip().lower() for c in row] == ["child", "parent"]:
            continue
        out[row[0].strip()] = row[1].strip()
    return out


def load_hierarchy(path):
    with open(path, encoding="utf-8") as fh:
        return parse_hierarchy(fh.read())


@dataclass(frozen=True)
class _Filter:
    dim: Dimension          # frozen at the level the filter was stated
    values: frozenset

    def __call__(self, ev):
        return self.dim.at(ev) in self.values


@dataclass(frozen=True)
class ProcessCube:
    log: EventLog
    dims: tuple
    filters: tuple = ()
    removed: tuple = field(default=())    # names of sliced-away dimensions

    # ---------------------------------------------------------------- access
    def dim(self, name):
        for d in self.dims:
            if d.name == name:
                return d
        raise CubeError(f"unknown or inactive dimension {name!r}")

    def events(self):
        return [e for e in self.log.events if all(f(e) for f in self.filters)]

    def values(self, name):
        d = self.dim(name)
        return sorted({d.at(e) for e in self.events()}, key=_order)

    def cells(self):
        out = defaultdict(list)
        for e in self.events():
            out[tuple(d.at(e) for d in self.dims)].append(e)
        return dict(sorted(out.items(), key=lambda kv: tuple(_order(v) for v in kv[0])))

    def split_cases(self):
        """Cases whose events fall into more than one cell."""
        where = defaultdict(set)
        for key, evs in self.cells().items():
            for e in evs:
                where[e.case_id].add(key)
        return sorted(c for c, k in where.items() if len(k) > 1 and c is not None)

    def materialize(self, coords=()) -> TraceLog:
        coords = tuple(coords)
        if len(coords) != len(self.dims):
            raise CubeError(f"expected {len(self.dims)} coordinates, got {len(coords)}")
        evs = [e for e in self.events()
               if all(_same(d.at(e), c) for d, c in zip(self.dims, coords))]
        if not evs:
            warnings.warn(f"cell {coords} is empty", stacklevel=2)
            return TraceLog({}, self.log.schema)
        return build_traces(self.log.with_events(evs))


def _order(v):
    return (0, v, "") if isinstance(v, (int, float)) else (1, 0, str(v))


def _same(value, coord):
    return value == coord or str(value) == str(coord)


def _resolve(cube, d, values):
    vals = values if isinstance(values, (set, frozenset, list, tuple)) else {values}
    seen = cube.values(d.name)
    out = set()
    for v in vals:
        hit = [s for s in seen if _same(s, v)]
        if not hit:
            raise CubeError(f"value {v!r} not observed in dimension {d.name}")
        out.update(hit)
    return frozenset(out)


def build_cube(log, dims=()) -> ProcessCube:
    if not isinstance(log, EventLog):
        if type(log).__name__ == "ObjectCentricLog":
            raise CubeError("process cubes are not defined for object-centric logs")
        raise CubeError("build_cube expects an EventLog")
    names = [d.name for d in dims]
    if len(set(names)) != len(names):
        raise CubeError("dimension names must be unique")
    for d in dims:
        try:
            log.attribute_type(d.attribute)
        except UnknownAttributeError:
            raise
        for e in log.events:
            d.at(e)          # totality of the level mappings
            for lvl in range(len(d.levels)):
                d.at(e, lvl)
    return ProcessCube(log, tuple(dims))


def slice(cube: ProcessCube, dim: str, value) -> ProcessCube:  # noqa: A001
    d = cube.dim(dim)
    vals = _resolve(cube, d, value)
    return replace(cube, dims=tuple(x for x in cube.dims if x.name != dim),
                   filters=cube.filters + (_Filter(d, vals),), removed=cube.removed + (dim,))


def dice(cube: ProcessCube, filters) -> ProcessCube:
    new = cube.filters
    for name, vals in filters.items():
        d = cube.dim(name)
        new = new + (_Filter(d, _resolve(cube, d, vals)),)
    return replace(cube, filters=new)


def _relevel(cube, dim, step):
    d = cube.dim(dim)
    lvl = d.level + step
    if not 0 <= lvl < len(d.levels):
        raise CubeError(f"dimension {dim} has no level {'above' if step > 0 else 'below'} "
                        f"{d.level_name!r}")
    nd = replace(d, level=lvl)
    return replace(cube, dims=tuple(nd if x.name == dim else x for x in cube.dims))


def roll_up(cube: ProcessCube, dim: str) -> ProcessCube:
    return _relevel(cube, dim, +1)


def drill_down(cube: ProcessCube, dim: str) -> ProcessCube:
    return _relevel(cube, dim, -1)


# ------------------------------------------------------------ query language


def apply_query(cube: ProcessCube, query: str) -> ProcessCube:
    """Apply ``;``-separated operations: ``slice dim=value``,
    ``dice dim=v1,v2 [dim2=...]``, ``rollup dim``, ``drilldown dim``."""
    for part in filter(None, (p.strip() for p in query.split(";"))):
        op, _, rest = part.partition(" ")
        rest = rest.strip()
        if op == "slice":
            name, eq, val = rest.partition("=")
            if not eq:
                raise CubeError(f"bad slice {part!r}")
            cube = slice(cube, name.strip(), set(v.strip() for v in val.split(",")))
        elif op == "dice":
            spec = {}
            for item in rest.split():
                name, eq, val = item.partition("=")
                if not eq:
                    raise CubeError(f"bad dice {part!r}")
                spec[name] = set(v.strip() for v in val.split(","))
            cube = dice(cube, spec)
        elif op == "rollup":
            cube = roll_up(cube, rest)
        elif op == "drilldown":
            cube = drill_down(cube, rest)
        else:
            raise CubeError(f"unknown cube operation {op!r}")
    return cube


def default_locations():
    """City -> country mapping shipped with the package."""
    from importlib import resources
    return parse_hierarchy(resources.files("pmline.data").joinpath("locations.csv").read_text())
