"""Production-line configuration: topology, service times, operators, scenarios."""
import json
from dataclasses import dataclass, field, replace
from graphlib import CycleError, TopologicalSorter
from importlib import resources
from typing import Mapping, Optional, Union

from .calendar import Calendar
from .errors import ConfigError


@dataclass(frozen=True)
class DeviationSpec:
    """From car ``onset`` on, ``station`` is skipped with ``skip_probability``.

    When several specs name the same station, the one with the latest
    onset not after the car ordinal applies.
    """
    station: str
    skip_probability: float
    onset: int = 0

    def __post_init__(self):
        if not 0.0 <= self.skip_probability <= 1.0:
            raise ConfigError(f"skip probability {self.skip_probability} outside [0, 1]")


@dataclass(frozen=True)
class DriftSpec:
    """Service time at ``station`` is multiplied by ``service_scale`` from car ``onset`` on."""
    station: str
    onset: int
    service_scale: float

    def __post_init__(self):
        if not self.service_scale > 0:
            raise ConfigError("service_scale must be > 0")


@dataclass(frozen=True)
class BufferSpec:
    sa_station: str
    capacity: int

    def __post_init__(self):
        if self.capacity < 0:
            raise ConfigError("buffer capacity must be >= 0")


@dataclass(frozen=True)
class HoldSpec:
    """With ``probability`` a car is parked off-line for ``minutes`` of
    working time after finishing ``station`` (a batch/rework delay).
    Only allowed downstream of every parts-consuming station."""
    station: str
    probability: float
    minutes: float
    onset: int = 0

    def __post_init__(self):
        if not 0.0 <= self.probability <= 1.0 or self.minutes < 0:
            raise ConfigError("bad hold spec")


@dataclass(frozen=True)
class ReworkSpec:
    """Time saved at ``source`` by a faster-than-nominal operator comes back,
    times ``gain``, as extra work at ``target``."""
    source: str
    target: str
    gain: float


Injection = Union[DeviationSpec, DriftSpec, BufferSpec, HoldSpec]
_INJECTION_KINDS = {"deviation": DeviationSpec, "drift": DriftSpec,
                    "buffer": BufferSpec, "hold": HoldSpec}
_KIND_OF = {v: k for k, v in _INJECTION_KINDS.items()}


@dataclass(frozen=True)
class Operator:
    id: str
    speed: float = 1.0
    preference: Mapping[str, float] = field(default_factory=dict)

    def weight(self, station):
        return self.preference.get(station, 1.0)


@dataclass(frozen=True)
class Section:
    name: str
    stations: tuple
    operators: tuple


@dataclass(frozen=True)
class ObjectLayerConfig:
    products_per_order: Mapping[int, float] = field(default_factory=lambda: {1: 1.0})
    components_per_product: int = 2
    component_stations: tuple = ("GA0", "GA1", "GA2")
    order_lead_minutes: float = 60.0

    def __post_init__(self):
        if not self.products_per_order or min(self.products_per_order) < 1:
            raise ConfigError("orders need at least one product")
        if self.components_per_product < 1:
            raise ConfigError("components_per_product must be >= 1")


@dataclass(frozen=True)
class LineConfig:
    ga_stations: tuple
    sa_chains: tuple                 # tuple of tuples of SA labels
    prerequisites: Mapping[str, tuple]
    service: Mapping[str, tuple]     # station -> (mean minutes, log-sd)
    sections: tuple
    operators: Mapping[str, Operator]
    calendar: Calendar = Calendar()
    arrival: Mapping[str, float] = field(
        default_factory=lambda: {"kind": "lognormal", "mean": 60.0, "sigma": 0.1})
    first_release: float = 60.0      # working minutes after the first opening
    car_attrs: Mapping[str, Mapping[str, float]] = field(default_factory=dict)
    rework: tuple = ()
    injections: tuple = ()
    object_layer: ObjectLayerConfig = ObjectLayerConfig()

    # ------------------------------------------------------------ derived
    @property
    def sa_stations(self):
        return tuple(s for chain in self.sa_chains for s in chain)

    @property
    def stations(self):
        return tuple(self.ga_stations) + self.sa_stations

    def chain_of(self, station):
        for chain in self.sa_chains:
            if station in chain:
                return chain
        return None

    def consumer_of(self, chain):
        """GA station consuming a chain's output: the furthest GA listing
        any station of the chain as prerequisite."""
        best = None
        for g in self.ga_stations:
            if set(self.prerequisites.get(g, ())) & set(chain):
                best = g
        return best

    def upstream_map(self):
        """Station -> station whose release makes it reachable (None for line heads)."""
        up = {}
        for i, g in enumerate(self.ga_stations):
            up[g] = self.ga_stations[i - 1] if i else None
        for chain in self.sa_chains:
            for i, s in enumerate(chain):
                up[s] = chain[i - 1] if i else None
        return up

    # ------------------------------------------------------------ checks
    def validate(self):
        stations = self.stations
        if len(set(stations)) != len(stations):
            raise ConfigError("station labels must be unique across line and chains")
        known = set(stations)
        for g, pre in self.prerequisites.items():
            if g not in self.ga_stations:
                raise ConfigError(f"prerequisite target {g!r} is not a GA station")
            for s in pre:
                if s not in self.sa_stations:
                    raise ConfigError(f"prerequisite {s!r} of {g} belongs to no chain")
        graph = {s: set() for s in stations}
        for i in range(1, len(self.ga_stations)):
            graph[self.ga_stations[i]].add(self.ga_stations[i - 1])
        for chain in self.sa_chains:
            for i in range(1, len(chain)):
                graph[chain[i]].add(chain[i - 1])
        for g, pre in self.prerequisites.items():
            graph[g].update(pre)
        try:
            tuple(TopologicalSorter(graph).static_order())
        except CycleError as exc:
            raise ConfigError(f"cyclic prerequisite topology: {exc.args[1]}") from None
        for chain in self.sa_chains:
            if not chain:
                raise ConfigError("empty sub-assembly chain")
            if chain[-1] not in {s for pre in self.prerequisites.values() for s in pre}:
                raise ConfigError(f"chain ending in {chain[-1]} feeds no GA station")
        for s in stations:
            if s not in self.service:
                raise ConfigError(f"no service time for {s}")
            mean, sigma = self.service[s]
            if mean <= 0 or sigma < 0:
                raise ConfigError(f"bad service parameters for {s}")
        covered = {}
        for sec in self.sections:
            for s in sec.stations:
                if s in covered:
                    raise ConfigError(f"{s} in sections {covered[s]} and {sec.name}")
                covered[s] = sec.name
            if not sec.operators:
                raise ConfigError(f"section {sec.name} has no operators")
            for op in sec.operators:
                if op not in self.operators:
                    raise ConfigError(f"unknown operator {op!r} in {sec.name}")
        missing = known - set(covered)
        if missing:
            raise ConfigError(f"stations without section: {sorted(missing)}")
        for op in self.operators.values():
            if not op.speed > 0:
                raise ConfigError(f"operator {op.id} speed must be > 0")
        for rw in self.rework:
            for s in (rw.source, rw.target):
                if s not in known:
                    raise ConfigError(f"rework references unknown station {s!r}")
        last_consumer = max((self.ga_stations.index(g) for g in self.prerequisites
                             if self.prerequisites[g]), default=-1)
        for inj in self.injections:
            _check_injection(self, inj, last_consumer)
        for s in self.object_layer.component_stations:
            if s not in known:
                raise ConfigError(f"component station {s!r} unknown")
        if self.first_release < self.object_layer.order_lead_minutes:
            raise ConfigError("first_release must leave room for the order lead time")
        return self

    # ------------------------------------------------------------ io
    def to_dict(self):
        return {
            "ga_stations": list(self.ga_stations),
            "sa_chains": [list(c) for c in self.sa_chains],
            "prerequisites": {g: list(p) for g, p in self.prerequisites.items()},
            "service": {s: {"mean": m, "sigma": sd} for s, (m, sd) in self.service.items()},
            "sections": [{"name": s.name, "stations": list(s.stations),
                          "operators": list(s.operators)} for s in self.sections],
            "operators": {o.id: {"speed": o.speed, "preference": dict(o.preference)}
                          for o in self.operators.values()},
            "calendar": self.calendar.to_dict(),
            "arrival": dict(self.arrival),
            "first_release": self.first_release,
            "car_attrs": {k: dict(v) for k, v in self.car_attrs.items()},
            "rework": [{"source": r.source, "target": r.target, "gain": r.gain}
                       for r in self.rework],
            "injections": [dict(kind=_KIND_OF[type(i)], **i.__dict__) for i in self.injections],
            "object_layer": {
                "products_per_order": {str(k): v for k, v in
                                       self.object_layer.products_per_order.items()},
                "components_per_product": self.object_layer.components_per_product,
                "component_stations": list(self.object_layer.component_stations),
                "order_lead_minutes": self.object_layer.order_lead_minutes,
            },
        }

    @classmethod
    def from_dict(cls, d):
        try:
            ol = d.get("object_layer", {})
            cfg = cls(
                ga_stations=tuple(d["ga_stations"]),
                sa_chains=tuple(tuple(c) for c in d["sa_chains"]),
                prerequisites={g: tuple(p) for g, p in d["prerequisites"].items()},
                service={s: (float(v["mean"]), float(v["sigma"]))
                         for s, v in d["service"].items()},
                sections=tuple(Section(s["name"], tuple(s["stations"]), tuple(s["operators"]))
                               for s in d["sections"]),
                operators={k: Operator(k, float(v.get("speed", 1.0)),
                                       dict(v.get("preference", {})))
                           for k, v in d["operators"].items()},
                calendar=Calendar(**d.get("calendar", {})),
                arrival=dict(d.get("arrival", {"kind": "lognormal", "mean": 60.0, "sigma": 0.1})),
                first_release=float(d.get("first_release", 60.0)),
                car_attrs={k: dict(v) for k, v in d.get("car_attrs", {}).items()},
                rework=tuple(ReworkSpec(**r) for r in d.get("rework", [])),
                injections=tuple(injection_from_dict(i) for i in d.get("injections", [])),
                object_layer=ObjectLayerConfig(
                    products_per_order={int(k): float(v) for k, v in
                                        ol.get("products_per_order", {"1": 1.0}).items()},
                    components_per_product=int(ol.get("components_per_product", 2)),
                    component_stations=tuple(ol.get("component_stations", ("GA0", "GA1", "GA2"))),
                    order_lead_minutes=float(ol.get("order_lead_minutes", 60.0)),
                ),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed line config: {exc!r}") from None
        return cfg.validate()

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1) + "\n"

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            try:
                return cls.from_dict(json.load(fh))
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from None

    @classmethod
    def default(cls):
        text = resources.files("pmline.data").joinpath("default_line.json").read_text()
        return cls.from_dict(json.loads(text))


def injection_from_dict(d):
    d = dict(d)
    kind = d.pop("kind", None)
    if kind not in _INJECTION_KINDS:
        raise ConfigError(f"unknown injection kind {kind!r}")
    return _INJECTION_KINDS[kind](**d)


def _check_injection(cfg, spec, last_consumer):
    known = set(cfg.stations)
    if isinstance(spec, BufferSpec):
        if spec.sa_station not in cfg.sa_stations:
            raise ConfigError(f"buffer target {spec.sa_station!r} is not an SA station")
    elif isinstance(spec, (DeviationSpec, DriftSpec)):
        if spec.station not in known:
            raise ConfigError(f"unknown station {spec.station!r}")
    elif isinstance(spec, HoldSpec):
        if spec.station not in cfg.ga_stations:
            raise ConfigError(f"hold station {spec.station!r} is not a GA station")
        idx = cfg.ga_stations.index(spec.station)
        if idx < last_consumer or idx == len(cfg.ga_stations) - 1:
            raise ConfigError("holds must sit after the last parts-consuming station "
                              "and before the line end")
    else:
        raise ConfigError(f"not an injection: {spec!r}")


def apply_injection(config: LineConfig, spec: Injection) -> LineConfig:
    """New config with ``spec`` appended; ``config`` itself is untouched."""
    last_consumer = max((config.ga_stations.index(g) for g in config.prerequisites
                         if config.prerequisites[g]), default=-1)
    _check_injection(config, spec, last_consumer)
    return replace(config, injections=tuple(config.injections) + (spec,))


def with_changes(config: LineConfig, **changes) -> LineConfig:
    return replace(config, **changes).validate()
