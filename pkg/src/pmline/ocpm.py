"""Object-centric event data: flattening, convergence/divergence, multigraph."""
import json
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Any, Mapping

from .errors import LogFormatError, UnknownAttributeError
from .eventlog import COMPLETE, Event, TraceLog, format_ts, parse_ts

DEFAULT_TYPES = ("order", "product", "component", "delivery")


@dataclass(frozen=True)
class ObjectInfo:
    type: str
    attrs: Mapping[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class OCEvent:
    event_id: str
    activity: str
    timestamp: int
    omap: Mapping[str, tuple]
    attrs: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not any(self.omap.values()):
            raise ValueError(f"event {self.event_id}: empty object map")
        object.__setattr__(self, "omap", {t: tuple(ids) for t, ids in self.omap.items() if ids})

    def sort_key(self):
        return (self.timestamp, self.event_id)


class ObjectCentricLog:
    """Events referencing typed objects; kept in global time order."""

    def __init__(self, events, objects: Mapping[str, ObjectInfo]):
        self.objects = dict(objects)
        self.events = tuple(sorted(events, key=OCEvent.sort_key))
        seen = set()
        for ev in self.events:
            if ev.event_id in seen:
                raise ValueError(f"duplicate event_id {ev.event_id!r}")
            seen.add(ev.event_id)
            for t, ids in ev.omap.items():
                for oid in ids:
                    info = self.objects.get(oid)
                    if info is None:
                        raise ValueError(f"event {ev.event_id} references unknown object {oid!r}")
                    if info.type != t:
                        raise ValueError(f"object {oid!r} is a {info.type}, not a {t}")

    def __len__(self):
        return len(self.events)

    def __eq__(self, other):
        return (isinstance(other, ObjectCentricLog) and self.events == other.events
                and self.objects == other.objects)

    @property
    def types(self):
        return sorted({info.type for info in self.objects.values()})

    def _check_type(self, t):
        if t not in self.types:
            raise UnknownAttributeError(f"unknown object type {t!r}")


def ocel_to_json(log: ObjectCentricLog) -> dict:
    return {
        "objects": {oid: {"type": o.type, "attrs": dict(o.attrs)}
                    for oid, o in sorted(log.objects.items())},
        "events": [{"id": e.event_id, "activity": e.activity, "time": format_ts(e.timestamp),
                    "omap": {t: list(ids) for t, ids in sorted(e.omap.items())},
                    "vmap": dict(e.attrs)} for e in log.events],
    }


def ocel_from_json(doc) -> ObjectCentricLog:
    try:
        objects = {oid: ObjectInfo(o["type"], o.get("attrs", {}))
                   for oid, o in doc["objects"].items()}
        events = [OCEvent(e["id"], e["activity"], parse_ts(e["time"]),
                          {t: tuple(ids) for t, ids in e["omap"].items()}, e.get("vmap", {}))
                  for e in doc["events"]]
        return ObjectCentricLog(events, objects)
    except (KeyError, TypeError, ValueError) as exc:
        raise LogFormatError(f"bad object-centric log: {exc}") from exc


def write_ocel(log, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(ocel_to_json(log), fh, indent=1, sort_keys=True)
        fh.write("\n")


def read_ocel(path):
    with open(path, encoding="utf-8") as fh:
        return ocel_from_json(json.load(fh))


# ------------------------------------------------------------ flattening


def flatten(log: ObjectCentricLog, t: str) -> TraceLog:
    """One trace per object of type ``t``; events are copied per reference."""
    log._check_type(t)
    traces = defaultdict(list)
    for ev in log.events:
        for oid in ev.omap.get(t, ()):
            traces[oid].append(Event(f"{ev.event_id}#{oid}", ev.activity, ev.timestamp,
                                     COMPLETE, None, oid, ev.attrs))
    return TraceLog({oid: sorted(evs, key=Event.sort_key) for oid, evs in sorted(traces.items())})


@dataclass(frozen=True)
class FlatteningMetrics:
    type: str
    original_events: int        # events referencing the type
    flattened_events: int
    dropped_events: int         # events without a reference to the type
    replication_factor: float
    divergence: int
    activity_replication: Mapping[str, float]

    def to_dict(self):
        return {"type": self.type, "original_events": self.original_events,
                "flattened_events": self.flattened_events, "dropped_events": self.dropped_events,
                "replication_factor": self.replication_factor, "divergence": self.divergence,
                "activity_replication": dict(sorted(self.activity_replication.items()))}


def flattening_metrics(log: ObjectCentricLog, t: str) -> FlatteningMetrics:
    log._check_type(t)
    original = Counter()
    copies = Counter()
    dropped = 0
    by_id = {}
    for ev in log.events:
        n = len(ev.omap.get(t, ()))
        if n == 0:
            dropped += 1
            continue
        original[ev.activity] += 1
        copies[ev.activity] += n
        by_id[ev.event_id] = ev
    # divergence: same-activity neighbours in a flattened trace whose other
    # objects are disjoint, i.e. unrelated work chained only by the case notion
    divergence = 0
    for trace in flatten(log, t).traces.values():
        for a, b in zip(trace, trace[1:]):
            if a.activity != b.activity:
                continue
            ea = by_id[a.event_id.rsplit("#", 1)[0]]
            eb = by_id[b.event_id.rsplit("#", 1)[0]]
            oa = {o for ty, ids in ea.omap.items() if ty != t for o in ids}
            ob = {o for ty, ids in eb.omap.items() if ty != t for o in ids}
            if oa and ob and not (oa & ob):
                divergence += 1
    n_orig = sum(original.values())
    n_flat = sum(copies.values())
    return FlatteningMetrics(
        t, n_orig, n_flat, dropped, n_flat / n_orig if n_orig else float("nan"), divergence,
        {a: copies[a] / original[a] for a in original})


# ------------------------------------------------------------ multigraph


@dataclass
class DFMultigraph:
    nodes: set
    arcs: dict      # (a, b, type) -> ArcStats

    def project(self, t):
        return {(a, b): s for (a, b, ty), s in self.arcs.items() if ty == t}

    def types(self):
        return sorted({ty for _, _, ty in self.arcs})

    def to_dict(self):
        return {"nodes": sorted(self.nodes),
                "arcs": [{"from": a, "to": b, "type": t, **s.to_dict()}
                         for (a, b, t), s in sorted(self.arcs.items())]}


def discover_multigraph(log: ObjectCentricLog) -> DFMultigraph:
    from .discovery import discover_dfg
    nodes = set()
    arcs = {}
    for t in log.types:
        dfg = discover_dfg(flatten(log, t))
        nodes |= dfg.nodes
        for (a, b), s in dfg.arcs.items():
            arcs[(a, b, t)] = s
    return DFMultigraph(nodes, arcs)


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


def multigraph_to_dot(mg: DFMultigraph) -> str:
    from .discovery import SINK, SOURCE, dot_id
    lines = ["digraph dfm {", "  rankdir=LR;"]
    for n in sorted(mg.nodes):
        shape = "circle" if n in (SOURCE, SINK) else "box"
        lines.append(f"  {dot_id(n)} [label={dot_id(n)} shape={shape}];")
    colors = {t: _PALETTE[i % len(_PALETTE)] for i, t in enumerate(mg.types())}
    for (a, b, t), s in sorted(mg.arcs.items()):
        lines.append(f"  {dot_id(a)} -> {dot_id(b)} [color=\"{colors[t]}\" "
                     f"label=\"{t}: {s.frequency}\"];")
    lines.append("}")
    return "\n".join(lines) + "\n"
