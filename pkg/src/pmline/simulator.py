"""Discrete-event generator for the car production line.

The engine runs on a working-time axis (minutes of worked time since the
first opening).  Because every station pauses at closing time and resumes
at opening, the whole line state is frozen overnight and at weekends, so
working time is the natural clock; instants are mapped to the calendar
when the logs are written.

Blocking semantics: a finished car (or sub-assembly item) keeps its
station until the next station is empty.  Items at the end of a
sub-assembly chain stay in their station until the consuming GA station
starts on that car, unless a buffer gives them somewhere to wait.
"""
import heapq
from collections import deque
from dataclasses import dataclass

import numpy as np

from .config import (BufferSpec, DeviationSpec, DriftSpec, HoldSpec, LineConfig)
from .errors import ConfigError, InvariantError
from .eventlog import COMPLETE, START, Event, EventLog
from .models import leaf, par, seq
from .ocpm import OCEvent, ObjectCentricLog, ObjectInfo

_ARRIVE, _COMPLETE, _HOLD_END = 0, 1, 2
_EMPTY, _ENTERED, _WORKING, _FINISHED = 0, 1, 2, 3


@dataclass
class SimResult:
    log: EventLog
    ocel: ObjectCentricLog
    release: np.ndarray       # working minutes per car
    exit: np.ndarray          # working minutes per car
    config: LineConfig

    def completed_by(self, work_minutes):
        return int(np.sum(self.exit <= work_minutes))


class _Car:
    __slots__ = ("idx", "cid", "release", "base", "skip", "u_op", "hold_after",
                 "hold_minutes", "done", "saved", "attrs", "exit")


def car_stream(seed, k):
    """Independent generator for car ``k`` (prefix-stable across horizons)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(k,))))


class LineSimulation:
    def __init__(self, config: LineConfig, seed: int):
        config.validate()
        self.cfg = config
        self.seed = int(seed)
        names = list(config.ga_stations) + list(config.sa_stations)
        self.names = names
        self.index = {s: i for i, s in enumerate(names)}
        n = len(names)
        self.n_ga = len(config.ga_stations)
        self.nxt = [-1] * n
        self.prev = [-1] * n
        self.chain_end = [False] * n
        self.heads = []
        for i in range(1, self.n_ga):
            self.prev[i] = i - 1
            self.nxt[i - 1] = i
        for chain in config.sa_chains:
            ids = [self.index[s] for s in chain]
            self.heads.append(ids[0])
            for a, b in zip(ids, ids[1:]):
                self.nxt[a] = b
                self.prev[b] = a
            self.chain_end[ids[-1]] = True
        self.prereq = [[] for _ in range(n)]
        self.dependents = [[] for _ in range(n)]
        self.consumes = [[] for _ in range(n)]
        for g, pre in config.prerequisites.items():
            gi = self.index[g]
            for s in pre:
                self.prereq[gi].append(self.index[s])
                self.dependents[self.index[s]].append(gi)
        for chain in config.sa_chains:
            ci, ei = self.index[config.consumer_of(chain)], self.index[chain[-1]]
            self.consumes[ci].append(ei)
            if ei not in self.prereq[ci]:
                self.prereq[ci].append(ei)
                self.dependents[ei].append(ci)
        self.mu = np.empty(n)
        self.sigma = np.empty(n)
        for s, (mean, sd) in config.service.items():
            i = self.index[s]
            self.sigma[i] = sd
            self.mu[i] = np.log(mean) - sd * sd / 2.0
        self.section_of = [0] * n
        self.section_ops = []
        for k, sec in enumerate(config.sections):
            for s in sec.stations:
                self.section_of[self.index[s]] = k
            self.section_ops.append(sorted(sec.operators))
        self.op_speed = {o.id: o.speed for o in config.operators.values()}
        self.op_weight = {o.id: [o.weight(s) for s in names] for o in config.operators.values()}

        self.buffer_cap = [0] * n
        self.deviations = {}
        self.drifts = {}
        self.holds = []
        for inj in config.injections:
            if isinstance(inj, BufferSpec):
                self.buffer_cap[self.index[inj.sa_station]] = inj.capacity
            elif isinstance(inj, DeviationSpec):
                self.deviations.setdefault(self.index[inj.station], []).append(inj)
            elif isinstance(inj, DriftSpec):
                self.drifts.setdefault(self.index[inj.station], []).append(inj)
            elif isinstance(inj, HoldSpec):
                self.holds.append(inj)
        for lst in self.deviations.values():
            lst.sort(key=lambda d: d.onset)
        self.rework_src = {}
        self.rework_dst = {}
        for rw in config.rework:
            self.rework_src.setdefault(self.index[rw.source], []).append(rw)
            self.rework_dst.setdefault(self.index[rw.target], []).append(
                (self.index[rw.source], rw.gain))
        self.attr_names = sorted(config.car_attrs)
        self.attr_choices = []
        for a in self.attr_names:
            vals = sorted(config.car_attrs[a])
            w = np.array([config.car_attrs[a][v] for v in vals], dtype=float)
            self.attr_choices.append((vals, np.cumsum(w) / w.sum()))

    # ---------------------------------------------------------------- cars
    def _make_car(self, k, prev_release):
        cfg = self.cfg
        rng = car_stream(self.seed, k)
        n = len(self.names)
        arr = cfg.arrival
        gap = rng.random()
        kind = arr.get("kind", "lognormal")
        mean = float(arr.get("mean", 60.0))
        if kind == "constant":
            gap = mean
        elif kind == "exponential":
            gap = -mean * np.log1p(-gap)
        elif kind == "lognormal":
            sd = float(arr.get("sigma", 0.1))
            from statistics import NormalDist
            z = NormalDist().inv_cdf(min(max(gap, 1e-12), 1 - 1e-12))
            gap = float(np.exp(np.log(mean) - sd * sd / 2 + sd * z))
        else:
            raise ConfigError(f"unknown arrival kind {kind!r}")
        z = rng.standard_normal(n)
        u = rng.random((3, n))
        u_hold = rng.random(2)
        u_attr = rng.random(max(len(self.attr_names), 1))

        car = _Car()
        car.idx = k
        car.cid = f"car{k:05d}"
        car.release = cfg.first_release if k == 0 else prev_release + gap
        base = np.exp(self.mu + self.sigma * z)
        for i, specs in self.drifts.items():
            for d in specs:
                if k >= d.onset:
                    base[i] *= d.service_scale
        car.base = base.tolist()
        skip = [False] * n
        for i, specs in self.deviations.items():
            p = 0.0
            for d in specs:
                if d.onset <= k:
                    p = d.skip_probability
            skip[i] = bool(u[0, i] < p)
        car.skip = skip
        car.u_op = u[1].tolist()
        car.hold_after = -1
        car.hold_minutes = 0.0
        for h in self.holds:
            if k >= h.onset and u_hold[0] < h.probability:
                car.hold_after = self.index[h.station]
                car.hold_minutes = h.minutes
                break
        car.attrs = {}
        for j, (vals, cum) in enumerate(self.attr_choices):
            car.attrs[self.attr_names[j]] = vals[int(np.searchsorted(cum, u_attr[j], side="right"))]
        car.done = [None] * n
        car.saved = {}
        car.exit = None
        return car

    # ---------------------------------------------------------------- engine
    def run(self, horizon: int):
        if horizon < 0:
            raise ValueError("horizon must be >= 0")
        n = len(self.names)
        self.cars = []
        self.occ = [-1] * n
        self.phase = [_EMPTY] * n
        self.buf = [deque() for _ in range(n)]
        self.op_of = [None] * n
        self.busy = set()
        self.op_wait = [deque() for _ in self.section_ops]
        self.waiting_op = [False] * n
        self.ga_queue = deque()
        self.head_queue = {h: deque() for h in self.heads}
        self.side = [deque() for _ in range(n)]
        self.trace = []
        self.heap = []
        self.seq_no = 0
        prev = 0.0
        for k in range(horizon):
            car = self._make_car(k, prev)
            prev = car.release
            self.cars.append(car)
            self._push(car.release, _ARRIVE, k)
        while self.heap:
            t, _, kind, a, b = heapq.heappop(self.heap)
            if kind == _COMPLETE:
                self._on_complete(a, t)
            elif kind == _ARRIVE:
                self._on_arrive(a, t)
            else:
                self.side[b].append(a)
                if self.occ[b] == -1:
                    self._pull(b, t)
        stuck = [c.cid for c in self.cars if c.exit is None]
        if stuck:
            raise InvariantError(f"simulation deadlocked; {len(stuck)} cars never left the line")
        return self

    def _push(self, t, kind, a, b=0):
        self.seq_no += 1
        heapq.heappush(self.heap, (t, self.seq_no, kind, a, b))

    def _on_arrive(self, k, t):
        self.ga_queue.append(k)
        if self.occ[0] == -1:
            self._pull(0, t)
        for h in self.heads:
            self.head_queue[h].append(k)
            if self.occ[h] == -1:
                self._pull(h, t)

    def _enter(self, s, k, t):
        self.occ[s] = k
        self.phase[s] = _ENTERED
        self._try_start(s, t)

    def _try_start(self, s, t):
        if self.phase[s] != _ENTERED:
            return
        car = self.cars[self.occ[s]]
        for p in self.prereq[s]:
            if car.done[p] is None:
                return
        if car.skip[s]:
            self._consume(s, car, t)
            self.phase[s] = _FINISHED
            car.done[s] = t
            self._finished(s, t)
            return
        sec = self.section_of[s]
        free = [o for o in self.section_ops[sec] if o not in self.busy]
        if not free:
            if not self.waiting_op[s]:
                self.waiting_op[s] = True
                self.op_wait[sec].append(s)
            return
        weights = [self.op_weight[o][s] for o in free]
        target = car.u_op[s] * sum(weights)
        op = free[-1]
        acc = 0.0
        for o, w in zip(free, weights):
            acc += w
            if target < acc:
                op = o
                break
        self.busy.add(op)
        self.op_of[s] = op
        self._consume(s, car, t)
        dur = car.base[s]
        speed = self.op_speed[op]
        if s in self.rework_src:
            car.saved[s] = dur - dur / speed if speed > 1.0 else 0.0
        dur = dur / speed
        for src, gain in self.rework_dst.get(s, ()):
            dur += gain * car.saved.get(src, 0.0)
        self.phase[s] = _WORKING
        self.trace.append((t, 0, car.idx, s, op))
        self._push(t + dur, _COMPLETE, s)

    def _consume(self, s, car, t):
        for e in self.consumes[s]:
            if self.buf[e]:
                got = self.buf[e].popleft()
                if got != car.idx:
                    raise InvariantError(f"{self.names[s]} consumed item of car {got} for car {car.idx}")
                if self.phase[e] == _FINISHED:
                    self._try_push(e, t)
            else:
                if self.occ[e] != car.idx or self.phase[e] != _FINISHED:
                    raise InvariantError(f"part from {self.names[e]} missing for {car.cid}")
                self.occ[e] = -1
                self.phase[e] = _EMPTY
                self._pull(e, t)

    def _on_complete(self, s, t):
        car = self.cars[self.occ[s]]
        self.phase[s] = _FINISHED
        car.done[s] = t
        op = self.op_of[s]
        self.op_of[s] = None
        self.trace.append((t, 1, car.idx, s, op))
        self.busy.discard(op)
        self._serve_waiting(self.section_of[s], t)
        self._finished(s, t)

    def _finished(self, s, t):
        k = self.occ[s]
        for g in self.dependents[s]:
            if self.occ[g] == k:
                self._try_start(g, t)
        if self.occ[s] == k and self.phase[s] == _FINISHED:
            self._try_push(s, t)

    def _serve_waiting(self, sec, t):
        q = self.op_wait[sec]
        ops = self.section_ops[sec]
        while q and any(o not in self.busy for o in ops):
            s = q.popleft()
            self.waiting_op[s] = False
            self._try_start(s, t)

    def _leave(self, s, t):
        self.occ[s] = -1
        self.phase[s] = _EMPTY
        self._pull(s, t)

    def _try_push(self, s, t):
        k = self.occ[s]
        car = self.cars[k]
        if s < self.n_ga:
            if s == self.n_ga - 1:
                car.exit = t
                self._leave(s, t)
            elif car.hold_after == s:
                car.hold_after = -2
                self._push(t + car.hold_minutes, _HOLD_END, k, s + 1)
                self._leave(s, t)
            else:
                n = s + 1
                if self.occ[n] == -1:
                    self.occ[s] = -1
                    self.phase[s] = _EMPTY
                    self._enter(n, k, t)
                    self._pull(s, t)
            return
        n = self.nxt[s]
        cap = self.buffer_cap[s]
        if n >= 0 and not self.buf[s] and self.occ[n] == -1:
            self.occ[s] = -1
            self.phase[s] = _EMPTY
            self._enter(n, k, t)
            self._pull(s, t)
        elif cap and len(self.buf[s]) < cap:
            self.buf[s].append(k)
            self._leave(s, t)

    def _pull(self, s, t):
        if self.occ[s] != -1:
            return
        if s < self.n_ga:
            if self.side[s]:
                self._enter(s, self.side[s].popleft(), t)
            elif s == 0:
                if self.ga_queue:
                    self._enter(0, self.ga_queue.popleft(), t)
            else:
                p = s - 1
                if self.phase[p] == _FINISHED and self.cars[self.occ[p]].hold_after != p:
                    self._try_push(p, t)
            return
        p = self.prev[s]
        if p < 0:
            q = self.head_queue[s]
            if q:
                self._enter(s, q.popleft(), t)
            return
        if self.buf[p]:
            self._enter(s, self.buf[p].popleft(), t)
            if self.phase[p] == _FINISHED:
                self._try_push(p, t)
        elif self.phase[p] == _FINISHED:
            self._try_push(p, t)

    # ---------------------------------------------------------------- output
    def flat_log(self):
        cal = self.cfg.calendar
        if not self.trace:
            return EventLog([], {a: "string" for a in self.attr_names})
        arr = np.array([(tm, lc, k, s) for tm, lc, k, s, _ in self.trace], dtype=float)
        work_ms = np.rint(arr[:, 0] * 60_000).astype(np.int64)
        wall = cal.to_wall(work_ms)
        events = []
        for (tm, lc, k, s, op), ts in zip(self.trace, wall.tolist()):
            car = self.cars[k]
            events.append(Event(
                event_id=f"{car.cid}-{self.names[s]}-{'s' if lc == 0 else 'c'}",
                activity=self.names[s],
                timestamp=ts,
                lifecycle=START if lc == 0 else COMPLETE,
                resource=op,
                case_id=car.cid,
                attrs=car.attrs,
            ))
        events.sort(key=Event.sort_key)
        return EventLog(events, {a: "string" for a in self.attr_names})

    def object_log(self):
        cfg = self.cfg.object_layer
        cal = self.cfg.calendar
        rng = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence(self.seed, spawn_key=(2**32 - 1,))))
        sizes = sorted(cfg.products_per_order)
        w = np.array([cfg.products_per_order[s] for s in sizes], dtype=float)
        cum = np.cumsum(w) / w.sum()
        objects = {}
        raw = []   # (work_minutes, event_id, activity, omap)
        comp_st = set(cfg.component_stations)
        comps = {}
        for car in self.cars:
            objects[car.cid] = ObjectInfo("product", dict(car.attrs))
            comps[car.idx] = [f"{car.cid}-k{j}" for j in range(cfg.components_per_product)]
            for c in comps[car.idx]:
                objects[c] = ObjectInfo("component", {})
        for tm, lc, k, s, op in self.trace:
            if lc != 1:
                continue
            car = self.cars[k]
            name = self.names[s]
            omap = {"product": (car.cid,)}
            if name in comp_st:
                omap["component"] = tuple(comps[k])
            raw.append((tm, f"{car.cid}-{name}-c", name, omap))
        k = 0
        o = 0
        lead = cfg.order_lead_minutes
        while k < len(self.cars):
            size = sizes[int(np.searchsorted(cum, rng.random(), side="right"))]
            members = self.cars[k:k + size]
            k += size
            oid = f"order{o:04d}"
            did = f"delivery{o:04d}"
            o += 1
            objects[oid] = ObjectInfo("order", {"size": len(members)})
            objects[did] = ObjectInfo("delivery", {})
            r = members[0].release
            prods = tuple(c.cid for c in members)
            raw.append((r - lead, f"{oid}-place", "place planned order",
                        {"order": (oid,), "product": prods}))
            all_comps = [c for car in members for c in comps[car.idx]]
            step = (lead * 0.6) / len(all_comps)
            for j, comp in enumerate(all_comps):
                raw.append((r - lead * 0.8 + j * step, f"{oid}-check-{j}", "check inventory",
                            {"order": (oid,), "component": (comp,)}))
            raw.append((r - lead * 0.1, f"{oid}-confirm", "confirm products",
                        {"order": (oid,), "product": prods}))
            last = 0.0
            for car in members:
                t = car.exit + 30.0
                last = max(last, t)
                raw.append((t, f"{car.cid}-delivery", "complete delivery",
                            {"delivery": (did,), "product": (car.cid,)}))
            raw.append((last + 30.0, f"{oid}-pay", "pay order", {"order": (oid,)}))
        if not raw:
            return ObjectCentricLog([], {})
        work_ms = np.rint(np.array([r[0] for r in raw]) * 60_000).astype(np.int64)
        wall = cal.to_wall(work_ms).tolist()
        events = [OCEvent(eid, act, ts, omap)
                  for (tm, eid, act, omap), ts in zip(raw, wall)]
        return ObjectCentricLog(events, objects)


def simulate(config: LineConfig, seed: int, horizon: int, objects: bool = True) -> SimResult:
    """Run the line for ``horizon`` cars; returns flat and object-centric logs.

    ``objects=False`` skips building the object-centric log (it is then empty).
    """
    sim = LineSimulation(config, seed).run(horizon)
    release = np.array([c.release for c in sim.cars])
    exit_ = np.array([c.exit for c in sim.cars])
    ocel = sim.object_log() if objects else ObjectCentricLog([], {})
    return SimResult(sim.flat_log(), ocel, release, exit_, config)


def reference_tree(config: LineConfig):
    """Block-structured model of the configured line.

    Each sub-assembly chain runs in parallel with the part of the main line
    before its consuming station.  Chains start when the car is released,
    so their scopes nest and the partial order is series-parallel.
    """
    consumers = {}
    for chain in config.sa_chains:
        g = config.consumer_of(chain)
        consumers.setdefault(config.ga_stations.index(g), []).append(chain)
    node = None
    pos = 0
    for gi in sorted(consumers):
        segment = [leaf(s) for s in config.ga_stations[pos:gi]]
        block = seq(*([node] if node is not None else []), *segment) if (node or segment) else None
        chains = [seq(*[leaf(s) for s in ch]) for ch in consumers[gi]]
        parts = ([block] if block is not None else []) + chains
        node = par(*parts)
        pos = gi
    rest = [leaf(s) for s in config.ga_stations[pos:]]
    return seq(*([node] if node is not None else []), *rest)
