"""Directly-follows graphs, inductive process-tree discovery, dotted charts."""
import csv
import io
from collections import Counter, defaultdict
from dataclasses import dataclass

import networkx as nx

from .eventlog import TraceLog, format_ts
from .models import ProcessTree, leaf, loop, par, seq, tau, xor

SOURCE = "▶"
SINK = "■"


@dataclass
class ArcStats:
    frequency: int
    total_ms: int

    @property
    def mean_duration(self):
        """Mean gap in seconds."""
        return self.total_ms / self.frequency / 1000.0

    def to_dict(self):
        return {"frequency": self.frequency, "mean_duration": self.mean_duration}


@dataclass
class DFG:
    nodes: set
    arcs: dict

    def to_dict(self):
        return {"nodes": sorted(self.nodes),
                "arcs": [{"from": a, "to": b, **s.to_dict()}
                         for (a, b), s in sorted(self.arcs.items())]}


def discover_dfg(log: TraceLog) -> DFG:
    """Arcs between consecutive completed activity instances.

    The gap of an arc runs from the completion of the earlier instance to
    the start of the later one (its completion when no start was logged).
    """
    freq = Counter()
    total = defaultdict(int)
    for case in log.cases:
        inst = [i for i in log.instances(case) if i.complete is not None]
        if not inst:
            continue
        freq[(SOURCE, inst[0].activity)] += 1
        total[(SOURCE, inst[0].activity)] += 0
        for a, b in zip(inst, inst[1:]):
            k = (a.activity, b.activity)
            freq[k] += 1
            total[k] += (b.start if b.start is not None else b.complete) - a.complete
        freq[(inst[-1].activity, SINK)] += 1
        total[(inst[-1].activity, SINK)] += 0
    arcs = {k: ArcStats(freq[k], total[k]) for k in sorted(freq)}
    nodes = {n for k in arcs for n in k}
    return DFG(nodes, arcs)


def dot_id(name):
    return '"' + str(name).replace("\\", "\\\\").replace('"', '\\"') + '"'


def dfg_to_dot(dfg: DFG, name="dfg") -> str:
    lines = [f"digraph {name} {{", "  rankdir=LR;"]
    for n in sorted(dfg.nodes):
        shape = "circle" if n in (SOURCE, SINK) else "box"
        lines.append(f"  {dot_id(n)} [shape={shape}];")
    for (a, b), s in sorted(dfg.arcs.items()):
        lines.append(f"  {dot_id(a)} -> {dot_id(b)} "
                     f"[label=\"{s.frequency} / {s.mean_duration:.1f}s\"];")
    lines.append("}")
    return "\n".join(lines) + "\n"


# ------------------------------------------------------------ inductive miner


class _Graph:
    """Directly-follows relation of a (sub)log, over activities only."""

    def __init__(self, log: Counter, threshold=0.0):
        self.acts = sorted({a for t in log for a in t})
        edges = Counter()
        start = Counter()
        end = Counter()
        for t, n in log.items():
            if not t:
                continue
            start[t[0]] += n
            end[t[-1]] += n
            for a, b in zip(t, t[1:]):
                edges[(a, b)] += n
        if threshold > 0:
            best = Counter()
            for (a, _), n in edges.items():
                best[a] = max(best[a], n)
            edges = Counter({k: n for k, n in edges.items() if n >= threshold * best[k[0]]})
            if start:
                top = max(start.values())
                start = Counter({a: n for a, n in start.items() if n >= threshold * top})
            if end:
                top = max(end.values())
                end = Counter({a: n for a, n in end.items() if n >= threshold * top})
        self.edges = edges
        self.start = set(start)
        self.end = set(end)
        g = nx.DiGraph()
        g.add_nodes_from(self.acts)
        g.add_edges_from(edges)
        self.g = g


def _ordered(parts):
    return [sorted(p) for p in sorted(parts, key=lambda p: min(p))]


def _xor_cut(G):
    comps = list(nx.connected_components(G.g.to_undirected()))
    return _ordered(comps) if len(comps) > 1 else None


def _seq_cut(G):
    cond = nx.condensation(G.g)
    reach = {c: nx.descendants(cond, c) for c in cond}
    uf = nx.utils.UnionFind(cond.nodes)
    nodes = sorted(cond.nodes)
    for i, x in enumerate(nodes):
        for y in nodes[i + 1:]:
            if y not in reach[x] and x not in reach[y]:
                uf.union(x, y)
    groups = [set(g) for g in uf.to_sets()]
    if len(groups) < 2:
        return None
    topo = {c: i for i, c in enumerate(nx.topological_sort(cond))}
    groups.sort(key=lambda g: min(topo[c] for c in g))
    for i in range(len(groups) - 1):
        for j in range(i + 1, len(groups)):
            if not all(y in reach[x] for x in groups[i] for y in groups[j]):
                return None
    return [sorted(a for c in g for a in cond.nodes[c]["members"]) for g in groups]


def _and_cut(G):
    acts = G.acts
    h = nx.Graph()
    h.add_nodes_from(acts)
    for i, a in enumerate(acts):
        for b in acts[i + 1:]:
            if not ((a, b) in G.edges and (b, a) in G.edges):
                h.add_edge(a, b)
    parts = [set(p) for p in nx.connected_components(h)]
    if len(parts) < 2:
        return None
    good = [p for p in parts if p & G.start and p & G.end]
    bad = [p for p in parts if not (p & G.start and p & G.end)]
    if not good:
        return None
    for p in bad:
        good[0] |= p
    return _ordered(good) if len(good) > 1 else None


def _loop_cut(G):
    do = set(G.start) | set(G.end)
    if not do:
        return None
    rest = [a for a in G.acts if a not in do]
    sub = G.g.subgraph(rest).to_undirected()
    redo = []
    for comp in nx.connected_components(sub):
        is_redo = True
        for c in comp:
            for p in G.g.predecessors(c):
                if p in do and p not in G.end:
                    is_redo = False
            for s in G.g.successors(c):
                if s in do and s not in G.start:
                    is_redo = False
        if is_redo:
            from_end = [c for c in comp if any(e in G.g.predecessors(c) for e in G.end)]
            for c in from_end:
                if not all((e, c) in G.edges for e in G.end):
                    is_redo = False
            to_start = [c for c in comp if any(s in G.g.successors(c) for s in G.start)]
            for c in to_start:
                if not all((c, s) in G.edges for s in G.start):
                    is_redo = False
        if is_redo:
            redo.append(comp)
        else:
            do |= comp
    if not redo:
        # a pure self-loop on the do part: end activity flowing back to a start activity
        if any((e, s) in G.edges for e in G.end for s in G.start) and do == set(G.acts):
            return [sorted(do)]
        return None
    return [sorted(do)] + _ordered(redo)


def _project(log, part):
    keep = set(part)
    out = Counter()
    for t, n in log.items():
        out[tuple(a for a in t if a in keep)] += n
    return out


def _split_xor(log, parts):
    subs = [Counter() for _ in parts]
    index = {a: i for i, p in enumerate(parts) for a in p}
    for t, n in log.items():
        votes = Counter(index[a] for a in t if a in index)
        i = min(votes, key=lambda k: (-votes[k], k))
        subs[i][tuple(a for a in t if index.get(a) == i)] += n
    return subs


def _split_loop(log, parts):
    index = {a: i for i, p in enumerate(parts) for a in p}
    subs = [Counter() for _ in parts]
    for t, n in log.items():
        run = []
        cur = None
        for a in t:
            i = index.get(a)
            if i is None:
                continue
            kind = 0 if i == 0 else 1
            if cur is not None and kind != cur:
                _close(run, cur, index, subs, n)
                run = []
            cur = kind
            run.append(a)
        if run:
            _close(run, cur, index, subs, n)
    return subs


def _close(run, kind, index, subs, n):
    if kind == 0:
        subs[0][tuple(run)] += n
    else:
        votes = Counter(index[a] for a in run)
        i = min(votes, key=lambda k: (-votes[k], k))
        subs[i][tuple(a for a in run if index[a] == i)] += n


def _mine(log: Counter, threshold: float, depth=0) -> ProcessTree:
    log = Counter({t: n for t, n in log.items() if n > 0})
    total = sum(log.values())
    empty = log.get((), 0)
    if total == 0 or empty == total:
        return tau()
    if empty:
        rest = Counter({t: n for t, n in log.items() if t})
        if empty >= threshold * total:
            return xor(tau(), _mine(rest, threshold, depth + 1))
        log = rest
    acts = sorted({a for t in log for a in t})
    if len(acts) == 1:
        a = acts[0]
        if all(len(t) == 1 for t in log):
            return leaf(a)
        return loop(leaf(a), tau())
    for thr in ((0.0, threshold) if threshold > 0 else (0.0,)):
        G = _Graph(log, thr)
        parts = _xor_cut(G)
        if parts:
            subs = _split_xor(log, parts)
            return xor(*[_mine(s, threshold, depth + 1) for s in subs])
        parts = _seq_cut(G)
        if parts:
            return seq(*[_mine(_project(log, p), threshold, depth + 1) for p in parts])
        parts = _and_cut(G)
        if parts:
            return par(*[_mine(_project(log, p), threshold, depth + 1) for p in parts])
        parts = _loop_cut(G)
        if parts and len(parts) > 1:
            subs = _split_loop(log, parts)
            return loop(*[_mine(s, threshold, depth + 1) for s in subs])
        if parts:
            return loop(_mine(_split_self_loop(log), threshold, depth + 1), tau())
    # fall-through: an activity executed exactly once in every trace
    for a in acts:
        if all(t.count(a) == 1 for t in log):
            rest = _project(log, [b for b in acts if b != a])
            return par(leaf(a), _mine(rest, threshold, depth + 1))
    return loop(tau(), xor(*[leaf(a) for a in acts]))


def _split_self_loop(log):
    """Cut traces wherever an end activity is followed by a start activity."""
    G = _Graph(log)
    out = Counter()
    for t, n in log.items():
        run = [t[0]]
        for a, b in zip(t, t[1:]):
            if a in G.end and b in G.start:
                out[tuple(run)] += n
                run = []
            run.append(b)
        out[tuple(run)] += n
    return out


def discover_tree(log, noise_threshold: float = 0.0) -> ProcessTree:
    """Inductive discovery of a block-structured model.

    ``log`` is a TraceLog or a mapping of activity sequences to counts.
    """
    if not 0.0 <= noise_threshold < 1.0:
        raise ValueError("noise_threshold must lie in [0, 1)")
    variants = log.variants() if isinstance(log, TraceLog) else log
    if not variants:
        raise ValueError("cannot discover a model from an empty log")
    return _mine(Counter(variants), noise_threshold)


# ------------------------------------------------------------ dotted chart


@dataclass
class DottedChart:
    rows: list           # case ids, row index = position
    points: list         # (row, timestamp_ms, activity, lifecycle)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["row", "case_id", "timestamp", "activity", "lifecycle"])
        for r, ts, act, lc in self.points:
            w.writerow([r, self.rows[r], format_ts(ts), act, lc])
        return buf.getvalue()


def dotted_chart(log: TraceLog, sort: str = "first-event") -> DottedChart:
    if sort not in ("first-event", "duration"):
        raise ValueError(f"unknown sort key {sort!r}")
    keys = {}
    for case, evs in log.traces.items():
        if not evs:
            continue
        first, last = evs[0].timestamp, evs[-1].timestamp
        keys[case] = (first, case) if sort == "first-event" else (-(last - first), case)
    rows = sorted(keys, key=keys.get)
    pos = {c: i for i, c in enumerate(rows)}
    points = [(pos[c], ev.timestamp, ev.activity, ev.lifecycle)
              for c in rows for ev in log.traces[c]]
    return DottedChart(rows, points)
