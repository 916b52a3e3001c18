"""Optimal alignments between traces and transition systems."""
import heapq
import json
from collections import Counter
from dataclasses import dataclass
from typing import Optional

from .errors import ModelError
from .eventlog import TraceLog

SYNC, LOG, MODEL, SILENT = "synchronous", "log_move", "model_move", "silent_model_move"


@dataclass(frozen=True)
class Move:
    kind: str
    activity: Optional[str] = None

    def __str__(self):
        return f"{self.kind}({self.activity or 'τ'})"


@dataclass(frozen=True)
class Alignment:
    moves: tuple
    cost: int

    def log_projection(self):
        return tuple(m.activity for m in self.moves if m.kind in (SYNC, LOG))

    def model_projection(self):
        return tuple(m.activity for m in self.moves if m.kind in (SYNC, MODEL))


def _heuristic(model, trace):
    """Admissible and consistent lower bound on the remaining cost."""
    n = len(trace)
    suffix = [None] * (n + 1)
    acc = Counter()
    suffix[n] = dict(acc)
    for i in range(n - 1, -1, -1):
        acc[trace[i]] += 1
        suffix[i] = dict(acc)
    bounds = getattr(model, "remaining_bounds", None)
    if bounds is None:
        acts = model.activities()
        unknown = [0] * (n + 1)
        for i in range(n - 1, -1, -1):
            unknown[i] = unknown[i + 1] + (trace[i] not in acts)
        return lambda i, s: unknown[i]

    def h(i, s):
        lo, hi = bounds(s)
        left = suffix[i]
        cost = 0
        for a, need in lo.items():
            have = left.get(a, 0)
            if need > have:
                cost += need - have
        for a, have in left.items():
            cap = hi.get(a, 0)
            if have > cap:
                cost += have - cap
        return cost
    return h


def align_trace(trace, model) -> Alignment:
    """Minimal-cost alignment by A* over the synchronous product.

    Log and model moves cost 1, synchronous and silent moves cost 0.  Among
    equal-cost candidates synchronous moves are expanded first, then silent,
    model (by label) and log moves.
    """
    trace = tuple(trace)
    if model.shortest_run_length() is None:
        raise ModelError("model accepts no trace")
    n = len(trace)
    h = _heuristic(model, trace)
    start = (0, model.initial)
    g = {start: 0}
    parent = {start: None}
    counter = 0
    heap = [(h(0, model.initial), 0, start)]
    closed = set()
    while heap:
        f, _, node = heapq.heappop(heap)
        if node in closed:
            continue
        closed.add(node)
        i, s = node
        cost = g[node]
        if i == n and model.is_final(s):
            return Alignment(tuple(_unwind(parent, node)), cost)
        succ = model.successors(s)
        cand = []
        if i < n:
            for lab, t in succ:
                if lab == trace[i]:
                    cand.append((0, (i + 1, t), Move(SYNC, lab)))
        for lab, t in succ:
            if lab is None:
                cand.append((0, (i, t), Move(SILENT)))
        for lab, t in sorted((x for x in succ if x[0] is not None), key=lambda x: x[0]):
            cand.append((1, (i, t), Move(MODEL, lab)))
        if i < n:
            cand.append((1, (i + 1, s), Move(LOG, trace[i])))
        for step, nxt, move in cand:
            if nxt in closed:
                continue
            ng = cost + step
            if ng < g.get(nxt, ng + 1):
                g[nxt] = ng
                parent[nxt] = (node, move)
                counter += 1
                heapq.heappush(heap, (ng + h(nxt[0], nxt[1]), counter, nxt))
    raise ModelError("no alignment found; final states unreachable")


def _unwind(parent, node):
    moves = []
    while parent[node] is not None:
        node, move = parent[node]
        moves.append(move)
    moves.reverse()
    return moves


@dataclass
class ConformanceReport:
    activities: dict          # label -> {conforming, model_moves, log_moves}
    traces: dict              # case -> {cost, fitness}
    aggregate_fitness: Optional[float]

    def to_dict(self):
        return {"aggregate_fitness": self.aggregate_fitness,
                "activities": {a: dict(v) for a, v in sorted(self.activities.items())},
                "traces": {c: dict(v) for c, v in sorted(self.traces.items())}}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    def to_dot(self):
        """Activities annotated with (model moves, log moves); red when deviating."""
        lines = ["digraph conformance {", "  node [shape=box style=filled];"]
        for a, v in sorted(self.activities.items()):
            bad = v["model_moves"] or v["log_moves"]
            color = "#f4a6a6" if bad else "#b7e4b7"
            lines.append(f'  "{a}" [label="{a}\\n({v["model_moves"]}, {v["log_moves"]})" '
                         f'fillcolor="{color}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def check_log(log: TraceLog, model) -> ConformanceReport:
    shortest = model.shortest_run_length()
    if shortest is None:
        raise ModelError("model accepts no trace")
    cache = {}
    acts = {}
    traces = {}
    for case in sorted(log.cases):
        seq = log.sequence(case)
        al = cache.get(seq)
        if al is None:
            al = cache[seq] = align_trace(seq, model)
        for m in al.moves:
            if m.kind == SILENT:
                continue
            row = acts.setdefault(m.activity, {"conforming": 0, "model_moves": 0, "log_moves": 0})
            row["conforming" if m.kind == SYNC else "model_moves" if m.kind == MODEL
                else "log_moves"] += 1
        denom = len(seq) + shortest
        fit = 1.0 if denom == 0 else 1.0 - al.cost / denom
        traces[case] = {"cost": al.cost, "fitness": fit}
    agg = sum(t["fitness"] for t in traces.values()) / len(traces) if traces else None
    return ConformanceReport(acts, traces, agg)
