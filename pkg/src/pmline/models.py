"""Process trees and labelled transition systems.

``TreeLTS`` gives a process tree its execution semantics lazily: states are
tuples of per-node status codes (pre-order), so large trees with nested
concurrency never need their full reachability graph.
"""
import re
from collections import deque
from dataclasses import dataclass
from typing import Optional

from .errors import ModelError

SEQ, XOR, AND, LOOP = "seq", "xor", "and", "loop"
OPERATORS = (SEQ, XOR, AND, LOOP)
_SYMBOL = {SEQ: "->", XOR: "X", AND: "+", LOOP: "*"}
_FROM_SYMBOL = {v: k for k, v in _SYMBOL.items()}


@dataclass(frozen=True)
class ProcessTree:
    op: Optional[str] = None
    label: Optional[str] = None
    children: tuple = ()

    def __post_init__(self):
        if self.op is None:
            if self.children:
                raise ModelError("leaves cannot have children")
        else:
            if self.op not in OPERATORS:
                raise ModelError(f"unknown operator {self.op!r}")
            if len(self.children) < 2:
                raise ModelError(f"{self.op} node needs at least 2 children")

    @property
    def is_leaf(self):
        return self.op is None

    @property
    def is_tau(self):
        return self.op is None and self.label is None

    def activities(self):
        if self.is_leaf:
            return set() if self.label is None else {self.label}
        out = set()
        for c in self.children:
            out |= c.activities()
        return out

    def min_length(self):
        """Length of the shortest visible word in the tree's language."""
        if self.is_leaf:
            return 0 if self.label is None else 1
        lens = [c.min_length() for c in self.children]
        if self.op in (SEQ, AND):
            return sum(lens)
        if self.op == XOR:
            return min(lens)
        return lens[0]

    def depth(self):
        return 0 if self.is_leaf else 1 + max(c.depth() for c in self.children)

    def __str__(self):
        if self.is_leaf:
            return "tau" if self.label is None else f"'{self.label}'"
        return f"{_SYMBOL[self.op]}( " + ", ".join(str(c) for c in self.children) + " )"

    def to_dict(self):
        if self.is_leaf:
            return {"label": self.label}
        return {"op": self.op, "children": [c.to_dict() for c in self.children]}

    @classmethod
    def from_dict(cls, d):
        if "op" in d:
            return cls(op=d["op"], children=tuple(cls.from_dict(c) for c in d["children"]))
        return cls(label=d.get("label"))


def leaf(label):
    return ProcessTree(label=label)


def tau():
    return ProcessTree()


def _nary(op, children):
    flat = []
    for c in children:
        if c.op == op and op != LOOP:
            flat.extend(c.children)
        else:
            flat.append(c)
    if len(flat) == 1:
        return flat[0]
    return ProcessTree(op=op, children=tuple(flat))


def seq(*children):
    return _nary(SEQ, children)


def xor(*children):
    return _nary(XOR, children)


def par(*children):
    return _nary(AND, children)


def loop(do, *redo):
    return ProcessTree(op=LOOP, children=(do,) + tuple(redo))


_TREE_TOKEN = re.compile(r"\s*(->|X|\+|\*|\(|\)|,|'[^']*'|\"[^\"]*\"|tau|[^\s(),']+)")


def parse_tree(text):
    """Parse the textual form produced by ``str(tree)``, e.g. ``->( 'A', X( 'B', tau ) )``."""
    toks = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TREE_TOKEN.match(text, pos)
        if not m:
            raise ModelError(f"cannot parse tree near {text[pos:]!r}")
        toks.append(m.group(1))
        pos = m.end()
    i = 0

    def node():
        nonlocal i
        tok = toks[i]
        i += 1
        if tok in _FROM_SYMBOL and i < len(toks) and toks[i] == "(":
            i += 1
            kids = [node()]
            while toks[i] == ",":
                i += 1
                kids.append(node())
            if toks[i] != ")":
                raise ModelError("expected ')' in tree text")
            i += 1
            return ProcessTree(op=_FROM_SYMBOL[tok], children=tuple(kids))
        if tok == "tau":
            return tau()
        if tok[0] in "'\"":
            return leaf(tok[1:-1])
        return leaf(tok)

    tree = node()
    if i != len(toks):
        raise ModelError("trailing input after tree")
    return tree


def tree_to_dot(tree, name="tree"):
    lines = [f"digraph {name} {{", "  node [fontname=Helvetica];"]
    counter = [0]

    def emit(t):
        nid = f"n{counter[0]}"
        counter[0] += 1
        if t.is_leaf:
            lab = "τ" if t.label is None else t.label
            shape = "box" if t.label is not None else "point"
            lines.append(f'  {nid} [label="{lab}", shape={shape}];')
        else:
            lines.append(f'  {nid} [label="{_SYMBOL[t.op]}", shape=circle];')
            for c in t.children:
                cid = emit(c)
                lines.append(f"  {nid} -> {cid};")
        return nid

    emit(tree)
    lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- LTS

IDLE, ACTIVE, DONE, DECIDE, REDO = 0, 1, 2, 3, 4
_INF = float("inf")


def _sum_bounds(parts):
    lo, hi = {}, {}
    for mn, mx in parts:
        for a, v in mn.items():
            lo[a] = lo.get(a, 0) + v
        for a, v in mx.items():
            hi[a] = hi.get(a, 0) + v
    return lo, hi


class TreeLTS:
    """On-the-fly transition system of a process tree.

    Visible transitions fire leaves; silent transitions fire tau leaves or
    leave a loop after its do-part (the loop-exit decision).
    """

    def __init__(self, tree: ProcessTree):
        self.tree = tree
        self.op, self.label, self.parent, self.kids, self.end = [], [], [], [], []

        def walk(t, parent):
            idx = len(self.op)
            self.op.append(t.op)
            self.label.append(t.label)
            self.parent.append(parent)
            self.kids.append([])
            self.end.append(None)
            if parent >= 0:
                self.kids[parent].append(idx)
            for c in t.children:
                walk(c, idx)
            self.end[idx] = len(self.op)

        walk(tree, -1)
        self.initial = (IDLE,) * len(self.op)
        self._succ = {}
        self._bounds = {}
        self._min_len = tree.min_length()
        self._static = [None] * len(self.op)
        for n in reversed(range(len(self.op))):
            self._static[n] = self._static_bounds(n)

    def is_final(self, state):
        return state[0] == DONE

    def shortest_run_length(self):
        return self._min_len

    def activities(self):
        return self.tree.activities()

    def successors(self, state):
        got = self._succ.get(state)
        if got is None:
            moves = []
            self._collect(0, state, moves)
            got = []
            for kind, n in moves:
                if kind == "fire":
                    got.append((self.label[n], self._fire(state, n)))
                else:
                    got.append((None, self._exit(state, n)))
            got = tuple(got)
            self._succ[state] = got
        return got

    # label-count bounds over all completions, used as an A* heuristic

    def _static_bounds(self, n):
        op = self.op[n]
        if op is None:
            lab = self.label[n]
            return ({}, {}) if lab is None else ({lab: 1}, {lab: 1})
        parts = [self._static[c] for c in self.kids[n]]
        if op in (SEQ, AND):
            return _sum_bounds(parts)
        if op == XOR:
            labels = set().union(*(set(mx) for _, mx in parts))
            lo = {a: min(mn.get(a, 0) for mn, _ in parts) for a in labels}
            hi = {a: max(mx.get(a, 0) for _, mx in parts) for a in labels}
            return ({a: v for a, v in lo.items() if v}, hi)
        labels = set().union(*(set(mx) for _, mx in parts))
        return (dict(parts[0][0]), {a: _INF for a in labels})

    def remaining_bounds(self, state):
        """Per-label (min, max) occurrence counts still ahead of ``state``."""
        got = self._bounds.get(state)
        if got is None:
            got = self._bounds[state] = self._remaining(0, state)
        return got

    def _remaining(self, n, st):
        s = st[n]
        if s == DONE:
            return ({}, {})
        if s == IDLE:
            return self._static[n]
        op = self.op[n]
        kids = self.kids[n]
        if op in (SEQ, AND):
            return _sum_bounds([self._remaining(c, st) for c in kids])
        if op == XOR:
            for c in kids:
                if st[c] != IDLE:
                    return self._remaining(c, st)
            return self._static[n]
        hi = {a: _INF for a in self._static[n][1]}
        if s == ACTIVE:
            return (self._remaining(kids[0], st)[0], hi)
        if s == DECIDE:
            return ({}, hi)
        for c in kids[1:]:
            if st[c] != IDLE:
                return (_sum_bounds([self._remaining(c, st), self._static[kids[0]]])[0], hi)
        return (dict(self._static[kids[0]][0]), hi)

    def _collect(self, n, st, out):
        s = st[n]
        if s == DONE:
            return
        op = self.op[n]
        if op is None:
            out.append(("fire", n))
        elif op == SEQ:
            for c in self.kids[n]:
                if st[c] != DONE:
                    self._collect(c, st, out)
                    return
        elif op == XOR:
            if s == IDLE:
                for c in self.kids[n]:
                    self._collect(c, st, out)
            else:
                for c in self.kids[n]:
                    if st[c] != IDLE:
                        self._collect(c, st, out)
                        return
        elif op == AND:
            for c in self.kids[n]:
                if st[c] != DONE:
                    self._collect(c, st, out)
        else:  # loop
            kids = self.kids[n]
            if s in (IDLE, ACTIVE):
                self._collect(kids[0], st, out)
            elif s == DECIDE:
                for c in kids[1:]:
                    self._collect(c, st, out)
                out.append(("exit", n))
            else:
                for c in kids[1:]:
                    if st[c] != IDLE:
                        self._collect(c, st, out)
                        return

    def _reset_below(self, st, n):
        for i in range(n + 1, self.end[n]):
            st[i] = IDLE

    def _fire(self, state, n):
        st = list(state)
        st[n] = DONE
        child, p = n, self.parent[n]
        while p >= 0:
            if self.op[p] == LOOP:
                if st[p] == IDLE:
                    st[p] = ACTIVE
                elif st[p] == DECIDE and child != self.kids[p][0]:
                    st[p] = REDO
            elif st[p] == IDLE:
                st[p] = ACTIVE
            child, p = p, self.parent[p]
        self._propagate(st, n)
        return tuple(st)

    def _exit(self, state, n):
        st = list(state)
        st[n] = DONE
        self._reset_below(st, n)
        self._propagate(st, n)
        return tuple(st)

    def _propagate(self, st, c):
        p = self.parent[c]
        while p >= 0:
            op = self.op[p]
            kids = self.kids[p]
            if op == SEQ:
                if c != kids[-1]:
                    return
            elif op == AND:
                if any(st[k] != DONE for k in kids):
                    return
            elif op == LOOP:
                if c == kids[0]:
                    st[p] = DECIDE
                else:
                    self._reset_below(st, p)
                    st[p] = ACTIVE
                return
            st[p] = DONE
            self._reset_below(st, p)
            c, p = p, self.parent[p]


class ExplicitLTS:
    """A finite transition system given by its transition list."""

    def __init__(self, states, initial, finals, transitions):
        self.states = list(states)
        self.initial = initial
        self.finals = frozenset(finals)
        self.transitions = [tuple(t) for t in transitions]
        adj = {s: [] for s in self.states}
        for src, lab, dst in self.transitions:
            adj.setdefault(src, []).append((lab, dst))
        self._adj = {s: tuple(v) for s, v in adj.items()}
        self._min_len = None

    def successors(self, state):
        return self._adj.get(state, ())

    def is_final(self, state):
        return state in self.finals

    def activities(self):
        return {lab for _, lab, _ in self.transitions if lab is not None}

    def shortest_run_length(self):
        """Fewest visible steps from the initial to a final state (0-1 BFS);
        ``None`` when no final state is reachable."""
        if self._min_len is None:
            dist = {self.initial: 0}
            dq = deque([self.initial])
            best = None
            while dq:
                s = dq.popleft()
                d = dist[s]
                if s in self.finals:
                    best = d if best is None else min(best, d)
                for lab, t in self.successors(s):
                    nd = d + (0 if lab is None else 1)
                    if t not in dist or nd < dist[t]:
                        dist[t] = nd
                        if lab is None:
                            dq.appendleft(t)
                        else:
                            dq.append(t)
            self._min_len = -1 if best is None else best
        return None if self._min_len < 0 else self._min_len

    @classmethod
    def from_lts(cls, lts, max_states=100_000):
        """Materialise any LTS (e.g. a TreeLTS) by breadth-first exploration."""
        index = {lts.initial: 0}
        order = [lts.initial]
        trans = []
        finals = []
        i = 0
        while i < len(order):
            s = order[i]
            if lts.is_final(s):
                finals.append(index[s])
            for lab, t in lts.successors(s):
                if t not in index:
                    if len(order) >= max_states:
                        raise ModelError(f"more than {max_states} states")
                    index[t] = len(order)
                    order.append(t)
                trans.append((index[s], lab, index[t]))
            i += 1
        return cls(range(len(order)), 0, finals, trans)

    def to_dot(self, name="lts"):
        lines = [f"digraph {name} {{", "  rankdir=LR;"]
        for s in self.states:
            shape = "doublecircle" if s in self.finals else "circle"
            lines.append(f'  s{s} [shape={shape}, label="{s}"];')
        for a, lab, b in self.transitions:
            lines.append(f'  s{a} -> s{b} [label="{"τ" if lab is None else lab}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def tree_to_lts(tree: ProcessTree) -> TreeLTS:
    return TreeLTS(tree)
