"""Event data model: events, flat logs, trace logs, CSV/JSON interchange."""
import csv
import io
import json
import re
from collections import defaultdict
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import Any, Callable, Mapping, Optional

from .errors import (
    LogFormatError,
    LogParseError,
    MissingCaseError,
    UnknownAttributeError,
)

START = "start"
COMPLETE = "complete"
LIFECYCLES = (START, COMPLETE)
_LIFECYCLE_RANK = {START: 0, COMPLETE: 1}

BUILTIN_SCHEMA = {
    "event_id": "string",
    "activity": "string",
    "timestamp": "instant",
    "lifecycle": "string",
    "resource": "string",
    "case_id": "string",
}
ATTR_TYPES = ("string", "integer", "real", "instant")

_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)


# ------------------------------------------------------------ timestamps


def to_ms(dt: datetime) -> int:
    """UTC milliseconds since the epoch; naive datetimes are taken as UTC."""
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    delta = dt - _EPOCH
    return (delta.days * 86_400 + delta.seconds) * 1000 + delta.microseconds // 1000


def from_ms(ms: int) -> datetime:
    return datetime.fromtimestamp(ms / 1000, tz=timezone.utc).replace(
        microsecond=(ms % 1000) * 1000)


def format_ts(ms: int) -> str:
    dt = from_ms(ms)
    return dt.strftime("%Y-%m-%dT%H:%M:%S.") + f"{ms % 1000:03d}Z"


_DATE_ONLY = re.compile(r"^\d{4}-\d{2}-\d{2}$")


def parse_ts(text: str, fmt: Optional[str] = None) -> int:
    """Parse a timestamp to UTC ms.  Default format is ISO-8601."""
    text = text.strip()
    if fmt:
        return to_ms(datetime.strptime(text, fmt))
    if _DATE_ONLY.match(text):
        return to_ms(datetime.fromisoformat(text + "T00:00:00"))
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    return to_ms(datetime.fromisoformat(text))


# ------------------------------------------------------------ core types


@dataclass(frozen=True)
class Event:
    event_id: str
    activity: str
    timestamp: int
    lifecycle: str = COMPLETE
    resource: Optional[str] = None
    case_id: Optional[str] = None
    attrs: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.lifecycle not in LIFECYCLES:
            raise ValueError(f"event {self.event_id}: lifecycle {self.lifecycle!r}")

    def get(self, name, default=None):
        if name in BUILTIN_SCHEMA:
            return getattr(self, name)
        return self.attrs.get(name, default)

    def sort_key(self):
        return (self.timestamp, _LIFECYCLE_RANK[self.lifecycle], self.event_id)

    def key(self):
        """Hashable identity used for multiset comparisons."""
        return (self.event_id, self.activity, self.timestamp, self.lifecycle,
                self.resource, self.case_id, tuple(sorted(self.attrs.items())))


def _infer_type(value):
    if isinstance(value, bool):
        return "string"
    if isinstance(value, int):
        return "integer"
    if isinstance(value, float):
        return "real"
    return "string"


class EventLog:
    """An ordered, immutable collection of events with an attribute schema."""

    def __init__(self, events=(), schema=None):
        self.events = tuple(events)
        seen = set()
        inferred = {}
        for ev in self.events:
            if ev.event_id in seen:
                raise ValueError(f"duplicate event_id {ev.event_id!r}")
            seen.add(ev.event_id)
            for k, v in ev.attrs.items():
                if k not in inferred:
                    inferred[k] = _infer_type(v)
        if schema is None:
            schema = inferred
        else:
            schema = dict(schema)
            missing = set(inferred) - set(schema)
            if missing:
                raise ValueError(f"schema misses attributes {sorted(missing)}")
        self.schema = dict(schema)

    def __len__(self):
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def __eq__(self, other):
        return (isinstance(other, EventLog) and self.events == other.events
                and self.schema == other.schema)

    def __repr__(self):
        return f"EventLog({len(self.events)} events, attrs={sorted(self.schema)})"

    def attribute_type(self, name):
        if name in BUILTIN_SCHEMA:
            return BUILTIN_SCHEMA[name]
        if name in self.schema:
            return self.schema[name]
        raise UnknownAttributeError(f"unknown attribute {name!r}")

    def with_events(self, events):
        return EventLog(events, self.schema)


@dataclass(frozen=True)
class Instance:
    """One execution of an activity inside a trace (paired start/complete)."""
    activity: str
    start: Optional[int]
    complete: Optional[int]
    resource: Optional[str] = None


class TraceLog:
    """Events grouped per case, each trace in canonical order."""

    def __init__(self, traces: Mapping[str, tuple], schema=None):
        self.traces = {c: tuple(evs) for c, evs in traces.items()}
        self.schema = dict(schema or {})
        self._instances = {}

    def __len__(self):
        return len(self.traces)

    def __iter__(self):
        return iter(self.traces.items())

    def __repr__(self):
        return f"TraceLog({len(self.traces)} traces, {self.n_events} events)"

    @property
    def cases(self):
        return list(self.traces)

    @property
    def n_events(self):
        return sum(len(t) for t in self.traces.values())

    def events(self):
        for evs in self.traces.values():
            yield from evs

    def to_event_log(self):
        return EventLog(self.events(), self.schema)

    def instances(self, case):
        got = self._instances.get(case)
        if got is None:
            got = self._instances[case] = activity_instances(self.traces[case])
        return got

    def sequence(self, case):
        """Activity labels of completed instances, in completion order."""
        return tuple(i.activity for i in self.instances(case) if i.complete is not None)

    def sequences(self):
        return {c: self.sequence(c) for c in self.traces}

    def variants(self):
        counts = defaultdict(int)
        for c in self.traces:
            counts[self.sequence(c)] += 1
        return dict(counts)

    def subset(self, cases):
        return TraceLog({c: self.traces[c] for c in cases}, self.schema)


def activity_instances(trace):
    """Pair start and complete events of the same activity (FIFO).

    Instances are returned in the order of their closing event; a dangling
    start or complete yields an instance with the other end missing.
    """
    open_starts = defaultdict(list)
    slots = []
    for ev in trace:
        if ev.lifecycle == START:
            slots.append(None)
            open_starts[ev.activity].append((len(slots) - 1, ev))
        else:
            pending = open_starts.get(ev.activity)
            if pending:
                pos, st = pending.pop(0)
                slots[pos] = "paired"
                slots.append(Instance(ev.activity, st.timestamp, ev.timestamp,
                                      st.resource or ev.resource))
            else:
                slots.append(Instance(ev.activity, None, ev.timestamp, ev.resource))
    for pending in open_starts.values():
        for pos, st in pending:
            slots[pos] = Instance(st.activity, st.timestamp, None, st.resource)
    return [s for s in slots if isinstance(s, Instance)]


# ------------------------------------------------------------ trace building


def build_traces(log: EventLog, case_attr: str = "case_id") -> TraceLog:
    """Group events by ``case_attr`` and order each group canonically."""
    if case_attr not in BUILTIN_SCHEMA and case_attr not in log.schema:
        raise UnknownAttributeError(f"unknown case attribute {case_attr!r}")
    groups = {}
    missing = []
    for ev in log.events:
        cid = ev.get(case_attr)
        if cid is None or cid == "":
            missing.append(ev.event_id)
            continue
        cid = str(cid)
        if ev.case_id != cid:
            ev = replace(ev, case_id=cid)
        groups.setdefault(cid, []).append(ev)
    if missing:
        raise MissingCaseError(missing)
    return TraceLog({c: sorted(evs, key=Event.sort_key) for c, evs in groups.items()},
                    log.schema)


# ------------------------------------------------------------ predicates

_TOKEN = re.compile(r"""
    \s*(?:
      (?P<str>"[^"]*"|'[^']*')
     |(?P<op><=|>=|!=|==|=|<|>)
     |(?P<punct>[(){},∧∨¬])
     |(?P<word>[^\s(){},=<>!∧∨¬"']+)
    )""", re.VERBOSE)

_FUNCS = {
    "year": lambda ms: from_ms(ms).year,
    "month": lambda ms: from_ms(ms).month,
    "day": lambda ms: from_ms(ms).day,
    "hour": lambda ms: from_ms(ms).hour,
    "weekday": lambda ms: from_ms(ms).weekday(),
    "date": lambda ms: from_ms(ms).date().isoformat(),
}
_CMP = {
    "=": lambda a, b: a == b,
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


class Predicate:
    """Compiled attribute-comparison expression; call it on an Event."""

    def __init__(self, fn: Callable[[Event], bool], attributes, text=""):
        self._fn = fn
        self.attributes = frozenset(attributes)
        self.text = text

    def __call__(self, ev):
        return self._fn(ev)

    def __repr__(self):
        return f"Predicate({self.text!r})"


def _tokenize(text):
    pos = 0
    out = []
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ValueError(f"cannot parse predicate near {text[pos:]!r}")
        pos = m.end()
        kind = m.lastgroup
        val = m.group(kind)
        if kind == "str":
            out.append(("lit", val[1:-1]))
        elif kind == "word":
            low = val.lower()
            if low in ("and", "&&", "&"):
                out.append(("punct", "∧"))
            elif low in ("or", "||", "|"):
                out.append(("punct", "∨"))
            elif low == "not":
                out.append(("punct", "¬"))
            else:
                out.append(("word", val))
        else:
            out.append((kind, val))
    return out


def _coerce(literal, kind):
    if kind in ("integer", "real"):
        try:
            return int(literal)
        except ValueError:
            return float(literal)
    if kind == "instant":
        return parse_ts(literal)
    return literal


def parse_predicate(text: str, schema: Mapping[str, str]) -> Predicate:
    """Compile a predicate such as ``year(timestamp)=2017 ∧ color=white``.

    Supports ``∧/and``, ``∨/or``, ``¬/not``, parentheses, the comparisons
    ``= != < <= > >=``, set membership ``attr in {a, b}`` and the
    timestamp functions year/month/day/hour/weekday/date.
    """
    full = dict(BUILTIN_SCHEMA)
    full.update(schema)
    toks = _tokenize(text)
    attrs = set()
    pos = 0

    def peek():
        return toks[pos] if pos < len(toks) else (None, None)

    def take(expected=None):
        nonlocal pos
        tok = peek()
        if tok[0] is None or (expected and tok[1] != expected):
            raise ValueError(f"predicate {text!r}: expected {expected or 'token'}")
        pos += 1
        return tok

    def operand():
        kind, name = take()
        if kind != "word":
            raise ValueError(f"predicate {text!r}: bad operand {name!r}")
        if peek() == ("punct", "(") and name.lower() in _FUNCS:
            take("(")
            _, inner = take()
            take(")")
            if inner not in full:
                raise UnknownAttributeError(f"unknown attribute {inner!r}")
            attrs.add(inner)
            f = _FUNCS[name.lower()]
            out_kind = "string" if name.lower() == "date" else "integer"

            def get(ev, inner=inner, f=f):
                v = ev.get(inner)
                return None if v is None else f(v)
            return get, out_kind
        if name not in full:
            raise UnknownAttributeError(f"unknown attribute {name!r}")
        attrs.add(name)
        return (lambda ev, name=name: ev.get(name)), full[name]

    def literal(kind):
        tk, val = take()
        if tk not in ("word", "lit"):
            raise ValueError(f"predicate {text!r}: expected a value, got {val!r}")
        return _coerce(val, kind) if tk == "word" else (
            val if kind == "string" else _coerce(val, kind))

    def atom():
        tok = peek()
        if tok == ("punct", "("):
            take("(")
            node = disj()
            take(")")
            return node
        if tok == ("punct", "¬"):
            take()
            inner = atom()
            return lambda ev: not inner(ev)
        if tok[0] == "word" and tok[1].lower() in ("true", "false"):
            take()
            const = tok[1].lower() == "true"
            return lambda ev: const
        get, kind = operand()
        nxt = peek()
        if nxt[0] == "word" and nxt[1].lower() == "in":
            take()
            take("{")
            values = set()
            while True:
                values.add(literal(kind))
                if peek() == ("punct", ","):
                    take()
                    continue
                take("}")
                break
            return lambda ev: get(ev) in values
        opk, op = take()
        if opk != "op":
            raise ValueError(f"predicate {text!r}: expected comparison, got {op!r}")
        value = literal(kind)
        cmp = _CMP[op]

        def test(ev):
            v = get(ev)
            if v is None:
                return False
            return cmp(v, value)
        return test

    def conj():
        parts = [atom()]
        while peek() == ("punct", "∧"):
            take()
            parts.append(atom())
        if len(parts) == 1:
            return parts[0]
        return lambda ev: all(p(ev) for p in parts)

    def disj():
        parts = [conj()]
        while peek() == ("punct", "∨"):
            take()
            parts.append(conj())
        if len(parts) == 1:
            return parts[0]
        return lambda ev: any(p(ev) for p in parts)

    if not toks:
        raise ValueError("empty predicate")
    fn = disj()
    if pos != len(toks):
        raise ValueError(f"predicate {text!r}: trailing input {toks[pos][1]!r}")
    return Predicate(fn, attrs, text)


def filter_events(log: EventLog, predicate) -> EventLog:
    """Events satisfying ``predicate`` (text or Predicate), order preserved."""
    if isinstance(predicate, str):
        predicate = parse_predicate(predicate, log.schema)
    elif isinstance(predicate, Predicate):
        unknown = [a for a in predicate.attributes
                   if a not in BUILTIN_SCHEMA and a not in log.schema]
        if unknown:
            raise UnknownAttributeError(f"unknown attribute(s) {unknown}")
    return log.with_events(ev for ev in log.events if predicate(ev))


# ------------------------------------------------------------ CSV


@dataclass(frozen=True)
class ColumnMapping:
    """Which CSV columns play which role.  ``None`` roles are auto-detected
    by their default column name and may be absent."""
    case: str = "case_id"
    activity: str = "activity"
    timestamp: str = "timestamp"
    lifecycle: Optional[str] = None
    resource: Optional[str] = None
    event_id: Optional[str] = None
    timestamp_format: Optional[str] = None


def _decode(data):
    if isinstance(data, (bytes, bytearray)):
        return data.decode("utf-8-sig")
    if hasattr(data, "read"):
        got = data.read()
        return got.decode("utf-8-sig") if isinstance(got, bytes) else got
    return data


def _parse_value(text, kind, fmt=None):
    if kind == "integer":
        return int(text)
    if kind == "real":
        return float(text)
    if kind == "instant":
        return parse_ts(text, fmt)
    return text


def _guess_kind(values):
    kind = "integer"
    for v in values:
        if v == "":
            continue
        if kind == "integer":
            try:
                int(v)
                continue
            except ValueError:
                kind = "real"
        try:
            float(v)
        except ValueError:
            return "string"
    return kind


def parse_csv_log(data, mapping: ColumnMapping = ColumnMapping(), schema=None) -> EventLog:
    """Parse a CSV event log (RFC-4180, header row required).

    Unmapped columns become event attributes; their types come from
    ``schema`` when given, otherwise they are inferred column-wise.
    """
    text = _decode(data)
    reader = csv.reader(io.StringIO(text, newline=""))
    try:
        header = next(reader)
    except StopIteration:
        raise LogFormatError("missing header row") from None
    cols = {name: i for i, name in enumerate(header)}
    for role in ("case", "activity", "timestamp"):
        col = getattr(mapping, role)
        if col not in cols:
            raise LogFormatError(f"mapped {role} column {col!r} not in header")
    optional = {}
    for role, default in (("lifecycle", "lifecycle"), ("resource", "resource"),
                          ("event_id", "event_id")):
        col = getattr(mapping, role)
        if col is not None and col not in cols:
            raise LogFormatError(f"mapped {role} column {col!r} not in header")
        col = col or default
        optional[role] = cols.get(col)
    used = {cols[mapping.case], cols[mapping.activity], cols[mapping.timestamp]}
    used |= {i for i in optional.values() if i is not None}
    attr_cols = [(name, i) for name, i in cols.items() if i not in used]

    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(c == "" for c in row):
            continue
        if len(row) != len(header):
            raise LogParseError(lineno, f"expected {len(header)} fields, got {len(row)}")
        rows.append((lineno, row))

    kinds = {}
    schema = dict(schema or {})
    for name, i in attr_cols:
        kinds[name] = schema.get(name) or _guess_kind(r[i] for _, r in rows)

    events = []
    for n, (lineno, row) in enumerate(rows):
        try:
            ts = parse_ts(row[cols[mapping.timestamp]], mapping.timestamp_format)
        except ValueError as exc:
            raise LogParseError(lineno, f"bad timestamp {row[cols[mapping.timestamp]]!r}: {exc}") from None
        lc = COMPLETE
        if optional["lifecycle"] is not None and row[optional["lifecycle"]] != "":
            lc = row[optional["lifecycle"]].strip().lower()
            if lc not in LIFECYCLES:
                raise LogParseError(lineno, f"bad lifecycle {lc!r}")
        res = row[optional["resource"]] if optional["resource"] is not None else ""
        eid = row[optional["event_id"]] if optional["event_id"] is not None else ""
        attrs = {}
        for name, i in attr_cols:
            if row[i] == "":
                continue
            try:
                attrs[name] = _parse_value(row[i], kinds[name])
            except ValueError:
                raise LogParseError(lineno, f"bad {kinds[name]} value {row[i]!r} in column {name!r}") from None
        events.append(Event(
            event_id=eid or f"e{n:07d}",
            activity=row[cols[mapping.activity]],
            timestamp=ts,
            lifecycle=lc,
            resource=res or None,
            case_id=row[cols[mapping.case]] or None,
            attrs=attrs,
        ))
    try:
        return EventLog(events, {name: kinds[name] for name, _ in attr_cols})
    except ValueError as exc:
        raise LogFormatError(str(exc)) from None


def _render(value, kind):
    if value is None:
        return ""
    if kind == "instant":
        return format_ts(value)
    if kind == "real":
        return repr(float(value))
    return str(value)


def write_csv_log(log: EventLog) -> str:
    attrs = sorted(log.schema)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["event_id", "case_id", "activity", "timestamp", "lifecycle", "resource"] + attrs)
    for ev in log.events:
        w.writerow([ev.event_id, ev.case_id or "", ev.activity, format_ts(ev.timestamp),
                    ev.lifecycle, ev.resource or ""]
                   + [_render(ev.attrs.get(a), log.schema[a]) for a in attrs])
    return buf.getvalue()


# ------------------------------------------------------------ JSON


def log_to_json(log: EventLog) -> dict:
    events = []
    for ev in log.events:
        events.append({
            "event_id": ev.event_id,
            "activity": ev.activity,
            "timestamp": format_ts(ev.timestamp),
            "lifecycle": ev.lifecycle,
            "resource": ev.resource,
            "case_id": ev.case_id,
            "attrs": {k: format_ts(v) if log.schema[k] == "instant" else v
                      for k, v in sorted(ev.attrs.items())},
        })
    return {"schema": dict(sorted(log.schema.items())), "events": events}


def log_from_json(doc) -> EventLog:
    if isinstance(doc, (str, bytes)):
        doc = json.loads(doc)
    try:
        schema = doc["schema"]
        raw = doc["events"]
    except (KeyError, TypeError):
        raise LogFormatError("JSON log needs top-level 'schema' and 'events'") from None
    for k, t in schema.items():
        if t not in ATTR_TYPES:
            raise LogFormatError(f"attribute {k!r}: unknown type {t!r}")
    events = []
    for n, e in enumerate(raw):
        try:
            attrs = {}
            for k, v in (e.get("attrs") or {}).items():
                kind = schema[k]
                attrs[k] = parse_ts(v) if kind == "instant" else (
                    float(v) if kind == "real" else v)
            events.append(Event(
                event_id=e["event_id"], activity=e["activity"],
                timestamp=parse_ts(e["timestamp"]),
                lifecycle=e.get("lifecycle") or COMPLETE,
                resource=e.get("resource"), case_id=e.get("case_id"), attrs=attrs))
        except (KeyError, ValueError) as exc:
            raise LogParseError(n, f"bad event: {exc}") from None
    try:
        return EventLog(events, schema)
    except ValueError as exc:
        raise LogFormatError(str(exc)) from None


def write_json_log(log: EventLog) -> str:
    return json.dumps(log_to_json(log), indent=1, ensure_ascii=False) + "\n"
