"""Comparing two sublogs: duration and variant EMD, paired station durations."""
import csv
import io
import json
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction

import networkx as nx
import numpy as np
from scipy import stats as sps
from scipy.signal import find_peaks

from .kernels import levenshtein, wasserstein_1d
from .performance import station_stats

COST_SCALE = 10**9


@dataclass(frozen=True)
class DurationDistribution:
    station: str
    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        if np.any(s < 0):
            raise ValueError("durations must be non-negative")
        object.__setattr__(self, "samples", s)


def _samples(x):
    return x.samples if isinstance(x, DurationDistribution) else np.asarray(x, dtype=np.float64)


def duration_emd(a, b) -> float:
    """Exact Wasserstein-1 distance between two equal-weight sample sets."""
    a, b = _samples(a), _samples(b)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("duration_emd needs two non-empty sample sets")
    return wasserstein_1d(a, b)


@dataclass
class VariantDistribution:
    """Relative variant frequencies; integer counts are kept when known."""
    weights: dict

    def __post_init__(self):
        w = {tuple(k): v for k, v in self.weights.items() if v}
        if not w:
            raise ValueError("empty variant distribution")
        if any(v < 0 for v in w.values()):
            raise ValueError("negative variant frequency")
        if not all(isinstance(v, (int, np.integer)) for v in w.values()):
            if abs(sum(w.values()) - 1.0) > 1e-9:
                raise ValueError("variant frequencies must sum to 1")
        self.weights = w

    @classmethod
    def from_log(cls, log):
        return cls(dict(log.variants()))

    @property
    def frequencies(self):
        tot = sum(self.weights.values())
        return {k: v / tot for k, v in self.weights.items()}

    def integer_masses(self, total):
        """Masses scaled to sum exactly to ``total`` (largest remainder)."""
        tot = sum(self.weights.values())
        keys = sorted(self.weights)
        exact = [Fraction(self.weights[k]) * total / Fraction(tot) for k in keys]
        base = [int(e) for e in exact]
        rest = total - sum(base)
        order = sorted(range(len(keys)), key=lambda i: (-(exact[i] - base[i]), i))
        for i in order[:rest]:
            base[i] += 1
        return dict(zip(keys, base))


def _as_variants(x):
    return x if isinstance(x, VariantDistribution) else VariantDistribution(dict(x))


def normalized_edit_distance(a, b, codes=None):
    if not a and not b:
        return 0.0
    codes = codes or {}
    ca = np.array([codes.setdefault(s, len(codes)) for s in a], dtype=np.int64)
    cb = np.array([codes.setdefault(s, len(codes)) for s in b], dtype=np.int64)
    return levenshtein(ca, cb) / max(len(a), len(b))


def variant_emd(a, b) -> float:
    """Optimal transport between variant distributions (normalised edit distance)."""
    a, b = _as_variants(a), _as_variants(b)
    ca = sum(a.weights.values())
    cb = sum(b.weights.values())
    if all(isinstance(v, (int, np.integer)) for v in list(a.weights.values()) + list(b.weights.values())):
        total = int(ca) * int(cb)
        ma = {k: int(v) * int(cb) for k, v in a.weights.items()}
        mb = {k: int(v) * int(ca) for k, v in b.weights.items()}
    else:
        total = COST_SCALE
        ma, mb = a.integer_masses(total), b.integer_masses(total)
    codes = {}
    g = nx.DiGraph()
    for i, k in enumerate(sorted(ma)):
        g.add_node(("a", i), demand=-ma[k], v=k)
    for j, k in enumerate(sorted(mb)):
        g.add_node(("b", j), demand=mb[k], v=k)
    for i, ka in enumerate(sorted(ma)):
        for j, kb in enumerate(sorted(mb)):
            cost = int(round(normalized_edit_distance(ka, kb, codes) * COST_SCALE))
            g.add_edge(("a", i), ("b", j), weight=cost)
    cost = nx.network_simplex(g)[0]
    return cost / COST_SCALE / total


# ------------------------------------------------------------ pair tables


@dataclass
class PairTable:
    x: str
    y: str
    rows: list            # (case, duration at x, duration at y), seconds
    excluded: int = 0

    def spearman(self):
        """(rho, two-sided p); NaN when fewer than three rows or no variation."""
        if len(self.rows) < 3:
            return float("nan"), float("nan")
        xs = [r[1] for r in self.rows]
        ys = [r[2] for r in self.rows]
        if len(set(xs)) < 2 or len(set(ys)) < 2:
            return float("nan"), float("nan")
        res = sps.spearmanr(xs, ys)
        return float(res.statistic), float(res.pvalue)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["case_id", self.x, self.y])
        for c, dx, dy in self.rows:
            w.writerow([c, repr(float(dx)), repr(float(dy))])
        return buf.getvalue()


def pair_table(log, x, y, calendar=None, stats=None, metric="service") -> PairTable:
    stats = stats or station_stats(log, calendar)
    vx, vy = stats.visits.get(x), stats.visits.get(y)
    if vx is None or vy is None:
        raise ValueError(f"station {x if vx is None else y!r} not present in the log")
    dx = dict(zip(vx.cases, getattr(vx, metric)))
    dy = dict(zip(vy.cases, getattr(vy, metric)))
    both = sorted(set(dx) & set(dy))
    excluded = len(set(log.cases) - set(both))
    return PairTable(x, y, [(c, float(dx[c]), float(dy[c])) for c in both], excluded)


# ------------------------------------------------------------ summaries


def peak_count(samples, rel_height=0.1):
    """Peaks of a Freedman-Diaconis histogram.

    A peak is a local maximum whose prominence (height above the higher of
    the two valleys separating it from taller bins) is at least
    ``rel_height`` of the tallest bin.  Zero bins pad both ends so edge
    bins can count.
    """
    x = np.asarray(samples, dtype=np.float64)
    if len(x) == 0:
        return 0
    if np.ptp(x) == 0:
        return 1
    h, _ = np.histogram(x, bins="fd")
    h = np.concatenate([[0], h, [0]])
    peaks, _ = find_peaks(h, prominence=rel_height * h.max())
    return int(len(peaks))


def summarize(samples):
    x = np.asarray(samples, dtype=np.float64)
    p50 = float(np.percentile(x, 50))
    p95 = float(np.percentile(x, 95))
    return {"n": int(len(x)), "mean": float(x.mean()), "p50": p50, "p95": p95,
            "tail_index": p95 / p50 if p50 > 0 else float("inf"), "peaks": peak_count(x)}


@dataclass
class ComparisonReport:
    stations: dict = field(default_factory=dict)
    variant_emd: float = 0.0
    pairs: dict = field(default_factory=dict)

    def to_dict(self):
        return {"stations": self.stations, "variant_emd": self.variant_emd, "pairs": self.pairs}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"


def compare_report(a, b, stations=None, pairs=(("GA4", "GA5"),), calendar=None,
                   metric="service", tail_margin=1.1, alpha=0.05) -> ComparisonReport:
    sa, sb = station_stats(a, calendar), station_stats(b, calendar)
    common = sorted(set(sa.visits) & set(sb.visits))
    if stations is not None:
        common = [s for s in stations if s in sa.visits and s in sb.visits]
    rep = ComparisonReport()
    for s in common:
        xa = getattr(sa.visits[s], metric)
        xb = getattr(sb.visits[s], metric)
        ta, tb = summarize(xa), summarize(xb)
        flags = []
        if ta["tail_index"] > tail_margin * tb["tail_index"]:
            flags.append("longer tail in a")
        elif tb["tail_index"] > tail_margin * ta["tail_index"]:
            flags.append("longer tail in b")
        if ta["peaks"] != tb["peaks"]:
            flags.append(f"peaks differ ({ta['peaks']} vs {tb['peaks']})")
        rep.stations[s] = {"emd": duration_emd(xa, xb), "a": ta, "b": tb, "flags": flags}
    rep.variant_emd = variant_emd(VariantDistribution.from_log(a), VariantDistribution.from_log(b))
    for x, y in pairs:
        if not all(st in sv.visits for st in (x, y) for sv in (sa, sb)):
            continue
        row = {}
        for side, log, st in (("a", a, sa), ("b", b, sb)):
            rho, p = pair_table(log, x, y, stats=st, metric=metric).spearman()
            row[side] = {"rho": rho, "p": p, "related": bool(p < alpha) if p == p else False}
        rep.pairs[f"{x}~{y}"] = row
    return rep
