"""Command-line entry point: ``pmline <subcommand> ...``."""
import argparse
import json
import os
import sys
import tempfile

from .errors import DataError, InvariantError, PmlineError

EXIT_USAGE, EXIT_DATA, EXIT_INVARIANT = 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ------------------------------------------------------------ io helpers


def write_atomic(path, text):
    """Write ``text`` to ``path`` via a temporary file and rename.
    ``None`` or ``-`` writes to standard output."""
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dump(obj):
    return json.dumps(obj, indent=1, sort_keys=True, allow_nan=True) + "\n"


def _read_text(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from exc


def _load_json(path):
    try:
        return json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from exc


def _load_log(path, args=None):
    from .eventlog import ColumnMapping, log_from_json, parse_csv_log
    if path.endswith(".json"):
        return log_from_json(_load_json(path))
    mapping = ColumnMapping()
    if args is not None and getattr(args, "case_col", None):
        mapping = ColumnMapping(case=args.case_col, activity=args.activity_col,
                                timestamp=args.time_col, lifecycle=args.lifecycle_col,
                                resource=args.resource_col, event_id=args.id_col,
                                timestamp_format=args.time_format)
    elif args is None or not getattr(args, "raw_csv", False):
        mapping = ColumnMapping(lifecycle="lifecycle", resource="resource", event_id="event_id")
    with open(path, "rb") as fh:
        return parse_csv_log(fh.read(), mapping)


def _traces(path, args=None):
    from .eventlog import build_traces
    return build_traces(_load_log(path, args))


def _config(path):
    from .config import LineConfig
    return LineConfig.load(path) if path else LineConfig.default()


def _add_log_flags(p):
    p.add_argument("--log", required=True, help="event log (.csv or .json)")
    p.add_argument("--raw-csv", action="store_true",
                   help="CSV has only case/activity/timestamp roles at their default names")
    p.add_argument("--case-col", help="CSV column holding the case id")
    p.add_argument("--activity-col", default="activity")
    p.add_argument("--time-col", default="timestamp")
    p.add_argument("--lifecycle-col")
    p.add_argument("--resource-col")
    p.add_argument("--id-col")
    p.add_argument("--time-format", help="strptime format (default ISO-8601)")


def _add_config_flag(p):
    p.add_argument("--config", help="line configuration JSON (default: built-in line)")


# ------------------------------------------------------------ commands


def cmd_simulate(a):
    from .config import injection_from_dict, apply_injection
    from .eventlog import write_csv_log, write_json_log
    from .ocpm import ocel_to_json
    from .simulator import simulate
    cfg = _config(a.config)
    for spec in a.inject or ():
        cfg = apply_injection(cfg, injection_from_dict(json.loads(spec)))
    res = simulate(cfg, a.seed, a.cars, objects=bool(a.ocel))
    write_atomic(a.out, write_json_log(res.log) if a.out.endswith(".json")
                 else write_csv_log(res.log))
    if a.ocel:
        write_atomic(a.ocel, _dump(ocel_to_json(res.ocel)))


def cmd_discover(a):
    from .discovery import dfg_to_dot, discover_dfg, discover_tree
    from .models import tree_to_dot
    log = _traces(a.log, a)
    tree = discover_tree(log, a.noise)
    write_atomic(a.out, _dump(tree.to_dict()))
    if a.dot:
        write_atomic(a.dot, tree_to_dot(tree))
    if a.dfg:
        dfg = discover_dfg(log)
        write_atomic(a.dfg, dfg_to_dot(dfg) if a.dfg.endswith(".dot") else _dump(dfg.to_dict()))


def _model(path):
    from .models import ProcessTree, parse_tree, tree_to_lts
    from .errors import ModelError
    text = _read_text(path)
    try:
        tree = ProcessTree.from_dict(json.loads(text))
    except json.JSONDecodeError:
        tree = parse_tree(text)
    except (KeyError, TypeError) as exc:
        raise ModelError(f"{path}: not a process tree ({exc})") from exc
    return tree_to_lts(tree)


def cmd_conform(a):
    from .conformance import check_log
    rep = check_log(_traces(a.log, a), _model(a.model))
    write_atomic(a.out, rep.to_json())
    if a.dot:
        write_atomic(a.dot, rep.to_dot())


def cmd_perf(a):
    from .performance import bottleneck_ranking, rolling_sojourn, station_stats
    cfg = _config(a.config)
    log = _traces(a.log, a)
    upstream = cfg.upstream_map() if not a.no_upstream else None
    st = station_stats(log, cfg.calendar, upstream)
    doc = {"stations": st.to_dict(),
           "ranking": {m: bottleneck_ranking(st, m) for m in ("service", "waiting", "sojourn")}
           if st.visits else {}}
    write_atomic(a.out, _dump(doc))
    if a.csv:
        write_atomic(a.csv, st.to_csv())
    if a.rolling:
        station, _, path = a.rolling.partition(":")
        if not path:
            raise UsageError("--rolling expects STATION:PATH")
        write_atomic(path, rolling_sojourn(log, station, a.window, stats=st).to_csv())


def cmd_dotted(a):
    from .discovery import dotted_chart
    write_atomic(a.out, dotted_chart(_traces(a.log, a), a.sort).to_csv())


def cmd_cube(a):
    from .cube import (apply_query, attribute_dimension, build_cube, default_locations,
                       hierarchy_dimension, load_hierarchy, time_dimension)
    from .eventlog import write_csv_log
    log = _load_log(a.log, a)
    hier = load_hierarchy(a.hierarchy) if a.hierarchy else default_locations()
    dims = []
    for name in a.dims.split(","):
        name = name.strip()
        if name == "time":
            dims.append(time_dimension(level=a.time_level))
        elif name in ("location", "city"):
            dims.append(hierarchy_dimension("location", "city", hier, ("city", "country")))
        else:
            dims.append(attribute_dimension(name))
    cube = apply_query(build_cube(log, dims), a.query or "")
    cells = [{"coords": list(k), "events": len(v), "cases": len({e.case_id for e in v})}
             for k, v in cube.cells().items()]
    write_atomic(a.out, _dump({"dimensions": [{"name": d.name, "level": d.level_name}
                                              for d in cube.dims],
                               "cells": cells, "split_cases": len(cube.split_cases())}))
    if a.materialize:
        coords, _, path = a.materialize.rpartition(":")
        if not coords and not cube.dims:
            coords = ""
        key = tuple(c for c in coords.split(",")) if coords else ()
        sub = cube.materialize(key)
        write_atomic(path, write_csv_log(sub.to_event_log()))


def cmd_drift(a):
    from .drift import DriftParams, drift_report
    cfg = _config(a.config)
    params = DriftParams(a.window, a.threshold, a.min_segment or a.window, a.consecutive)
    rep = drift_report(_traces(a.log, a), a.stations.split(","), params, cfg.calendar,
                       cfg.upstream_map())
    write_atomic(a.out, rep.to_json())
    if a.series_dir:
        os.makedirs(a.series_dir, exist_ok=True)
        for s, series in sorted(rep.series.items()):
            write_atomic(os.path.join(a.series_dir, f"{s}.csv"), series.to_csv())


def cmd_compare(a):
    from .comparison import compare_report, pair_table
    cfg = _config(a.config)
    la, lb = _traces(a.log_a, a), _traces(a.log_b, a)
    pairs = [tuple(p.split(":")) for p in a.pairs.split(",")] if a.pairs else []
    stations = a.stations.split(",") if a.stations else None
    rep = compare_report(la, lb, stations, pairs, cfg.calendar)
    write_atomic(a.out, rep.to_json())
    if a.pair_csv and pairs:
        x, y = pairs[0]
        stem, ext = os.path.splitext(a.pair_csv)
        write_atomic(f"{stem}-a{ext}", pair_table(la, x, y, cfg.calendar).to_csv())
        write_atomic(f"{stem}-b{ext}", pair_table(lb, x, y, cfg.calendar).to_csv())


def cmd_ocdfg(a):
    from .ocpm import discover_multigraph, multigraph_to_dot, ocel_from_json
    mg = discover_multigraph(ocel_from_json(_load_json(a.ocel)))
    write_atomic(a.out, multigraph_to_dot(mg) if (a.out or "").endswith(".dot") else _dump(mg.to_dict()))
    if a.dot:
        write_atomic(a.dot, multigraph_to_dot(mg))


def cmd_flattenstats(a):
    from .ocpm import flattening_metrics, ocel_from_json
    oc = ocel_from_json(_load_json(a.ocel))
    types = a.type.split(",") if a.type else oc.types
    write_atomic(a.out, _dump([flattening_metrics(oc, t).to_dict() for t in types]))


def cmd_sdlog(a):
    from .sd import HOUR_MS, build_stock_flow, detect_relations, extract_sdlog
    cfg = _config(a.config)
    cal = cfg.calendar if a.worked else None
    sdl = extract_sdlog(_traces(a.log, a), int(a.window_hours * HOUR_MS), cal)
    write_atomic(a.out, sdl.to_csv())
    rels = []
    if a.relations:
        rels = detect_relations(sdl, a.max_lag, a.threshold)
        write_atomic(a.relations, _dump([r.to_dict() for r in rels]))
    if a.model:
        write_atomic(a.model, build_stock_flow(sdl, rels).to_json())


def cmd_whatif(a):
    from .config import BufferSpec
    from .sd import StockFlowModel, whatif_buffer
    station, _, cap = a.buffer.partition(":")
    try:
        spec = BufferSpec(station, int(cap))
    except ValueError as exc:
        raise UsageError(f"--buffer expects STATION:CAPACITY, got {a.buffer!r}") from exc
    model = StockFlowModel.from_dict(_load_json(a.sdmodel))
    res = whatif_buffer(model, spec, _config(a.config), a.seed, a.cars, a.steps, a.period)
    write_atomic(a.out, res.to_csv())


# ------------------------------------------------------------ parser


def build_parser():
    p = _Parser(prog="pmline", description="Process mining on production-line event data.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser, required=True)

    s = sub.add_parser("simulate", help="generate flat and object-centric logs")
    _add_config_flag(s)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--cars", type=int, default=100)
    s.add_argument("--out", required=True, help="flat log (.csv or .json)")
    s.add_argument("--ocel", help="also write the object-centric log (JSON)")
    s.add_argument("--inject", action="append",
                   help='injection as JSON, e.g. {"kind": "drift", "station": "GA5", '
                        '"onset": 600, "service_scale": 1.5}; repeatable')
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("discover", help="discover a process tree (and DFG)")
    _add_log_flags(s)
    s.add_argument("--noise", type=float, default=0.0)
    s.add_argument("--out", help="process tree JSON")
    s.add_argument("--dot", help="process tree DOT")
    s.add_argument("--dfg", help="DFG as JSON, or DOT when the name ends in .dot")
    s.set_defaults(func=cmd_discover)

    s = sub.add_parser("conform", help="align a log with a process tree")
    _add_log_flags(s)
    s.add_argument("--model", required=True, help="process tree (JSON or text)")
    s.add_argument("--out", help="report JSON")
    s.add_argument("--dot", help="deviation view DOT")
    s.set_defaults(func=cmd_conform)

    s = sub.add_parser("perf", help="station time statistics and bottlenecks")
    _add_log_flags(s)
    _add_config_flag(s)
    s.add_argument("--no-upstream", action="store_true",
                   help="measure waiting from the previous instance, not the line topology")
    s.add_argument("--out", help="stats JSON")
    s.add_argument("--csv", help="stats CSV")
    s.add_argument("--rolling", help="STATION:PATH rolling sojourn series CSV")
    s.add_argument("--window", type=int, default=10)
    s.set_defaults(func=cmd_perf)

    s = sub.add_parser("dotted", help="dotted-chart points")
    _add_log_flags(s)
    s.add_argument("--sort", choices=("first-event", "duration"), default="first-event")
    s.add_argument("--out", help="output path (default: stdout)")
    s.set_defaults(func=cmd_dotted)

    s = sub.add_parser("cube", help="process cube cells")
    _add_log_flags(s)
    s.add_argument("--dims", default="color,location,time")
    s.add_argument("--hierarchy", help="child,parent CSV for the location dimension")
    s.add_argument("--time-level", choices=("day", "month", "year"), default="year")
    s.add_argument("--query", help='e.g. "slice time=2017; dice color=white,blue; rollup location"')
    s.add_argument("--out", help="cells JSON")
    s.add_argument("--materialize", help="COORD1,COORD2,...:PATH writes the cell sublog CSV")
    s.set_defaults(func=cmd_cube)

    s = sub.add_parser("drift", help="change points in station sojourn times")
    _add_log_flags(s)
    _add_config_flag(s)
    s.add_argument("--stations", required=True)
    s.add_argument("--window", type=int, default=50)
    s.add_argument("--threshold", type=float, default=5.0)
    s.add_argument("--min-segment", type=int)
    s.add_argument("--consecutive", type=int, default=3)
    s.add_argument("--out", help="output path (default: stdout)")
    s.add_argument("--series-dir", help="directory for rolling sojourn CSVs")
    s.set_defaults(func=cmd_drift)

    s = sub.add_parser("compare", help="compare two logs")
    s.add_argument("--log-a", required=True)
    s.add_argument("--log-b", required=True)
    s.add_argument("--raw-csv", action="store_true")
    _add_config_flag(s)
    s.add_argument("--stations", help="comma-separated (default: all shared)")
    s.add_argument("--pairs", default="GA4:GA5", help="X:Y[,X:Y...]")
    s.add_argument("--out", help="output path (default: stdout)")
    s.add_argument("--pair-csv", help="pair tables; -a/-b suffixes are added")
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("ocdfg", help="directly-follows multigraph")
    s.add_argument("--ocel", required=True)
    s.add_argument("--out", help="JSON, or DOT when the name ends in .dot")
    s.add_argument("--dot")
    s.set_defaults(func=cmd_ocdfg)

    s = sub.add_parser("flattenstats", help="convergence/divergence of flattening")
    s.add_argument("--ocel", required=True)
    s.add_argument("--type", help="object type(s), comma-separated (default: all)")
    s.add_argument("--out", help="output path (default: stdout)")
    s.set_defaults(func=cmd_flattenstats)

    s = sub.add_parser("sdlog", help="SD-log, relations and stock-flow model")
    _add_log_flags(s)
    _add_config_flag(s)
    s.add_argument("--window-hours", type=float, default=24.0)
    s.add_argument("--worked", action="store_true",
                   help="windows measured in worked time of the configured calendar")
    s.add_argument("--out", help="SD-log CSV")
    s.add_argument("--relations", help="relations JSON")
    s.add_argument("--max-lag", type=int, default=3)
    s.add_argument("--threshold", type=float, default=0.7)
    s.add_argument("--model", help="stock-flow model JSON")
    s.set_defaults(func=cmd_sdlog)

    s = sub.add_parser("whatif", help="buffer what-if on a stock-flow model")
    s.add_argument("--sdmodel", required=True)
    s.add_argument("--buffer", required=True, help="STATION:CAPACITY")
    _add_config_flag(s)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--cars", type=int, default=450, help="cars per calibration run")
    s.add_argument("--steps", type=int, default=22)
    s.add_argument("--period", type=int, default=22, help="steps per reporting period")
    s.add_argument("--out", help="scenario CSV")
    s.set_defaults(func=cmd_whatif)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvariantError as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (DataError, ValueError, KeyError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except PmlineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
