"""Runs every CLI subcommand once into a directory; used by the CLI and acceptance tests."""
from pathlib import Path

from pmline.cli import run


def commands(d):
    d = Path(d)
    log, ocel = str(d / "log.csv"), str(d / "ocel.json")
    tree = str(d / "tree.json")
    return [
        ("simulate", ["simulate", "--seed", "3", "--cars", "40", "--out", log, "--ocel", ocel]),
        ("discover", ["discover", "--log", log, "--noise", "0.2", "--out", tree,
                      "--dot", str(d / "tree.dot"), "--dfg", str(d / "dfg.json")]),
        ("conform", ["conform", "--log", log, "--model", tree, "--out", str(d / "conf.json"),
                     "--dot", str(d / "conf.dot")]),
        ("perf", ["perf", "--log", log, "--out", str(d / "perf.json"), "--csv", str(d / "perf.csv"),
                  "--rolling", f"GA5:{d / 'roll.csv'}"]),
        ("dotted", ["dotted", "--log", log, "--out", str(d / "dotted.csv")]),
        ("cube", ["cube", "--log", log, "--query", "rollup location", "--out", str(d / "cube.json")]),
        ("drift", ["drift", "--log", log, "--stations", "GA4,GA5", "--window", "10",
                   "--min-segment", "10", "--out", str(d / "drift.json")]),
        ("compare", ["compare", "--log-a", log, "--log-b", log, "--out", str(d / "cmp.json"),
                     "--pair-csv", str(d / "pairs.csv")]),
        ("ocdfg", ["ocdfg", "--ocel", ocel, "--out", str(d / "ocdfg.json"),
                   "--dot", str(d / "ocdfg.dot")]),
        ("flattenstats", ["flattenstats", "--ocel", ocel, "--out", str(d / "flat.json")]),
        ("sdlog", ["sdlog", "--log", log, "--window-hours", "3", "--worked", "--max-lag", "1",
                   "--threshold", "0.3", "--out", str(d / "sd.csv"),
                   "--relations", str(d / "rel.json"), "--model", str(d / "sdmodel.json")]),
        ("whatif", ["whatif", "--sdmodel", str(d / "sdmodel.json"), "--buffer", "SA7:3",
                    "--cars", "60", "--steps", "6", "--period", "3", "--out", str(d / "whatif.csv")]),
    ]


def run_all(d):
    """Run the pipeline; returns {subcommand: exit code} and {file name: bytes}."""
    codes = {name: run(argv) for name, argv in commands(d)}
    files = {p.name: p.read_bytes() for p in sorted(Path(d).iterdir()) if p.is_file()}
    return codes, files
