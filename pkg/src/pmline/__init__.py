"""Process mining for production lines: event logs, discovery, conformance,
performance, cubes, drift, comparison, object-centric analysis and a
stock-flow layer, plus a discrete-event line simulator."""
from .eventlog import (ColumnMapping, Event, EventLog, TraceLog, build_traces, filter_events,
                       parse_csv_log)
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "ColumnMapping", "Event", "EventLog", "TraceLog", "build_traces",
           "filter_events", "parse_csv_log", "__version__"]
