"""Python access to the vmsim simulator core."""

import json

from ._core import (
    CSV_HEADER,
    FileStore,
    ServerSpec,
    TimeSeries,
    VmsimError,
    build_matrix,
    decode_series,
    encode_series,
    estimate_demand,
    place_initial,
    registry_names,
    sample_at,
    server_utilization,
    simulate_file,
    solve_min_servers_exact,
)
from . import _core

__all__ = [
    "CSV_HEADER",
    "FileStore",
    "ServerSpec",
    "TimeSeries",
    "VmsimError",
    "aggregate",
    "build_matrix",
    "build_schedule",
    "decode_series",
    "encode_series",
    "estimate_demand",
    "normalize_config",
    "place_initial",
    "registry_names",
    "render_report",
    "sample_at",
    "server_utilization",
    "simulate",
    "simulate_file",
    "solve_min_servers_exact",
    "validate_schedule",
]


def _as_json(doc):
    return doc if isinstance(doc, str) else json.dumps(doc)


def build_schedule(*, id="generated", rate, mean_lifetime_s, horizon_s, sizes, series_pool,
                   seed=1, lifetime_dist="exponential"):
    """Generate a schedule; sizes are (cpu_units, memory_mb, probability) tuples. Returns a dict."""
    text = _core.build_schedule(id, rate, mean_lifetime_s, lifetime_dist, horizon_s,
                                [tuple(s) for s in sizes], list(series_pool), seed)
    return json.loads(text)


def validate_schedule(schedule, series):
    """List of violation descriptions; empty means the schedule is valid."""
    return _core.validate_schedule(_as_json(schedule), list(series))


def normalize_config(config):
    """Validate a config (dict or JSON text) and return it with defaults filled in."""
    return json.loads(_core.normalize_config(_as_json(config)))


def simulate(config, schedule, series):
    """Run one simulation against in-memory TimeSeries objects. Returns the result row as a dict."""
    return _core.simulate(_as_json(config), _as_json(schedule), list(series))


def aggregate(csv_text):
    """Group batch CSV rows by controller combination and estimator."""
    return _core.aggregate_csv(csv_text)


def render_report(csv_text, format="markdown", plot=False):
    """Render the aggregated batch CSV as markdown or HTML."""
    return _core.render_report(csv_text, format, plot)
