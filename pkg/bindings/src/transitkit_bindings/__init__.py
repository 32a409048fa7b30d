"""Thin scripting bindings over the transit store editor and pipeline.

Every operation delegates to the core package; this layer only manages the
open/closed lifecycle of a store handle and commits or discards edits on
close.  No business logic lives here.
"""

import transitkit
from transitkit import edit as _edit
from transitkit.edit import TimetableSpec  # noqa: F401  (part of the surface)
from transitkit.errors import DoubleClose, NotAStore  # noqa: F401
from transitkit.scenario import load_scenario
from transitkit.scenario import run_pipeline as _run_pipeline
from transitkit.store import load_network, persist_network

__version__ = transitkit.__version__


class StoreHandle:
    """An open store plus its pending, uncommitted edits."""

    def __init__(self, path, store):
        self.path = path
        self.store = store
        self.closed = False

    def _live(self):
        if self.closed:
            raise DoubleClose(f"store handle for {self.path} is closed")
        return self.store


def open_store(path):
    """Open a store directory for editing; raises NotAStore if invalid."""
    return StoreHandle(path, load_network(path))


def close_store(handle, commit=True):
    """Commit pending edits to disk, or discard them when commit is False."""
    store = handle._live()
    handle.closed = True
    if commit:
        persist_network(store, handle.path)


def add_stop(handle, lat, lon, name, agency_id=None):
    return _edit.add_stop(handle._live(), lat, lon, name, agency_id)


def remove_stop(handle, stop_id):
    return _edit.remove_stop(handle._live(), stop_id)


def modify_pattern(handle, pattern_id, new_stops):
    return _edit.modify_pattern(handle._live(), pattern_id, new_stops)


def update_frequencies(handle, route_ids, window, multiplier=None,
                       max_headway_s=None):
    return _edit.update_frequencies(handle._live(), route_ids, window,
                                    multiplier=multiplier,
                                    max_headway_s=max_headway_s)


def update_speeds(handle, route_ids, multiplier):
    return _edit.update_speeds(handle._live(), route_ids, multiplier)


def create_route(handle, agency_id, name, mode, stop_ids, spec,
                 brt_links=None):
    return _edit.create_route(handle._live(), agency_id, name, mode,
                              stop_ids, spec, brt_links=brt_links)


def run_pipeline(scenario):
    """Run the full scenario pipeline from a scenario file path or text."""
    return _run_pipeline(load_scenario(scenario))
