"""Programmatic editing of the transit store with consistency maintenance.

All operations work on the store tables; the multimodal graph must be rebuilt
afterwards before routing.  EditTransaction makes a group of edits atomic.
"""

import copy
import shlex
from dataclasses import dataclass, field

from .errors import (DegeneratePattern, EmptyWindow, InvalidTimetable,
                     UnknownStop, InvalidValue)
from .geo import haversine_m
from .gtfs import ROUTE_TYPE_MODE
from .patterns import repair_speeds
from .store import (TransitLink, TransitPattern, TransitPatternLink,
                    TransitRoute, TransitScheduleRow, TransitStop, TransitTrip)

MODE_ROUTE_TYPE = {}
for _t, _m in ROUTE_TYPE_MODE.items():
    MODE_ROUTE_TYPE.setdefault(_m, _t)


@dataclass
class EditReport:
    warnings: list = field(default_factory=list)
    patterns_modified: list = field(default_factory=list)
    patterns_deleted: list = field(default_factory=list)
    trips_added: int = 0
    trips_removed: int = 0


def _next_id(rows, attr):
    return max((getattr(r, attr) for r in rows), default=-1) + 1


class EditTransaction:
    """Atomic group of edits; rolls the store back on any error or on a
    failed post-edit consistency check."""

    def __init__(self, store):
        self.store = store
        self._snapshot = None

    def __enter__(self):
        self._snapshot = copy.deepcopy(self.store)
        return self.store

    def _restore(self):
        for name in vars(self._snapshot):
            setattr(self.store, name, getattr(self._snapshot, name))

    def __exit__(self, exc_type, exc, tb):
        if exc_type is not None:
            self._restore()
            return False
        try:
            self.store.check_consistency()
        except Exception:
            self._restore()
            raise
        return False


# -- single operations --

def add_stop(store, lat, lon, name, agency_id=None, report=None):
    """New stop row; no pattern references it until modify_pattern."""
    if agency_id is None:
        agency_id = store.agencies[0].agency_id if store.agencies else 0
    for s in store.stops:
        if abs(s.lat - lat) < 1e-9 and abs(s.lon - lon) < 1e-9:
            if report is not None:
                report.warnings.append(
                    f"duplicate position with stop {s.stop_id}")
            break
    stop_id = _next_id(store.stops, "stop_id")
    store.stops.append(TransitStop(stop_id, f"edit{stop_id}", name,
                                   agency_id, lat, lon))
    return stop_id


def remove_stop(store, stop_id, report=None):
    """Drop a stop everywhere: pattern sequences, links, schedules.

    Adjacent links merge with lengths summed; patterns left with fewer than
    two stops are deleted along with their trips.
    """
    stops = store.stops_by_id()
    if stop_id not in stops:
        raise UnknownStop(f"stop {stop_id} does not exist")
    report = report if report is not None else EditReport()
    for pattern in list(store.patterns):
        seq = store.pattern_stop_sequence(pattern.pattern_id)
        if stop_id not in seq:
            continue
        new_seq = [s for s in seq if s != stop_id]
        if len(new_seq) < 2:
            _delete_pattern(store, pattern.pattern_id)
            report.patterns_deleted.append(pattern.pattern_id)
        else:
            _rebuild_pattern(store, pattern, new_seq, merge_removed=stop_id)
            report.patterns_modified.append(pattern.pattern_id)
    store.stops.remove(stops[stop_id])
    return report


def modify_pattern(store, pattern_id, new_stops, report=None):
    """Replace a pattern's stop sequence; links and trip times follow.

    New or changed segments are timed at the trip's observed mean commercial
    speed; downstream stops shift accordingly.
    """
    if len(new_stops) < 2:
        raise DegeneratePattern("a pattern needs at least two stops")
    known = {s.stop_id for s in store.stops}
    for s in new_stops:
        if s not in known:
            raise UnknownStop(f"stop {s} does not exist")
    pattern = next(p for p in store.patterns if p.pattern_id == pattern_id)
    old_seq = store.pattern_stop_sequence(pattern_id)
    if list(new_stops) == old_seq:
        return report if report is not None else EditReport()
    _rebuild_pattern(store, pattern, list(new_stops))
    report = report if report is not None else EditReport()
    report.patterns_modified.append(pattern_id)
    return report


def _pattern_link_rows(store, pattern_id):
    return sorted((pl for pl in store.pattern_links
                   if pl.pattern_id == pattern_id), key=lambda pl: pl.seq)


def _delete_pattern(store, pattern_id):
    trip_ids = {t.trip_id for t in store.trips if t.pattern_id == pattern_id}
    store.trips = [t for t in store.trips if t.pattern_id != pattern_id]
    store.schedule = [r for r in store.schedule if r.trip_id not in trip_ids]
    store.pattern_links = [pl for pl in store.pattern_links
                           if pl.pattern_id != pattern_id]
    store.links = [l for l in store.links if l.pattern_id != pattern_id]
    store.patterns = [p for p in store.patterns
                      if p.pattern_id != pattern_id]


def _rebuild_pattern(store, pattern, new_seq, merge_removed=None):
    pattern_id = pattern.pattern_id
    old_seq = store.pattern_stop_sequence(pattern_id)
    links_by_id = {l.link_id: l for l in store.links}
    old_rows = _pattern_link_rows(store, pattern_id)
    old_len = {}
    for pl in old_rows:
        link = links_by_id[pl.link_id]
        old_len[(link.from_stop, link.to_stop)] = link.length

    stops = store.stops_by_id()

    def seg_length(a, b):
        if (a, b) in old_len:
            return old_len[(a, b)]
        if merge_removed is not None and (a, merge_removed) in old_len \
                and (merge_removed, b) in old_len:
            return round(old_len[(a, merge_removed)]
                         + old_len[(merge_removed, b)], 2)
        sa, sb = stops[a], stops[b]
        return round(haversine_m(sa.lat, sa.lon, sb.lat, sb.lon), 2)

    # trip retiming inputs taken before the old rows disappear
    sched = store.schedule_by_trip()
    trip_info = {}
    for t in store.trips:
        if t.pattern_id != pattern_id:
            continue
        rows = sched.get(t.trip_id, [])
        run = {}
        dwell = {}
        for i in range(len(rows) - 1):
            run[(rows[i].stop_id, rows[i + 1].stop_id)] = \
                rows[i + 1].arrival - rows[i].departure
        total_run = 0.0
        for r in rows:
            dwell.setdefault(r.stop_id, r.departure - r.arrival)
        if rows:
            total_run = rows[-1].arrival - rows[0].departure
        total_len = sum(old_len.values())
        speed = total_len / total_run if total_run > 0 else 10.0
        start = rows[0].departure if rows else 0.0
        trip_info[t.trip_id] = (run, dwell, speed, start)

    # regenerate link rows
    store.pattern_links = [pl for pl in store.pattern_links
                           if pl.pattern_id != pattern_id]
    store.links = [l for l in store.links if l.pattern_id != pattern_id]
    next_link = _next_id(store.links, "link_id")
    lengths = []
    for seq, (a, b) in enumerate(zip(new_seq, new_seq[1:])):
        length = seg_length(a, b)
        lengths.append(length)
        store.links.append(TransitLink(next_link, a, b, pattern_id, length))
        store.pattern_links.append(TransitPatternLink(pattern_id, seq,
                                                      next_link))
        next_link += 1
    pattern.link_count = len(new_seq) - 1

    # retime trips over the new sequence
    store.schedule = [r for r in store.schedule
                      if r.trip_id not in trip_info]
    for trip_id in sorted(trip_info):
        run, dwell, speed, start = trip_info[trip_id]
        t = start
        for i, stop in enumerate(new_seq):
            if i > 0:
                pair = (new_seq[i - 1], stop)
                t += run.get(pair, lengths[i - 1] / speed)
            arr = t
            dep = arr + (dwell.get(stop, 0.0) if 0 < i < len(new_seq) - 1
                         else 0.0)
            store.schedule.append(TransitScheduleRow(trip_id, i, stop, arr,
                                                     dep))
            t = dep


def update_frequencies(store, route_ids, window, multiplier=None,
                       max_headway_s=None, report=None):
    """Scale or cap headways per pattern inside a time window.

    The multiplier applies first (headway / multiplier), then the cap.  New
    departure grids align to the window start; trips outside the window are
    untouched.
    """
    start, end = window
    if end <= start:
        raise EmptyWindow(f"window [{start}, {end}) is empty")
    if multiplier is not None and multiplier <= 0:
        raise InvalidValue("frequency multiplier must be positive")
    if max_headway_s is not None and max_headway_s <= 0:
        raise InvalidValue("max headway must be positive")
    report = report if report is not None else EditReport()
    route_set = set(route_ids)
    sched = store.schedule_by_trip()
    for pattern in sorted(store.patterns, key=lambda p: p.pattern_id):
        if pattern.route_id not in route_set:
            continue
        in_window = []
        for t in store.trips:
            if t.pattern_id != pattern.pattern_id:
                continue
            rows = sched.get(t.trip_id, [])
            if rows and start <= rows[0].departure < end:
                in_window.append((rows[0].departure, t.trip_id, rows))
        if not in_window:
            continue
        in_window.sort()
        deps = [d for d, _, _ in in_window]
        if len(deps) > 1:
            headway = (deps[-1] - deps[0]) / (len(deps) - 1)
        else:
            headway = float(end - start)
        new_headway = headway
        if multiplier is not None:
            new_headway = headway / multiplier
        if max_headway_s is not None:
            new_headway = min(new_headway, float(max_headway_s))
        if multiplier is None and new_headway >= headway:
            continue  # cap not binding, leave the existing trips alone
        template = in_window[0][2]
        offsets = [(r.seq, r.stop_id, r.arrival - template[0].departure,
                    r.departure - template[0].departure) for r in template]
        # drop the windowed trips, regenerate on the new grid
        old_ids = {trip_id for _, trip_id, _ in in_window}
        store.trips = [t for t in store.trips if t.trip_id not in old_ids]
        store.schedule = [r for r in store.schedule
                          if r.trip_id not in old_ids]
        report.trips_removed += len(old_ids)
        next_trip = _next_id(store.trips, "trip_id")
        dep = float(start)
        while dep < end:
            store.trips.append(TransitTrip(next_trip,
                                           f"p{pattern.pattern_id}f{next_trip}",
                                           pattern.pattern_id))
            for seq, stop, da, dd in offsets:
                store.schedule.append(TransitScheduleRow(
                    next_trip, seq, stop, dep + da, dep + dd))
            report.trips_added += 1
            next_trip += 1
            dep += new_headway
    return report


def update_speeds(store, route_ids, multiplier, caps=None):
    """Divide segment run times by the multiplier, keep dwells, re-repair."""
    if multiplier <= 0:
        raise InvalidValue("speed multiplier must be positive")
    route_set = set(route_ids)
    pattern_ids = {p.pattern_id for p in store.patterns
                   if p.route_id in route_set}
    trip_ids = {t.trip_id for t in store.trips if t.pattern_id in pattern_ids}
    sched = store.schedule_by_trip()
    for trip_id in sorted(trip_ids):
        rows = sched.get(trip_id, [])
        if not rows:
            continue
        new_times = [(rows[0].arrival, rows[0].departure)]
        t = rows[0].departure
        for i in range(1, len(rows)):
            run = (rows[i].arrival - rows[i - 1].departure) / multiplier
            dwell = rows[i].departure - rows[i].arrival
            arr = t + run
            dep = arr + dwell
            new_times.append((arr, dep))
            t = dep
        for row, (arr, dep) in zip(rows, new_times):
            row.arrival = arr
            row.departure = dep
    return repair_speeds(store, caps)


@dataclass
class TimetableSpec:
    first_departure_s: float
    last_departure_s: float
    headway_s: float
    speed_m_s: float


def create_route(store, agency_id, name, mode, stop_ids, spec, brt_links=None,
                 graph=None):
    """New route with one pattern and a synthesized timetable.

    brt_links lists driving link ids to dedicate to this route; they are
    flagged on the graph (if given) and skipped by general-traffic routing.
    """
    if len(stop_ids) < 2:
        raise InvalidTimetable("a route needs at least two stops")
    if spec.headway_s <= 0 or spec.speed_m_s <= 0 \
            or spec.last_departure_s < spec.first_departure_s:
        raise InvalidTimetable("bad timetable spec")
    known = store.stops_by_id()
    for s in stop_ids:
        if s not in known:
            raise UnknownStop(f"stop {s} does not exist")
    route_id = _next_id(store.routes, "route_id")
    store.routes.append(TransitRoute(route_id, name, agency_id,
                                     MODE_ROUTE_TYPE.get(mode, 3), mode))
    pattern_id = _next_id(store.patterns, "pattern_id")
    store.patterns.append(TransitPattern(pattern_id, route_id,
                                         len(stop_ids) - 1))
    next_link = _next_id(store.links, "link_id")
    lengths = []
    for seq, (a, b) in enumerate(zip(stop_ids, stop_ids[1:])):
        sa, sb = known[a], known[b]
        length = round(haversine_m(sa.lat, sa.lon, sb.lat, sb.lon), 2)
        lengths.append(length)
        store.links.append(TransitLink(next_link, a, b, pattern_id, length))
        store.pattern_links.append(TransitPatternLink(pattern_id, seq,
                                                      next_link))
        next_link += 1
    next_trip = _next_id(store.trips, "trip_id")
    n_trips = 0
    dep = spec.first_departure_s
    while dep <= spec.last_departure_s + 1e-9:
        store.trips.append(TransitTrip(next_trip, f"r{route_id}t{n_trips}",
                                       pattern_id))
        t = dep
        for seq, stop in enumerate(stop_ids):
            if seq > 0:
                t += lengths[seq - 1] / spec.speed_m_s
            store.schedule.append(TransitScheduleRow(next_trip, seq, stop,
                                                     t, t))
        next_trip += 1
        n_trips += 1
        dep += spec.headway_s
    if brt_links and graph is not None:
        for lid in brt_links:
            graph.links[lid].dedicated_to = route_id
    return route_id, pattern_id, n_trips


# -- line-oriented edit scripts --

def _kv(parts):
    out = {}
    for p in parts:
        if "=" not in p:
            raise InvalidValue(f"expected key=value, got {p!r}")
        k, v = p.split("=", 1)
        out[k] = v
    return out


def _ids(v):
    return [int(x) for x in v.split(",") if x != ""]


def apply_script(store, text, graph=None):
    """Run an edits file: one command per line, '#' for comments.

    Commands mirror the programmatic operations:
      add_stop lat=.. lon=.. name=..
      remove_stop stop=..
      modify_pattern pattern=.. stops=1,2,3
      update_frequencies routes=.. window=start-end [multiplier=..] [max_headway=..]
      update_speeds routes=.. multiplier=..
      create_route agency=.. name=.. mode=.. stops=.. first=.. last=..
                   headway=.. speed=.. [brt=..]
    """
    report = EditReport()
    with EditTransaction(store):
        for ln, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = shlex.split(line)
            cmd, args = parts[0], _kv(parts[1:])
            if cmd == "add_stop":
                add_stop(store, float(args["lat"]), float(args["lon"]),
                         args.get("name", ""), report=report)
            elif cmd == "remove_stop":
                remove_stop(store, int(args["stop"]), report=report)
            elif cmd == "modify_pattern":
                modify_pattern(store, int(args["pattern"]),
                               _ids(args["stops"]), report=report)
            elif cmd == "update_frequencies":
                lo, hi = args["window"].split("-")
                update_frequencies(
                    store, _ids(args["routes"]), (float(lo), float(hi)),
                    multiplier=(float(args["multiplier"])
                                if "multiplier" in args else None),
                    max_headway_s=(float(args["max_headway"])
                                   if "max_headway" in args else None),
                    report=report)
            elif cmd == "update_speeds":
                update_speeds(store, _ids(args["routes"]),
                              float(args["multiplier"]))
            elif cmd == "create_route":
                spec = TimetableSpec(float(args["first"]), float(args["last"]),
                                     float(args["headway"]),
                                     float(args["speed"]))
                create_route(store, int(args.get("agency", 0)), args["name"],
                             args.get("mode", "bus"), _ids(args["stops"]),
                             spec, brt_links=_ids(args.get("brt", "")),
                             graph=graph)
            else:
                raise InvalidValue(f"line {ln}: unknown command {cmd!r}")
    return report
