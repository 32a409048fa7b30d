"""Pattern extraction, link generation, and schedule speed repair."""

from dataclasses import dataclass, field

from .errors import DegeneratePattern, DegenerateTrip
from .geo import haversine_m


@dataclass(frozen=True)
class PatternDef:
    """A unique (route, ordered stop sequence) discovered from trips."""
    route: str
    stops: tuple

    @property
    def link_count(self):
        return len(self.stops) - 1


def extract_patterns(feed, active_trips):
    """Detect the unique stop sequence of every active trip, grouped by route.

    Returns (patterns, trip_to_pattern) where trip_to_pattern maps every active
    trip id to an index into patterns.  Pattern order follows first appearance
    (trips in feed order), which keeps ids stable across re-imports.
    """
    by_trip = feed.stop_times_by_trip()
    route_of = {t.id: t.route for t in feed.trips}

    patterns = []
    index = {}
    trip_to_pattern = {}
    for trip in feed.trips:
        if trip.id not in active_trips:
            continue
        rows = by_trip.get(trip.id, [])
        if len(rows) < 2:
            raise DegenerateTrip(f"trip {trip.id} has fewer than 2 stops")
        key = (route_of[trip.id], tuple(st.stop for st in rows))
        if key not in index:
            index[key] = len(patterns)
            patterns.append(PatternDef(route=key[0], stops=key[1]))
        trip_to_pattern[trip.id] = index[key]
    return patterns, trip_to_pattern


def build_pattern_links(pattern_stops, stop_coords):
    """Link lengths (meters, 2 decimals) between consecutive pattern stops.

    pattern_stops: ordered stop ids; stop_coords: stop id -> (lat, lon).
    Returns [(from_stop, to_stop, length), ...], one per consecutive pair.
    """
    if len(pattern_stops) < 2:
        raise DegeneratePattern("pattern needs at least 2 stops")
    out = []
    for a, b in zip(pattern_stops, pattern_stops[1:]):
        la, lo = stop_coords[a]
        lb, lb2 = stop_coords[b]
        out.append((a, b, round(haversine_m(la, lo, lb, lb2), 2)))
    return out


DEFAULT_SPEED_CAPS = {
    # mode -> (cap below 400 m, cap at/above 400 m), in m/s.  Placeholder
    # values; real deployments should calibrate from local schedule data.
    "bus": (15.0, 25.0),
    "trolleybus": (15.0, 25.0),
    "metro": (20.0, 30.0),
    "rail": (25.0, 40.0),
}

FALLBACK_CAP = (20.0, 30.0)
SHORT_SEGMENT_M = 400.0


@dataclass
class SpeedCapTable:
    caps: dict = field(default_factory=lambda: dict(DEFAULT_SPEED_CAPS))
    band_threshold_m: float = SHORT_SEGMENT_M

    def __post_init__(self):
        for mode, (short, long) in self.caps.items():
            if short <= 0 or long <= 0:
                raise ValueError(f"non-positive speed cap for {mode}")
            if long < short:
                raise ValueError(f"caps must be non-decreasing in length band "
                                 f"({mode}: {short} > {long})")

    def cap(self, mode, length_m):
        short, long = self.caps.get(mode, FALLBACK_CAP)
        return short if length_m < self.band_threshold_m else long

    @classmethod
    def from_csv(cls, path):
        import csv
        caps = {}
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                caps[row["mode"].strip()] = (float(row["short_cap"]),
                                             float(row["long_cap"]))
        return cls(caps=caps)


@dataclass
class SpeedRepair:
    trip_id: int
    seq: int  # schedule row index of the delayed arrival
    length_m: float
    before_arrival: float
    after_arrival: float


def repair_segment_times(times, lengths, caps):
    """Core repair rule on one trip.

    times: list of [arrival, departure] per stop (mutated copy returned);
    lengths: segment lengths (len(times) - 1); caps: max speed per segment.
    Whenever a segment's implied speed exceeds its cap (or its scheduled time
    is non-positive), the next arrival is delayed to length/cap and the delay
    propagates to every later arrival and departure.

    Returns (repaired_times, adjustments) with adjustments as
    [(segment_index, before_arrival, after_arrival), ...].
    """
    out = [list(t) for t in times]
    adjustments = []
    shift = 0.0
    for i, (length, cap) in enumerate(zip(lengths, caps)):
        out[i + 1][0] += shift
        out[i + 1][1] += shift
        dep_prev = out[i][1]
        arr_next = out[i + 1][0]
        seg_time = arr_next - dep_prev
        if length > 0 and (seg_time <= 0 or length / seg_time > cap + 1e-12):
            new_arr = dep_prev + length / cap
            adjustments.append((i, arr_next, new_arr))
            delay = new_arr - arr_next
            shift += delay
            out[i + 1][0] += delay
            out[i + 1][1] += delay
    return out, adjustments


def repair_speeds(store, caps=None):
    """Enforce mode/length speed caps on every trip schedule in the store.

    Mutates the schedule rows in place; returns a list of SpeedRepair records.
    """
    caps = caps or SpeedCapTable()
    mode_of_route = {r.route_id: r.mode for r in store.routes}
    pattern_route = {p.pattern_id: p.route_id for p in store.patterns}
    links_by_id = {l.link_id: l for l in store.links}
    pattern_link_rows = {}
    for pl in sorted(store.pattern_links, key=lambda pl: (pl.pattern_id, pl.seq)):
        pattern_link_rows.setdefault(pl.pattern_id, []).append(links_by_id[pl.link_id])

    sched = store.schedule_by_trip()
    report = []
    for trip in store.trips:
        seg_links = pattern_link_rows.get(trip.pattern_id, [])
        rows = sched.get(trip.trip_id, [])
        if len(rows) != len(seg_links) + 1:
            continue  # count check handled by persist; nothing sane to repair
        mode = mode_of_route.get(pattern_route.get(trip.pattern_id), "")
        times = [[r.arrival, r.departure] for r in rows]
        lengths = [l.length for l in seg_links]
        seg_caps = [caps.cap(mode, l.length) for l in seg_links]
        repaired, adjustments = repair_segment_times(times, lengths, seg_caps)
        if not adjustments:
            continue
        for i, before, after in adjustments:
            report.append(SpeedRepair(trip.trip_id, i + 1, lengths[i],
                                      before, after))
        for row, (arr, dep) in zip(rows, repaired):
            row.arrival = arr
            row.departure = dep
    return report
