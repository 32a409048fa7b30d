"""Normalized transit network store: row types, CSV persistence, consistency checks."""

import csv
import os
from dataclasses import dataclass, field, fields

from .errors import CountMismatch, ForeignKeyViolation, NotAStore


@dataclass
class TransitAgency:
    agency_id: int
    agency: str  # original GTFS id
    name: str


@dataclass
class TransitStop:
    stop_id: int
    stop: str
    name: str
    agency_id: int
    lat: float
    lon: float


@dataclass
class TransitRoute:
    route_id: int
    route: str
    agency_id: int
    type: int
    mode: str


@dataclass
class TransitPattern:
    pattern_id: int
    route_id: int
    link_count: int


@dataclass
class TransitPatternLink:
    pattern_id: int
    seq: int
    link_id: int


@dataclass
class TransitLink:
    link_id: int
    from_stop: int
    to_stop: int
    pattern_id: int
    length: float  # meters, 2 decimals


@dataclass
class TransitTrip:
    trip_id: int
    trip: str
    pattern_id: int


@dataclass
class TransitScheduleRow:
    trip_id: int
    seq: int
    stop_id: int
    # seconds after midnight; fractional only after speed repair
    arrival: float
    departure: float


@dataclass
class TransitFare:
    fare_id: int
    agency_id: int
    price: float
    transfer_discount: float
    transfer_window_s: int


@dataclass
class PatternMappingRow:
    pattern_id: int
    seq: int
    driving_link: int
    offset: float


@dataclass
class AccessLinkRow:
    from_node: int
    to_node: int
    length: float


TABLES = {
    "transit_agencies": TransitAgency,
    "transit_stops": TransitStop,
    "transit_routes": TransitRoute,
    "transit_patterns": TransitPattern,
    "transit_pattern_links": TransitPatternLink,
    "transit_links": TransitLink,
    "transit_trips": TransitTrip,
    "transit_trips_schedule": TransitScheduleRow,
    "transit_fares": TransitFare,
    "transit_pattern_mapping": PatternMappingRow,
    "transit_walk": AccessLinkRow,
    "transit_bike": AccessLinkRow,
}

ATTRS = {
    "transit_agencies": "agencies",
    "transit_stops": "stops",
    "transit_routes": "routes",
    "transit_patterns": "patterns",
    "transit_pattern_links": "pattern_links",
    "transit_links": "links",
    "transit_trips": "trips",
    "transit_trips_schedule": "schedule",
    "transit_fares": "fares",
    "transit_pattern_mapping": "pattern_mapping",
    "transit_walk": "walk_access",
    "transit_bike": "bike_access",
}


@dataclass
class NetworkStore:
    agencies: list = field(default_factory=list)
    stops: list = field(default_factory=list)
    routes: list = field(default_factory=list)
    patterns: list = field(default_factory=list)
    pattern_links: list = field(default_factory=list)
    links: list = field(default_factory=list)
    trips: list = field(default_factory=list)
    schedule: list = field(default_factory=list)
    fares: list = field(default_factory=list)
    pattern_mapping: list = field(default_factory=list)
    walk_access: list = field(default_factory=list)
    bike_access: list = field(default_factory=list)

    # -- convenience indexes (rebuilt on demand, not persisted) --

    def stops_by_id(self):
        return {s.stop_id: s for s in self.stops}

    def pattern_stop_sequence(self, pattern_id):
        """Ordered stop ids of a pattern, derived from its link sequence."""
        links_by_id = {l.link_id: l for l in self.links}
        rows = sorted((pl for pl in self.pattern_links if pl.pattern_id == pattern_id),
                      key=lambda pl: pl.seq)
        if not rows:
            return []
        seq = [links_by_id[rows[0].link_id].from_stop]
        for pl in rows:
            seq.append(links_by_id[pl.link_id].to_stop)
        return seq

    def schedule_by_trip(self):
        by_trip = {}
        for row in self.schedule:
            by_trip.setdefault(row.trip_id, []).append(row)
        for rows in by_trip.values():
            rows.sort(key=lambda r: r.seq)
        return by_trip

    def check_consistency(self):
        """Foreign keys plus the links/schedule row-count rule."""
        agency_ids = {a.agency_id for a in self.agencies}
        stop_ids = {s.stop_id for s in self.stops}
        route_ids = {r.route_id for r in self.routes}
        pattern_ids = {p.pattern_id for p in self.patterns}
        link_ids = {l.link_id for l in self.links}

        for s in self.stops:
            if s.agency_id not in agency_ids:
                raise ForeignKeyViolation(f"stop {s.stop_id}: unknown agency")
        for r in self.routes:
            if r.agency_id not in agency_ids:
                raise ForeignKeyViolation(f"route {r.route_id}: unknown agency")
        for p in self.patterns:
            if p.route_id not in route_ids:
                raise ForeignKeyViolation(f"pattern {p.pattern_id}: unknown route")
        for l in self.links:
            if l.pattern_id not in pattern_ids:
                raise ForeignKeyViolation(f"link {l.link_id}: unknown pattern")
            if l.from_stop not in stop_ids or l.to_stop not in stop_ids:
                raise ForeignKeyViolation(f"link {l.link_id}: unknown stop")
        for pl in self.pattern_links:
            if pl.pattern_id not in pattern_ids or pl.link_id not in link_ids:
                raise ForeignKeyViolation(
                    f"pattern link ({pl.pattern_id},{pl.seq}): bad reference")
        for t in self.trips:
            if t.pattern_id not in pattern_ids:
                raise ForeignKeyViolation(f"trip {t.trip_id}: unknown pattern")

        link_counts = {}
        for pl in self.pattern_links:
            link_counts[pl.pattern_id] = link_counts.get(pl.pattern_id, 0) + 1
        for p in self.patterns:
            if link_counts.get(p.pattern_id, 0) != p.link_count:
                raise CountMismatch(
                    f"pattern {p.pattern_id}: declared {p.link_count} links, "
                    f"found {link_counts.get(p.pattern_id, 0)}")

        sched = self.schedule_by_trip()
        for t in self.trips:
            k = link_counts.get(t.pattern_id, 0)
            rows = sched.get(t.trip_id, [])
            if len(rows) != k + 1:
                raise CountMismatch(
                    f"trip {t.trip_id}: {len(rows)} schedule rows for a "
                    f"{k}-link pattern (expected {k + 1})")


def _format(name, value):
    if name in ("length", "offset"):
        return f"{value:.2f}"
    if name in ("arrival", "departure") and isinstance(value, float):
        # GTFS times are whole seconds; fractional values appear only after
        # speed repair and must round-trip exactly
        return str(int(value)) if value.is_integer() else repr(value)
    return str(value)


def persist_network(store, path):
    """Write the store as a directory of headered CSV tables.

    Consistency is checked first; load(persist(x)) == x.
    """
    store.check_consistency()
    os.makedirs(path, exist_ok=True)
    for table, rowtype in TABLES.items():
        rows = getattr(store, ATTRS[table])
        cols = [f.name for f in fields(rowtype)]
        with open(os.path.join(path, table + ".csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for row in rows:
                w.writerow(_format(c, getattr(row, c)) for c in cols)


def load_network(path):
    """Load a store directory written by persist_network; re-runs all checks."""
    if not os.path.isdir(path):
        raise NotAStore(f"{path} is not a store directory")
    store = NetworkStore()
    for table, rowtype in TABLES.items():
        fpath = os.path.join(path, table + ".csv")
        if not os.path.exists(fpath):
            raise NotAStore(f"{path} is missing table {table}")
        ftypes = {f.name: f.type for f in fields(rowtype)}
        # dataclass field types may be strings under future annotations; map by name
        rows = getattr(store, ATTRS[table])
        with open(fpath, newline="") as fh:
            reader = csv.DictReader(fh)
            for rec in reader:
                kwargs = {}
                for f in fields(rowtype):
                    raw = rec[f.name]
                    if f.type in (int, "int"):
                        kwargs[f.name] = int(raw)
                    elif f.type in (float, "float"):
                        kwargs[f.name] = float(raw)
                    else:
                        kwargs[f.name] = raw
                rows.append(rowtype(**kwargs))
    store.check_consistency()
    return store
