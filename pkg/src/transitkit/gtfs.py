"""GTFS feed parsing, validation, and service-calendar evaluation."""

import csv
import datetime
import os
from dataclasses import dataclass, field

from .errors import MalformedRow, MissingFile, NoServiceData

REQUIRED_TABLES = ("agency", "stops", "routes", "trips", "stop_times")

# Route types from the GTFS standard (basic set plus the 2019 extensions
# that commonly appear in production feeds).
STANDARD_ROUTE_TYPES = {0, 1, 2, 3, 4, 5, 6, 7, 11, 12}

ROUTE_TYPE_MODE = {
    0: "tram",
    1: "metro",
    2: "rail",
    3: "bus",
    4: "ferry",
    5: "cable_car",
    6: "gondola",
    7: "funicular",
    11: "trolleybus",
    12: "monorail",
}

# Modes that run on the congestable driving network (mixed traffic capable).
MIXED_TRAFFIC_MODES = {"bus", "trolleybus"}


@dataclass
class AgencyRec:
    source_id: str
    name: str


@dataclass
class StopRec:
    id: str
    name: str
    lat: float
    lon: float


@dataclass
class RouteRec:
    id: str
    type: int
    agency: str


@dataclass
class TripRec:
    id: str
    route: str
    service: str
    shape: str = ""


@dataclass
class StopTimeRec:
    trip: str
    stop: str
    arrival: int
    departure: int
    seq: int


@dataclass
class CalendarRec:
    service: str
    weekdays: tuple  # monday..sunday flags
    start: datetime.date
    end: datetime.date


@dataclass
class CalendarDateRec:
    service: str
    date: datetime.date
    exception: int  # 1 = added, 2 = removed


@dataclass
class FareAttrRec:
    fare_id: str
    price: float
    currency: str
    transfers: int | None
    transfer_duration: int | None
    agency: str = ""


@dataclass
class FareRuleRec:
    fare_id: str
    route: str


@dataclass
class ValidationIssue:
    severity: str  # "fatal" | "warning"
    code: str
    message: str
    entity: str = ""


@dataclass
class RawFeed:
    agencies: list = field(default_factory=list)
    stops: list = field(default_factory=list)
    routes: list = field(default_factory=list)
    trips: list = field(default_factory=list)
    stop_times: list = field(default_factory=list)
    calendars: list = field(default_factory=list)
    calendar_dates: list = field(default_factory=list)
    fare_attributes: list = field(default_factory=list)
    fare_rules: list = field(default_factory=list)

    def stop_times_by_trip(self):
        by_trip = {}
        for st in self.stop_times:
            by_trip.setdefault(st.trip, []).append(st)
        for rows in by_trip.values():
            rows.sort(key=lambda r: r.seq)
        return by_trip


def parse_time_s(text, table, line_no):
    """Parse HH:MM:SS into seconds after midnight; values past 24:00 kept."""
    parts = text.strip().split(":")
    if len(parts) != 3:
        raise MalformedRow(f"{table} line {line_no}: bad time {text!r}")
    try:
        h, m, s = (int(p) for p in parts)
    except ValueError:
        raise MalformedRow(f"{table} line {line_no}: bad time {text!r}")
    if m >= 60 or s >= 60 or h < 0 or m < 0 or s < 0:
        raise MalformedRow(f"{table} line {line_no}: bad time {text!r}")
    return h * 3600 + m * 60 + s


def parse_date(text):
    return datetime.datetime.strptime(text.strip(), "%Y%m%d").date()


def _read_table(feed_dir, name, required):
    path = os.path.join(feed_dir, name + ".txt")
    if not os.path.exists(path):
        if required:
            raise MissingFile(f"required GTFS table {name}.txt missing in {feed_dir}")
        return None
    with open(path, newline="", encoding="utf-8-sig") as fh:
        return list(csv.DictReader(fh))


def _f(row, key, default=""):
    v = row.get(key)
    return default if v is None else v.strip()


def parse_feed(feed_dir):
    """Parse one GTFS directory into a RawFeed.

    Raises MissingFile when a required table (or any service data) is absent,
    MalformedRow on unparseable values.  frequencies.txt, when present, is
    expanded into explicit trips at headway boundaries.
    """
    for name in REQUIRED_TABLES:
        _read_table(feed_dir, name, required=True)

    feed = RawFeed()

    for row in _read_table(feed_dir, "agency", True):
        feed.agencies.append(AgencyRec(
            source_id=_f(row, "agency_id") or _f(row, "agency_name"),
            name=_f(row, "agency_name"),
        ))

    for i, row in enumerate(_read_table(feed_dir, "stops", True), start=2):
        try:
            lat = float(_f(row, "stop_lat"))
            lon = float(_f(row, "stop_lon"))
        except ValueError:
            raise MalformedRow(f"stops line {i}: bad coordinates")
        feed.stops.append(StopRec(_f(row, "stop_id"), _f(row, "stop_name"), lat, lon))

    default_agency = feed.agencies[0].source_id if feed.agencies else ""
    for i, row in enumerate(_read_table(feed_dir, "routes", True), start=2):
        try:
            rtype = int(_f(row, "route_type"))
        except ValueError:
            raise MalformedRow(f"routes line {i}: bad route_type")
        feed.routes.append(RouteRec(
            _f(row, "route_id"), rtype, _f(row, "agency_id") or default_agency))

    for row in _read_table(feed_dir, "trips", True):
        feed.trips.append(TripRec(
            _f(row, "trip_id"), _f(row, "route_id"),
            _f(row, "service_id"), _f(row, "shape_id")))

    for i, row in enumerate(_read_table(feed_dir, "stop_times", True), start=2):
        try:
            seq = int(_f(row, "stop_sequence"))
        except ValueError:
            raise MalformedRow(f"stop_times line {i}: bad stop_sequence")
        feed.stop_times.append(StopTimeRec(
            trip=_f(row, "trip_id"),
            stop=_f(row, "stop_id"),
            arrival=parse_time_s(_f(row, "arrival_time") or _f(row, "departure_time"),
                                 "stop_times", i),
            departure=parse_time_s(_f(row, "departure_time") or _f(row, "arrival_time"),
                                   "stop_times", i),
            seq=seq,
        ))

    cal = _read_table(feed_dir, "calendar", False)
    if cal:
        days = ("monday", "tuesday", "wednesday", "thursday", "friday",
                "saturday", "sunday")
        for i, row in enumerate(cal, start=2):
            try:
                flags = tuple(int(_f(row, d) or "0") for d in days)
                feed.calendars.append(CalendarRec(
                    _f(row, "service_id"), flags,
                    parse_date(_f(row, "start_date")),
                    parse_date(_f(row, "end_date"))))
            except ValueError:
                raise MalformedRow(f"calendar line {i}: bad row")

    cdates = _read_table(feed_dir, "calendar_dates", False)
    if cdates:
        for i, row in enumerate(cdates, start=2):
            try:
                feed.calendar_dates.append(CalendarDateRec(
                    _f(row, "service_id"),
                    parse_date(_f(row, "date")),
                    int(_f(row, "exception_type"))))
            except ValueError:
                raise MalformedRow(f"calendar_dates line {i}: bad row")

    fattr = _read_table(feed_dir, "fare_attributes", False)
    if fattr:
        for row in fattr:
            transfers = _f(row, "transfers")
            duration = _f(row, "transfer_duration")
            feed.fare_attributes.append(FareAttrRec(
                fare_id=_f(row, "fare_id"),
                price=float(_f(row, "price") or "0"),
                currency=_f(row, "currency_type") or "USD",
                transfers=int(transfers) if transfers else None,
                transfer_duration=int(duration) if duration else None,
                agency=_f(row, "agency_id") or default_agency,
            ))
    frules = _read_table(feed_dir, "fare_rules", False)
    if frules:
        for row in frules:
            feed.fare_rules.append(FareRuleRec(_f(row, "fare_id"), _f(row, "route_id")))

    freqs = _read_table(feed_dir, "frequencies", False)
    if freqs:
        _expand_frequencies(feed, freqs)

    return feed


def _expand_frequencies(feed, freq_rows):
    """Replace frequency-template trips by explicit clones at headway boundaries."""
    by_trip = feed.stop_times_by_trip()
    trips_by_id = {t.id: t for t in feed.trips}
    templates = set()
    new_trips = []
    new_stop_times = []
    for i, row in enumerate(freq_rows, start=2):
        trip_id = _f(row, "trip_id")
        if trip_id not in trips_by_id or trip_id not in by_trip:
            raise MalformedRow(f"frequencies line {i}: unknown trip {trip_id!r}")
        start = parse_time_s(_f(row, "start_time"), "frequencies", i)
        end = parse_time_s(_f(row, "end_time"), "frequencies", i)
        headway = int(_f(row, "headway_secs"))
        if headway <= 0:
            raise MalformedRow(f"frequencies line {i}: non-positive headway")
        templates.add(trip_id)
        template = trips_by_id[trip_id]
        rows = by_trip[trip_id]
        base = rows[0].departure
        k = 0
        dep = start
        while dep < end:
            clone_id = f"{trip_id}#{dep}"
            new_trips.append(TripRec(clone_id, template.route, template.service,
                                     template.shape))
            shift = dep - base
            for st in rows:
                new_stop_times.append(StopTimeRec(
                    clone_id, st.stop, st.arrival + shift, st.departure + shift,
                    st.seq))
            k += 1
            dep = start + k * headway

    feed.trips = [t for t in feed.trips if t.id not in templates] + new_trips
    feed.stop_times = ([st for st in feed.stop_times if st.trip not in templates]
                       + new_stop_times)


def validate_feed(feed):
    """Consistency checks; returns a list of ValidationIssue (fatal + warning)."""
    issues = []
    route_ids = {r.id for r in feed.routes}
    stop_ids = {s.id for s in feed.stops}
    trip_ids = {t.id for t in feed.trips}

    for t in feed.trips:
        if t.route not in route_ids:
            issues.append(ValidationIssue(
                "fatal", "orphan-trip",
                f"trip {t.id} references missing route {t.route}", t.id))
    for r in feed.routes:
        if r.type not in STANDARD_ROUTE_TYPES:
            issues.append(ValidationIssue(
                "fatal", "unknown-route-type",
                f"route {r.id} has non-standard type {r.type}", r.id))
    for st in feed.stop_times:
        if st.trip not in trip_ids:
            issues.append(ValidationIssue(
                "fatal", "orphan-stop-time",
                f"stop_time references missing trip {st.trip}", st.trip))
        elif st.stop not in stop_ids:
            issues.append(ValidationIssue(
                "fatal", "orphan-stop-time",
                f"stop_time of trip {st.trip} references missing stop {st.stop}",
                st.trip))

    seen_pos = {}
    for s in feed.stops:
        key = (round(s.lat, 6), round(s.lon, 6))
        if key in seen_pos:
            issues.append(ValidationIssue(
                "warning", "duplicate-stop",
                f"stop {s.id} duplicates position of stop {seen_pos[key]}", s.id))
        else:
            seen_pos[key] = s.id

    stops_by_id = {s.id: s for s in feed.stops}
    for trip, rows in feed.stop_times_by_trip().items():
        for a, b in zip(rows, rows[1:]):
            sa, sb = stops_by_id.get(a.stop), stops_by_id.get(b.stop)
            if sa and sb and (sa.lat, sa.lon) == (sb.lat, sb.lon):
                issues.append(ValidationIssue(
                    "warning", "zero-length-segment",
                    f"trip {trip} has a zero-length segment at {a.stop}->{b.stop}",
                    trip))
    return issues


def select_active_trips(feed, service_date):
    """Trip ids active on service_date per calendar + calendar_dates rules."""
    if not feed.calendars and not feed.calendar_dates:
        raise NoServiceData("feed has neither calendar nor calendar_dates")

    active_services = set()
    weekday = service_date.weekday()  # 0 = Monday, matches GTFS column order
    for cal in feed.calendars:
        if cal.start <= service_date <= cal.end and cal.weekdays[weekday]:
            active_services.add(cal.service)
    for cd in feed.calendar_dates:
        if cd.date == service_date:
            if cd.exception == 1:
                active_services.add(cd.service)
            elif cd.exception == 2:
                active_services.discard(cd.service)

    return {t.id for t in feed.trips if t.service in active_services}
