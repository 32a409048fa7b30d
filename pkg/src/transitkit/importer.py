"""End-to-end GTFS import: parse, validate, extract, repair, build the store."""

from dataclasses import dataclass, field

from . import gtfs
from .errors import ValidationFailed
from .patterns import SpeedCapTable, build_pattern_links, extract_patterns, repair_speeds
from .store import (NetworkStore, PatternMappingRow, TransitAgency, TransitFare,
                    TransitLink, TransitPattern, TransitPatternLink, TransitRoute,
                    TransitScheduleRow, TransitStop, TransitTrip)


@dataclass
class ImportReport:
    issues: list = field(default_factory=list)
    speed_repairs: list = field(default_factory=list)
    active_trip_count: int = 0
    pattern_count: int = 0


def import_feeds(feed_dirs, service_date, caps=None, strict=False):
    """Import one or more GTFS directories into a NetworkStore.

    Agencies across feeds receive dense integer ids in feed order.  Fatal
    validation issues (and warnings, under strict) abort with ValidationFailed.
    """
    caps = caps or SpeedCapTable()
    store = NetworkStore()
    report = ImportReport()

    feeds = [gtfs.parse_feed(d) for d in feed_dirs]
    for feed in feeds:
        issues = gtfs.validate_feed(feed)
        report.issues.extend(issues)
        blocking = [i for i in issues
                    if i.severity == "fatal" or (strict and i.severity == "warning")]
        if blocking:
            raise ValidationFailed(
                "; ".join(f"{i.code}: {i.message}" for i in blocking[:10]))

    next_stop = 0
    next_route = 0
    next_pattern = 0
    next_link = 0
    next_trip = 0
    next_fare = 0

    for feed in feeds:
        agency_ids = {}
        for a in feed.agencies:
            aid = len(store.agencies)
            agency_ids[a.source_id] = aid
            store.agencies.append(TransitAgency(aid, a.source_id, a.name))
        default_agency = next(iter(agency_ids.values())) if agency_ids else 0

        stop_ids = {}
        stop_coords = {}
        for s in feed.stops:
            stop_ids[s.id] = next_stop
            stop_coords[s.id] = (s.lat, s.lon)
            store.stops.append(TransitStop(next_stop, s.id, s.name,
                                           default_agency, s.lat, s.lon))
            next_stop += 1

        route_ids = {}
        for r in feed.routes:
            route_ids[r.id] = next_route
            store.routes.append(TransitRoute(
                next_route, r.id, agency_ids.get(r.agency, default_agency),
                r.type, gtfs.ROUTE_TYPE_MODE.get(r.type, "bus")))
            next_route += 1

        active = gtfs.select_active_trips(feed, service_date)
        report.active_trip_count += len(active)

        patterns, trip_to_pattern = extract_patterns(feed, active)
        pattern_ids = {}
        for idx, p in enumerate(patterns):
            pid = next_pattern + idx
            pattern_ids[idx] = pid
            store.patterns.append(TransitPattern(pid, route_ids[p.route],
                                                 p.link_count))
            seg = build_pattern_links([stop_ids[s] for s in p.stops],
                                      {stop_ids[s]: stop_coords[s] for s in p.stops})
            for seq, (frm, to, length) in enumerate(seg):
                store.links.append(TransitLink(next_link, frm, to, pid, length))
                store.pattern_links.append(TransitPatternLink(pid, seq, next_link))
                next_link += 1
        next_pattern += len(patterns)
        report.pattern_count += len(patterns)

        by_trip = feed.stop_times_by_trip()
        for trip in feed.trips:
            if trip.id not in trip_to_pattern:
                continue
            tid = next_trip
            next_trip += 1
            store.trips.append(TransitTrip(tid, trip.id,
                                           pattern_ids[trip_to_pattern[trip.id]]))
            for seq, st in enumerate(by_trip[trip.id]):
                store.schedule.append(TransitScheduleRow(
                    tid, seq, stop_ids[st.stop], float(st.arrival),
                    float(st.departure)))

        # flat fare per agency; first declared fare wins, transfer window from
        # the GTFS transfer_duration when transfers are allowed
        seen_agencies = set()
        for fa in feed.fare_attributes:
            aid = agency_ids.get(fa.agency, default_agency)
            if aid in seen_agencies:
                continue
            seen_agencies.add(aid)
            discount = 1.0 if (fa.transfers is None or fa.transfers > 0) else 0.0
            store.fares.append(TransitFare(
                next_fare, aid, fa.price, discount, fa.transfer_duration or 0))
            next_fare += 1

    report.speed_repairs = repair_speeds(store, caps)
    store.check_consistency()
    return store, report
