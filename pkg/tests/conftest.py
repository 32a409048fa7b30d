import csv
import os

import pytest


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def write_gtfs(feed_dir, stops, routes, trips, stop_times,
               calendar=None, calendar_dates=None, agency=None,
               frequencies=None, fare_attributes=None, omit=()):
    """Write a GTFS directory from plain tuples.

    stops: (id, name, lat, lon); routes: (id, type, agency); trips:
    (id, route, service); stop_times: (trip, arr, dep, stop, seq);
    calendar: (service, mon..sun, start, end).
    """
    os.makedirs(feed_dir, exist_ok=True)
    agency = agency or [("A1", "Agency One")]
    if "agency" not in omit:
        write_csv(os.path.join(feed_dir, "agency.txt"),
                  ["agency_id", "agency_name", "agency_url", "agency_timezone"],
                  [(a[0], a[1], "http://x", "America/Chicago") for a in agency])
    if "stops" not in omit:
        write_csv(os.path.join(feed_dir, "stops.txt"),
                  ["stop_id", "stop_name", "stop_lat", "stop_lon"], stops)
    if "routes" not in omit:
        write_csv(os.path.join(feed_dir, "routes.txt"),
                  ["route_id", "route_type", "agency_id"], routes)
    if "trips" not in omit:
        write_csv(os.path.join(feed_dir, "trips.txt"),
                  ["trip_id", "route_id", "service_id"], trips)
    if "stop_times" not in omit:
        write_csv(os.path.join(feed_dir, "stop_times.txt"),
                  ["trip_id", "arrival_time", "departure_time", "stop_id",
                   "stop_sequence"], stop_times)
    if calendar is not None and "calendar" not in omit:
        write_csv(os.path.join(feed_dir, "calendar.txt"),
                  ["service_id", "monday", "tuesday", "wednesday", "thursday",
                   "friday", "saturday", "sunday", "start_date", "end_date"],
                  calendar)
    if calendar_dates is not None:
        write_csv(os.path.join(feed_dir, "calendar_dates.txt"),
                  ["service_id", "date", "exception_type"], calendar_dates)
    if frequencies is not None:
        write_csv(os.path.join(feed_dir, "frequencies.txt"),
                  ["trip_id", "start_time", "end_time", "headway_secs"],
                  frequencies)
    if fare_attributes is not None:
        write_csv(os.path.join(feed_dir, "fare_attributes.txt"),
                  ["fare_id", "price", "currency_type", "payment_method",
                   "transfers", "transfer_duration", "agency_id"],
                  fare_attributes)
    return feed_dir


WEEKDAY_CAL = [("S1", 1, 1, 1, 1, 1, 0, 0, "20250101", "20251231")]


@pytest.fixture
def minimal_feed_dir(tmp_path):
    """1 agency, 1 route, 1 trip, 3 stops: the smallest useful feed."""
    return write_gtfs(
        str(tmp_path / "feed"),
        stops=[("A", "Stop A", 41.880, -87.630),
               ("B", "Stop B", 41.880, -87.620),
               ("C", "Stop C", 41.880, -87.610)],
        routes=[("R1", 3, "A1")],
        trips=[("T1", "R1", "S1")],
        stop_times=[("T1", "08:00:00", "08:00:00", "A", 1),
                    ("T1", "08:05:00", "08:05:30", "B", 2),
                    ("T1", "08:10:00", "08:10:00", "C", 3)],
        calendar=WEEKDAY_CAL,
    )
