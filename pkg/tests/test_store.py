import datetime

import pytest

from transitkit.errors import CountMismatch, ForeignKeyViolation, ValidationFailed
from transitkit.importer import import_feeds
from transitkit.store import load_network, persist_network

from conftest import WEEKDAY_CAL, write_gtfs

MONDAY = datetime.date(2025, 6, 2)


def test_import_minimal(minimal_feed_dir):
    store, report = import_feeds([minimal_feed_dir], MONDAY)
    assert len(store.stops) == 3
    assert len(store.routes) == 1
    assert len(store.patterns) == 1
    assert len(store.trips) == 1
    assert store.patterns[0].link_count == 2
    assert len(store.schedule) == 3  # k+1 rows
    assert report.active_trip_count == 1


def test_two_feeds_merge_agencies(tmp_path, minimal_feed_dir):
    other = write_gtfs(
        str(tmp_path / "feed2"),
        stops=[("X", "X", 42.0, -88.0), ("Y", "Y", 42.01, -88.0)],
        routes=[("R9", 1, "A2")],
        trips=[("T9", "R9", "S1")],
        stop_times=[("T9", "09:00:00", "09:00:00", "X", 1),
                    ("T9", "09:04:00", "09:04:00", "Y", 2)],
        calendar=WEEKDAY_CAL,
        agency=[("A2", "Agency Two")],
    )
    store, _ = import_feeds([minimal_feed_dir, other], MONDAY)
    assert [a.agency_id for a in store.agencies] == [0, 1]
    by_route = {r.route: r.agency_id for r in store.routes}
    assert by_route == {"R1": 0, "R9": 1}


def test_roundtrip_persist_load(tmp_path, minimal_feed_dir):
    store, _ = import_feeds([minimal_feed_dir], MONDAY)
    out = str(tmp_path / "store")
    persist_network(store, out)
    loaded = load_network(out)
    assert loaded == store


def test_persist_foreign_key_violation(tmp_path, minimal_feed_dir):
    store, _ = import_feeds([minimal_feed_dir], MONDAY)
    store.trips[0].pattern_id = 999
    with pytest.raises(ForeignKeyViolation):
        persist_network(store, str(tmp_path / "store"))


def test_persist_count_mismatch(tmp_path, minimal_feed_dir):
    store, _ = import_feeds([minimal_feed_dir], MONDAY)
    store.schedule.pop()
    with pytest.raises(CountMismatch):
        persist_network(store, str(tmp_path / "store"))


def test_k_k_plus_1_after_import(minimal_feed_dir):
    store, _ = import_feeds([minimal_feed_dir], MONDAY)
    link_counts = {}
    for pl in store.pattern_links:
        link_counts[pl.pattern_id] = link_counts.get(pl.pattern_id, 0) + 1
    sched = store.schedule_by_trip()
    for t in store.trips:
        assert len(sched[t.trip_id]) == link_counts[t.pattern_id] + 1


def test_six_pattern_route_persisted(tmp_path):
    seqs = [["A", "B", "C", "D", "E"], ["A", "B", "C"], ["A", "C", "E"],
            ["E", "D", "C", "B", "A"], ["C", "B", "A"], ["E", "C", "A"]]
    stop_rows = [(s, s, 41.0 + i * 0.01, -87.0)
                 for i, s in enumerate("ABCDE")]
    stop_times = []
    trips = []
    for i, seq in enumerate(seqs):
        tid = f"T{i}"
        trips.append((tid, "R1", "S1"))
        for j, s in enumerate(seq):
            hh = f"{6 + i:02d}:{j * 5:02d}:00"
            stop_times.append((tid, hh, hh, s, j + 1))
    d = write_gtfs(str(tmp_path / "six"), stops=stop_rows,
                   routes=[("R1", 3, "A1")], trips=trips,
                   stop_times=stop_times, calendar=WEEKDAY_CAL)
    store, _ = import_feeds([d], MONDAY)
    out = str(tmp_path / "store")
    persist_network(store, out)
    loaded = load_network(out)
    assert len(loaded.patterns) == 6
    assert len(loaded.routes) == 1


def test_agency_ids_stable_on_reimport(minimal_feed_dir):
    s1, _ = import_feeds([minimal_feed_dir], MONDAY)
    s2, _ = import_feeds([minimal_feed_dir], MONDAY)
    assert s1 == s2


def test_strict_mode_blocks_warnings(tmp_path):
    d = write_gtfs(
        str(tmp_path / "dup"),
        stops=[("A", "A", 41.0, -87.0), ("B", "B", 41.0, -87.0),
               ("C", "C", 41.1, -87.0)],
        routes=[("R1", 3, "A1")],
        trips=[("T1", "R1", "S1")],
        stop_times=[("T1", "08:00:00", "08:00:00", "A", 1),
                    ("T1", "08:10:00", "08:10:00", "C", 2)],
        calendar=WEEKDAY_CAL,
    )
    import_feeds([d], MONDAY)  # duplicate-stop warning tolerated
    with pytest.raises(ValidationFailed):
        import_feeds([d], MONDAY, strict=True)


def test_fares_imported(tmp_path):
    d = write_gtfs(
        str(tmp_path / "fare"),
        stops=[("A", "A", 41.0, -87.0), ("B", "B", 41.1, -87.0)],
        routes=[("R1", 3, "A1")],
        trips=[("T1", "R1", "S1")],
        stop_times=[("T1", "08:00:00", "08:00:00", "A", 1),
                    ("T1", "08:10:00", "08:10:00", "B", 2)],
        calendar=WEEKDAY_CAL,
        fare_attributes=[("F1", "2.50", "USD", 0, 2, 7200, "A1")],
    )
    store, _ = import_feeds([d], MONDAY)
    assert len(store.fares) == 1
    assert store.fares[0].price == 2.5
    assert store.fares[0].transfer_window_s == 7200
