import datetime
import random

import pytest

from transitkit import gtfs
from transitkit.errors import DegeneratePattern, DegenerateTrip
from transitkit.geo import haversine_m
from transitkit.patterns import (SpeedCapTable, build_pattern_links,
                                 extract_patterns, repair_segment_times)

MONDAY = datetime.date(2025, 6, 2)


def make_feed(trip_stop_seqs, route="R1"):
    """RawFeed with one route and the given per-trip stop sequences."""
    feed = gtfs.RawFeed()
    feed.routes.append(gtfs.RouteRec(route, 3, "A1"))
    stop_ids = sorted({s for seq in trip_stop_seqs for s in seq})
    for i, s in enumerate(stop_ids):
        feed.stops.append(gtfs.StopRec(s, s, 41.0 + i * 0.01, -87.0))
    for i, seq in enumerate(trip_stop_seqs):
        tid = f"T{i}"
        feed.trips.append(gtfs.TripRec(tid, route, "S1"))
        for j, s in enumerate(seq):
            t = 3600 + i * 600 + j * 120
            feed.stop_times.append(gtfs.StopTimeRec(tid, s, t, t, j))
    return feed


def test_one_trip_one_pattern():
    feed = make_feed([["A", "B", "C"]])
    patterns, mapping = extract_patterns(feed, {"T0"})
    assert len(patterns) == 1
    assert patterns[0].stops == ("A", "B", "C")
    assert mapping == {"T0": 0}


def test_six_pattern_route():
    # full, short-turn, express, and their three reverses
    seqs = [
        ["A", "B", "C", "D", "E"],
        ["A", "B", "C"],
        ["A", "C", "E"],
        ["E", "D", "C", "B", "A"],
        ["C", "B", "A"],
        ["E", "C", "A"],
    ]
    feed = make_feed(seqs)
    patterns, _ = extract_patterns(feed, {f"T{i}" for i in range(6)})
    assert len(patterns) == 6


def test_duplicate_sequences_collapse():
    feed = make_feed([["A", "B"], ["A", "B"], ["B", "A"]])
    patterns, mapping = extract_patterns(feed, {"T0", "T1", "T2"})
    # brute force: unique sequences are (A,B) and (B,A)
    assert len(patterns) == 2
    assert mapping["T0"] == mapping["T1"] != mapping["T2"]


def test_degenerate_trip():
    feed = make_feed([["A"]])
    with pytest.raises(DegenerateTrip):
        extract_patterns(feed, {"T0"})


def test_pattern_partition_property():
    rng = random.Random(7)
    stops = [f"S{i}" for i in range(8)]
    seqs = [rng.sample(stops, rng.randint(2, 6)) for _ in range(25)]
    feed = make_feed(seqs)
    active = {f"T{i}" for i in range(len(seqs))}
    patterns, mapping = extract_patterns(feed, active)
    # every active trip maps to exactly one pattern
    assert set(mapping) == active
    # brute-force set of unique sequences
    assert {p.stops for p in patterns} == {tuple(s) for s in seqs}
    # patterns pairwise distinct
    assert len({p.stops for p in patterns}) == len(patterns)


def test_build_pattern_links_counts_and_lengths():
    coords = {1: (41.88, -87.63), 2: (41.88, -87.62), 3: (41.88, -87.61)}
    links = build_pattern_links([1, 2, 3], coords)
    assert [(l[0], l[1]) for l in links] == [(1, 2), (2, 3)]
    expect = round(haversine_m(41.88, -87.63, 41.88, -87.62), 2)
    assert links[0][2] == expect


def test_build_pattern_links_degenerate():
    with pytest.raises(DegeneratePattern):
        build_pattern_links([1], {1: (41.0, -87.0)})


def test_repair_basic_case():
    # 1000 m scheduled in 30 s against a 25 m/s cap: arrival moves to 40 s
    # and everything downstream shifts +10 s (1000/25 = 40)
    times = [[0, 0], [30, 35], [60, 60]]
    repaired, adj = repair_segment_times(times, [1000, 500], [25, 25])
    assert repaired[1][0] == 40
    assert repaired[1][1] == 45
    assert repaired[2] == [70, 70]
    assert len(adj) == 1


def test_repair_at_cap_unchanged():
    times = [[0, 0], [40, 40]]
    repaired, adj = repair_segment_times(times, [1000], [25])
    assert repaired == [[0, 0], [40, 40]]
    assert adj == []


def test_repair_short_band():
    # 200 m in 10 s (20 m/s) with a 15 m/s short-band cap: 200/15 = 13.33
    times = [[0, 0], [10, 10], [20, 20]]
    repaired, adj = repair_segment_times(times, [200, 100], [15, 15])
    assert repaired[1][0] == pytest.approx(200 / 15, abs=1e-9)
    assert repaired[2][0] == pytest.approx(20 + 200 / 15 - 10, abs=1e-9)


def test_repair_idempotent_and_capped():
    rng = random.Random(11)
    for _ in range(50):
        n = rng.randint(2, 6)
        times = []
        t = 0.0
        for i in range(n):
            times.append([t, t + rng.randint(0, 30)])
            t = times[-1][1] + rng.randint(1, 120)
        lengths = [rng.randint(50, 3000) for _ in range(n - 1)]
        caps = [rng.choice([10.0, 15.0, 25.0]) for _ in range(n - 1)]
        r1, _ = repair_segment_times(times, lengths, caps)
        r2, adj2 = repair_segment_times(r1, lengths, caps)
        assert r2 == r1
        assert adj2 == []
        for i in range(n - 1):
            seg = r1[i + 1][0] - r1[i][1]
            assert lengths[i] / seg <= caps[i] * (1 + 1e-9)
            # repair never decreases an arrival
            assert r1[i + 1][0] >= times[i + 1][0]


def test_repair_non_positive_segment_time():
    times = [[0, 50], [40, 60]]  # departure after next arrival
    repaired, adj = repair_segment_times(times, [300], [15])
    assert repaired[1][0] == pytest.approx(50 + 300 / 15)
    assert len(adj) == 1


def test_speed_cap_table_bands():
    caps = SpeedCapTable()
    assert caps.cap("bus", 200) == 15.0
    assert caps.cap("bus", 400) == 25.0
    assert caps.cap("rail", 10_000) == 40.0


def test_speed_cap_table_rejects_decreasing():
    with pytest.raises(ValueError):
        SpeedCapTable(caps={"bus": (25.0, 15.0)})
