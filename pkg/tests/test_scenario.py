import io

import pytest

from transitkit.errors import InvalidValue, UnknownKey
from transitkit.scenario import (MetricsReport, ScenarioConfig,
                                 compute_metrics, export_results,
                                 ingest_trips, load_scenario)
from transitkit.sim import SimulationResult, TravelerRecord, run_simulation

from test_sim import three_stop_world, plan_path


def test_load_scenario_minimal_defaults():
    cfg = load_scenario("""
    [paths]
    store = /tmp/store
    demand = /tmp/trips.csv
    """)
    assert cfg.store == "/tmp/store"
    assert cfg.mixed_traffic is False
    assert cfg.mix.lam == 5.0 and cfg.mix.gamma == 0.2
    assert cfg.router.w_wait == 2.0


def test_load_scenario_levers_and_router():
    cfg = load_scenario("""
    [levers]
    mixed_traffic = on
    fmlm_subsidy = 0.5
    freq_routes = 1,2
    freq_multiplier = 1.4
    toll_per_km = 0.25
    toll_windows = 25200-32400,57600-64800
    [assignment]
    gamma = 3.0
    seed = 7
    [router]
    w_walk = 1.5
    """)
    assert cfg.mixed_traffic and cfg.fmlm_subsidy == 0.5
    assert cfg.freq_routes == [1, 2] and cfg.freq_multiplier == 1.4
    assert cfg.toll_windows == [(25200.0, 32400.0), (57600.0, 64800.0)]
    assert cfg.mix.gamma == 3.0 and cfg.seed == 7
    assert cfg.router.w_walk == 1.5
    # the subsidy and toll carry into the router config used for pricing
    assert cfg.router.fmlm_subsidy == 0.5
    assert cfg.router.toll_per_km == 0.25


def test_load_scenario_rejects_bad_values():
    with pytest.raises(InvalidValue):
        load_scenario("[levers]\nfmlm_subsidy = 1.5\n")
    with pytest.raises(InvalidValue):
        load_scenario("[levers]\ntoll_windows = 100-200,150-300\n")
    with pytest.raises(UnknownKey):
        load_scenario("[levers]\nwarp_factor = 9\n")
    with pytest.raises(UnknownKey):
        load_scenario("[warp]\nx = 1\n")


def test_ingest_trips_row_validation():
    csv_text = io.StringIO(
        "traveler,origin,destination,depart,mode\n"
        "1,0,1,100,walk_transit\n"
        "2,0,1,200,car\n"
        "3,0,1,300,walk\n"
        "4,0,1,400,teleport\n"
        "5,0,9,500,walk\n"
        "6,0,1,999999999,walk\n")
    reqs, rejects = ingest_trips(csv_text, locations={0: None, 1: None})
    assert [r.traveler for r in reqs] == [1, 2, 3]
    assert len(rejects) == 3
    reasons = " ".join(r for _, r in rejects)
    assert "teleport" in reasons and "location" in reasons \
        and "horizon" in reasons


def _result_with(boardings_by_traveler, failed=()):
    records = {}
    for tid, b in boardings_by_traveler.items():
        rec = TravelerRecord(tid, 0.0, 100.0, boardings=b)
        rec.status = "failed" if tid in failed else "done"
        records[tid] = rec
    return SimulationResult([], {}, records, {})


class _Plan:
    def __init__(self, mode):
        self.mode = mode


class _NoTimetable:
    trips = {}
    pattern_route = {}


def test_metrics_share_and_transfers():
    plans = [_Plan("walk_transit")] * 25 + [_Plan("car")] * 75
    result = _result_with({i: (1 if i < 11 else 0) for i in range(100)})
    # 10 transit person-trips with 14 boardings among them
    for tid in range(4):
        result.traveler_records[tid].boardings = 2
    result.traveler_records[10].boardings = 0
    report = compute_metrics(result, plans, _NoTimetable())
    assert report.mode_shares["walk_transit"] == 0.25
    assert sum(report.mode_shares.values()) == pytest.approx(1.0)
    assert report.transit_person_trips == 10
    assert report.boardings == 14
    assert report.transfers == 4


def test_metrics_zero_demand():
    report = compute_metrics(_result_with({}), [], _NoTimetable())
    assert report.total_trips == 0
    assert not report.shares_defined and report.mode_shares == {}


def test_metrics_match_event_log():
    graph, store, tt, _, _ = three_stop_world(departs=(1000, 1500))
    travelers = [plan_path(i, 800 + i, trip=i % 2) for i in range(6)]
    res = run_simulation(graph, tt, travelers)
    plans = [p for p, _ in travelers]
    report = compute_metrics(res, plans, tt)
    from_log = sum(1 for e in res.events if e[1] == "board")
    assert report.boardings == from_log
    assert sum(report.boardings_by_route.values()) == from_log


def test_export_results_reproducible(tmp_path):
    graph, store, tt, _, _ = three_stop_world()
    travelers = [plan_path(i, 900 + i) for i in range(3)]
    res = run_simulation(graph, tt, travelers)
    report = compute_metrics(res, [p for p, _ in travelers], tt)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    export_results(report, [], out1)
    export_results(report, [], out2)
    for name in ("metrics.csv", "boardings_by_route.csv",
                 "iteration_stats.csv"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_export_empty_report_headers_only(tmp_path):
    export_results(MetricsReport(), [], tmp_path / "out")
    lines = (tmp_path / "out" / "boardings_by_route.csv").read_text() \
        .strip().splitlines()
    assert lines == ["route_id,bin,boardings"]
    stats = (tmp_path / "out" / "iteration_stats.csv").read_text() \
        .strip().splitlines()
    assert stats == ["iteration,avg_gap,share_reassigned,total_travel_time_s"]
