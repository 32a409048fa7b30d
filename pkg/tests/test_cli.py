import csv
import os

import pytest

from transitkit.cli import main
from transitkit.store import load_network

from conftest import WEEKDAY_CAL, write_csv, write_gtfs


@pytest.fixture(scope="module")
def world(tmp_path_factory):
    """Feed, roads, locations, and demand for one east-west bus corridor."""
    root = tmp_path_factory.mktemp("cli")
    feed = write_gtfs(
        str(root / "feed"),
        stops=[("A", "Stop A", 41.880, -87.630),
               ("B", "Stop B", 41.880, -87.620),
               ("C", "Stop C", 41.880, -87.610)],
        routes=[("R1", 3, "A1")],
        trips=[("T1", "R1", "S1"), ("T2", "R1", "S1")],
        stop_times=[("T1", "08:00:00", "08:00:00", "A", 1),
                    ("T1", "08:05:00", "08:05:00", "B", 2),
                    ("T1", "08:10:00", "08:10:00", "C", 3),
                    ("T2", "08:30:00", "08:30:00", "A", 1),
                    ("T2", "08:35:00", "08:35:00", "B", 2),
                    ("T2", "08:40:00", "08:40:00", "C", 3)],
        calendar=WEEKDAY_CAL,
    )
    write_csv(root / "road_nodes.csv", ["id", "lat", "lon"],
              [("n1", 41.880, -87.630), ("n2", 41.880, -87.620),
               ("n3", 41.880, -87.610)])
    write_csv(root / "road_links.csv",
              ["id", "from", "to", "length", "lanes", "capacity", "ff_speed",
               "class", "oneway"],
              [("L12", "n1", "n2", 829, 1, 1800, 13.9, "local", 0),
               ("L23", "n2", "n3", 829, 1, 1800, 13.9, "local", 0)])
    write_csv(root / "locations.csv", ["location_id", "lat", "lon"],
              [(0, 41.8801, -87.630), (1, 41.8801, -87.610)])
    write_csv(root / "demand.csv",
              ["traveler", "origin", "destination", "depart", "mode"],
              [(1, 0, 1, 28500, "walk_transit"),
               (2, 0, 1, 28560, "walk_transit"),
               (3, 1, 0, 28200, "walk")])
    store = str(root / "store")
    assert main(["import", "--gtfs", feed, "--date", "2025-06-04",
                 "--out", store]) == 0
    graph = str(root / "graph")
    assert main(["build-net", "--store", store, "--roads",
                 str(root / "road_links.csv"), "--road-nodes",
                 str(root / "road_nodes.csv"), "--locations",
                 str(root / "locations.csv"), "--k-anchors", "1",
                 "--out", graph]) == 0
    return root


def test_import_wrote_store(world):
    store = load_network(str(world / "store"))
    assert len(store.stops) == 3 and len(store.trips) == 2
    store.check_consistency()


def test_build_net_wrote_graph(world):
    assert os.path.exists(world / "graph" / "links.csv")
    assert os.path.exists(world / "graph" / "locations.csv")


def test_route_prints_legs(world, capsys):
    assert main(["route", "--graph", str(world / "graph"), "--store",
                 str(world / "store"), "--from", "0", "--to", "1",
                 "--depart", "07:55:00", "--mode", "walk_transit"]) == 0
    out = capsys.readouterr().out
    lines = out.strip().splitlines()
    assert lines[0].startswith("leg,mode,board_stop")
    assert lines[-1].startswith("total,walk_transit")
    assert any(",transit," in line for line in lines)


def test_simulate_writes_outputs(world, capsys):
    out = str(world / "sim")
    assert main(["simulate", "--graph", str(world / "graph"), "--store",
                 str(world / "store"), "--demand", str(world / "demand.csv"),
                 "--mixed-traffic", "off", "--out", out]) == 0
    with open(os.path.join(out, "travelers.csv"), newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 3
    assert all(r["status"] == "done" for r in rows)
    assert os.path.exists(os.path.join(out, "events.csv"))


def test_report_from_sim_outputs(world, capsys):
    out = str(world / "report")
    assert main(["report", "--sim", str(world / "sim"), "--store",
                 str(world / "store"), "--demand", str(world / "demand.csv"),
                 "--out", out]) == 0
    with open(os.path.join(out, "metrics.csv"), newline="") as fh:
        metrics = {r["metric"]: r["value"] for r in csv.DictReader(fh)}
    assert metrics["total_trips"] == "3"
    assert int(metrics["boardings"]) >= 2


def test_assign_writes_stats(world, capsys):
    out = str(world / "assign")
    assert main(["assign", "--graph", str(world / "graph"), "--store",
                 str(world / "store"), "--demand", str(world / "demand.csv"),
                 "--max-iter", "2", "--seed", "1", "--out", out]) == 0
    with open(os.path.join(out, "iteration_stats.csv"), newline="") as fh:
        stats = list(csv.DictReader(fh))
    assert 1 <= len(stats) <= 2
    assert os.path.exists(os.path.join(out, "profiles.csv"))


def test_edit_applies_script(world, tmp_path, capsys):
    script = tmp_path / "edits.txt"
    script.write_text("add_stop lat=41.90 lon=-87.60 name=annex\n")
    assert main(["edit", "--store", str(world / "store"), "--script",
                 str(script)]) == 0
    store = load_network(str(world / "store"))
    assert any(s.name == "annex" for s in store.stops)


def test_run_scenario(world, capsys):
    out = world / "run_out"
    scenario = world / "scenario.txt"
    scenario.write_text(f"""
    [paths]
    store = {world / 'store'}
    road_links = {world / 'road_links.csv'}
    road_nodes = {world / 'road_nodes.csv'}
    locations = {world / 'locations.csv'}
    demand = {world / 'demand.csv'}
    out = {out}
    [assignment]
    max_iter = 2
    gap_threshold = 0.5
    """)
    assert main(["run", "--scenario", str(scenario)]) == 0
    assert os.path.exists(out / "metrics.csv")
    assert os.path.exists(out / "events.csv")


def test_bad_arguments_exit_nonzero(world):
    with pytest.raises(SystemExit):
        main(["route", "--graph", "g", "--store", "s", "--from", "0",
              "--to", "1", "--depart", "noon", "--mode", "walk"])
    with pytest.raises(SystemExit):
        main(["simulate", "--graph", "g", "--store", "s", "--demand", "d",
              "--mixed-traffic", "maybe", "--out", "o"])
