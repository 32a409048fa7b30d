"""Command line front end: import, build-net, route, assign, simulate,
report, run, edit."""

import argparse
import csv
import os
import sys

from .assignment import MixConfig, run_dta_loop
from .edit import apply_script
from .graph import attach_activity_locations, build_graph, load_graph, save_graph
from .modes import MODE_RULES, RouterConfig
from .patterns import SpeedCapTable
from .profiles import TravelTimeProfiles, load_profiles, save_profiles
from .roads import load_road_network
from .router import Router
from .scenario import (compute_metrics, export_results, ingest_trips,
                       load_locations, load_scenario, run_pipeline)
from .sim import run_simulation, write_event_log, write_sim_metrics
from .store import load_network, persist_network
from .timetable import Timetable


def _hms(value):
    parts = value.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected hh:mm:ss")
    h, m, s = (int(p) for p in parts)
    return float(h * 3600 + m * 60 + s)


def _onoff(value):
    if value not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected on or off")
    return value == "on"


def cmd_import(args):
    from .gtfs import parse_date
    from .importer import import_feeds
    caps = SpeedCapTable.from_csv(args.speed_caps) if args.speed_caps else None
    store, report = import_feeds(args.gtfs, parse_date(args.date.replace("-", "")),
                                 caps=caps, strict=args.strict)
    persist_network(store, args.out)
    print(f"imported {len(store.trips)} trips on {len(store.patterns)} "
          f"patterns from {len(args.gtfs)} feeds; "
          f"{len(report.speed_repairs)} segments speed-repaired")
    for issue in report.issues:
        print(f"  {issue.severity}: {issue.message}")
    return 0


def cmd_build_net(args):
    store = load_network(args.store)
    road_links, road_nodes = load_road_network(args.roads, args.road_nodes)
    graph = build_graph(store, road_links, road_nodes, strict=args.strict,
                        stop_radius=args.radius_stop)
    if args.locations:
        attach_activity_locations(graph, load_locations(args.locations),
                                  k=args.k_anchors)
    save_graph(graph, args.out)
    persist_network(store, args.store)  # access + mapping tables filled here
    print(f"graph: {len(graph.nodes)} nodes, {len(graph.links)} links, "
          f"{len(graph.pattern_maps)} mapped bus patterns")
    return 0


def _load_router(args):
    graph = load_graph(args.graph)
    store = load_network(args.store)
    timetable = Timetable(store)
    profiles = load_profiles(args.profiles) if getattr(args, "profiles", None) \
        else TravelTimeProfiles()
    return graph, store, timetable, profiles


def cmd_route(args):
    graph, store, timetable, profiles = _load_router(args)
    router = Router(graph, timetable, profiles, RouterConfig())
    path = router.route(graph.locations[args.from_loc],
                        graph.locations[args.to_loc], args.depart, args.mode)
    w = csv.writer(sys.stdout)
    w.writerow(["leg", "mode", "board_stop", "alight_stop", "trip_id",
                "depart", "arrive", "cost"])
    for i, leg in enumerate(path.legs):
        w.writerow([i, leg.mode, leg.board_stop, leg.alight_stop, leg.trip_id,
                    repr(leg.start_s), repr(leg.end_s), ""])
    w.writerow(["total", path.mode, "", "", "", repr(path.departure),
                repr(path.arrival), repr(path.gen_cost)])
    return 0


def _read_demand(args, graph):
    requests, rejects = ingest_trips(args.demand, graph.locations)
    for row, reason in rejects:
        print(f"rejected demand row {row}: {reason}", file=sys.stderr)
    return [r.to_plan() for r in requests]


def cmd_assign(args):
    graph, store, timetable, _ = _load_router(args)
    plans = _read_demand(args, graph)
    res = run_dta_loop(plans, graph, timetable, mix_cfg=MixConfig(),
                       max_iter=args.max_iter, seed=args.seed,
                       mixed_traffic=args.mixed_traffic)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "iteration_stats.csv"), "w",
              newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "avg_gap", "share_reassigned",
                    "total_travel_time_s"])
        for s in res.stats:
            w.writerow([s.iteration, repr(s.avg_gap),
                        repr(s.share_reassigned),
                        repr(s.total_travel_time_s)])
    save_profiles(res.profiles, os.path.join(args.out, "profiles.csv"))
    print(f"assignment {res.status} after {len(res.stats)} iterations; "
          f"final gap {res.stats[-1].avg_gap:.4f}" if res.stats
          else "assignment finished with no demand")
    return 0


def cmd_simulate(args):
    graph, store, timetable, profiles = _load_router(args)
    plans = _read_demand(args, graph)
    router = Router(graph, timetable, profiles, RouterConfig())
    travelers = []
    for plan in plans:
        try:
            path = router.route(graph.locations[plan.origin],
                                graph.locations[plan.destination],
                                plan.depart_s, plan.mode)
        except Exception as exc:
            print(f"traveler {plan.traveler_id}: no path ({exc})",
                  file=sys.stderr)
            continue
        travelers.append((plan, path))
    result = run_simulation(graph, timetable, travelers, profiles=profiles,
                            mixed_traffic=args.mixed_traffic, router=router)
    os.makedirs(args.out, exist_ok=True)
    write_event_log(result.events, os.path.join(args.out, "events.csv"))
    write_sim_metrics(result, args.out)
    done = sum(1 for r in result.traveler_records.values()
               if r.status == "done")
    print(f"simulated {len(travelers)} travelers: {done} done, "
          f"{len(travelers) - done} failed")
    return 0


def cmd_report(args):
    store = load_network(args.store)
    timetable = Timetable(store)
    from .sim import SimulationResult, TravelerRecord
    records = {}
    with open(os.path.join(args.sim, "travelers.csv"), newline="") as fh:
        for row in csv.DictReader(fh):
            rec = TravelerRecord(int(row["traveler_id"]),
                                 float(row["depart_s"]),
                                 float(row["arrive_s"]),
                                 float(row["wait_s"]),
                                 int(row["boardings"]),
                                 int(row["rejections"]), row["status"])
            records[rec.traveler_id] = rec
    events = []
    with open(os.path.join(args.sim, "events.csv"), newline="") as fh:
        for row in csv.DictReader(fh):
            events.append((float(row["time_s"]), row["kind"],
                           row["subject"], row["loc"],
                           int(row["trip"]) if row["trip"] not in ("", "-1")
                           else -1, row["detail"]))
    result = SimulationResult(events, {}, records, {})
    requests, _ = ingest_trips(args.demand, _AllLocations())
    report = compute_metrics(result, [r.to_plan() for r in requests],
                             timetable)
    export_results(report, [], args.out)
    print(f"{report.total_trips} trips, {report.boardings} boardings, "
          f"{report.transfers} transfers, {report.failures} failures")
    return 0


class _AllLocations:
    def __contains__(self, key):
        return True


def cmd_run(args):
    cfg = load_scenario(args.scenario)
    report, dta, _ = run_pipeline(cfg)
    print(f"assignment {dta.status}; transit person-trips "
          f"{report.transit_person_trips}, boardings {report.boardings}")
    return 0


def cmd_edit(args):
    store = load_network(args.store)
    with open(args.script) as fh:
        report = apply_script(store, fh.read())
    persist_network(store, args.store)
    print(f"edits applied: +{report.trips_added}/-{report.trips_removed} "
          f"trips, {len(report.patterns_modified)} patterns modified, "
          f"{len(report.patterns_deleted)} deleted")
    for warning in report.warnings:
        print(f"  warning: {warning}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="transitkit")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("import", help="GTFS feeds -> network store")
    sp.add_argument("--gtfs", nargs="+", required=True)
    sp.add_argument("--date", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--speed-caps")
    sp.add_argument("--strict", action="store_true")
    sp.set_defaults(func=cmd_import)

    sp = sub.add_parser("build-net", help="store + roads -> multimodal graph")
    sp.add_argument("--store", required=True)
    sp.add_argument("--roads", required=True)
    sp.add_argument("--road-nodes", required=True)
    sp.add_argument("--locations")
    sp.add_argument("--out", required=True)
    sp.add_argument("--strict", action="store_true")
    sp.add_argument("--radius-stop", type=float, default=200.0)
    sp.add_argument("--k-anchors", type=int, default=4)
    sp.set_defaults(func=cmd_build_net)

    sp = sub.add_parser("route", help="one intermodal query")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--store", required=True)
    sp.add_argument("--profiles")
    sp.add_argument("--from", dest="from_loc", type=int, required=True)
    sp.add_argument("--to", dest="to_loc", type=int, required=True)
    sp.add_argument("--depart", type=_hms, required=True)
    sp.add_argument("--mode", choices=sorted(MODE_RULES), required=True)
    sp.set_defaults(func=cmd_route)

    sp = sub.add_parser("assign", help="gap-based assignment loop")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--store", required=True)
    sp.add_argument("--demand", required=True)
    sp.add_argument("--max-iter", type=int, default=30)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--mixed-traffic", type=_onoff, default=False)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_assign)

    sp = sub.add_parser("simulate", help="one simulation run")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--store", required=True)
    sp.add_argument("--demand", required=True)
    sp.add_argument("--profiles")
    sp.add_argument("--mixed-traffic", type=_onoff, default=False)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("report", help="metrics from simulation outputs")
    sp.add_argument("--sim", required=True)
    sp.add_argument("--store", required=True)
    sp.add_argument("--demand", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_report)

    sp = sub.add_parser("run", help="whole pipeline from a scenario file")
    sp.add_argument("--scenario", required=True)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("edit", help="apply an edits script to a store")
    sp.add_argument("--store", required=True)
    sp.add_argument("--script", required=True)
    sp.set_defaults(func=cmd_edit)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
