"""Scenario files, trip tables, metrics, and result export."""

import csv
import os
from dataclasses import dataclass, field

from .assignment import MixConfig, TravelerPlan
from .errors import InvalidValue, IoFailure, UnknownKey
from .modes import MODE_RULES, RouterConfig

DEFAULT_HORIZON_S = 30 * 3600


@dataclass
class ScenarioConfig:
    # paths
    store: str = ""
    road_links: str = ""
    road_nodes: str = ""
    locations: str = ""
    demand: str = ""
    out: str = ""
    # levers
    mixed_traffic: bool = False
    fmlm_subsidy: float = 0.0
    freq_routes: list = field(default_factory=list)
    freq_multiplier: float = 1.0
    speed_routes: list = field(default_factory=list)
    speed_multiplier: float = 1.0
    toll_per_km: float = 0.0
    toll_windows: list = field(default_factory=list)  # (start_s, end_s)
    # assignment
    mix: MixConfig = field(default_factory=MixConfig)
    max_iter: int = 30
    gap_threshold: float = 0.03
    seed: int = 0
    # router weights
    router: RouterConfig = field(default_factory=RouterConfig)


def _parse_bool(v):
    if v in ("on", "true", "1", "yes"):
        return True
    if v in ("off", "false", "0", "no"):
        return False
    raise InvalidValue(f"expected on/off, got {v!r}")


def _parse_ids(v):
    return [int(x) for x in v.split(",") if x != ""]


def _parse_windows(v):
    out = []
    for piece in v.split(","):
        if not piece:
            continue
        lo, hi = piece.split("-")
        out.append((float(lo), float(hi)))
    return out


def load_scenario(path_or_text):
    """Parse the line-oriented `key = value` scenario format.

    Sections group keys ([paths], [levers], [assignment], [router]); unknown
    keys fail loudly so typos cannot silently disable a lever.
    """
    if os.path.exists(path_or_text):
        with open(path_or_text) as fh:
            text = fh.read()
    else:
        text = path_or_text
    cfg = ScenarioConfig()
    section = "paths"
    known_sections = {"paths", "levers", "assignment", "router"}
    setters = {
        ("paths", "store"): lambda v: setattr(cfg, "store", v),
        ("paths", "road_links"): lambda v: setattr(cfg, "road_links", v),
        ("paths", "road_nodes"): lambda v: setattr(cfg, "road_nodes", v),
        ("paths", "locations"): lambda v: setattr(cfg, "locations", v),
        ("paths", "demand"): lambda v: setattr(cfg, "demand", v),
        ("paths", "out"): lambda v: setattr(cfg, "out", v),
        ("levers", "mixed_traffic"):
            lambda v: setattr(cfg, "mixed_traffic", _parse_bool(v)),
        ("levers", "fmlm_subsidy"):
            lambda v: setattr(cfg, "fmlm_subsidy", float(v)),
        ("levers", "freq_routes"):
            lambda v: setattr(cfg, "freq_routes", _parse_ids(v)),
        ("levers", "freq_multiplier"):
            lambda v: setattr(cfg, "freq_multiplier", float(v)),
        ("levers", "speed_routes"):
            lambda v: setattr(cfg, "speed_routes", _parse_ids(v)),
        ("levers", "speed_multiplier"):
            lambda v: setattr(cfg, "speed_multiplier", float(v)),
        ("levers", "toll_per_km"):
            lambda v: setattr(cfg, "toll_per_km", float(v)),
        ("levers", "toll_windows"):
            lambda v: setattr(cfg, "toll_windows", _parse_windows(v)),
        ("assignment", "lambda"): lambda v: setattr(cfg.mix, "lam", float(v)),
        ("assignment", "kappa"): lambda v: setattr(cfg.mix, "kappa", float(v)),
        ("assignment", "gamma"): lambda v: setattr(cfg.mix, "gamma", float(v)),
        ("assignment", "epsilon"):
            lambda v: setattr(cfg.mix, "epsilon", float(v)),
        ("assignment", "max_iter"):
            lambda v: setattr(cfg, "max_iter", int(v)),
        ("assignment", "gap_threshold"):
            lambda v: setattr(cfg, "gap_threshold", float(v)),
        ("assignment", "seed"): lambda v: setattr(cfg, "seed", int(v)),
        ("router", "w_wait"): lambda v: setattr(cfg.router, "w_wait", float(v)),
        ("router", "w_walk"): lambda v: setattr(cfg.router, "w_walk", float(v)),
        ("router", "transfer_penalty_s"):
            lambda v: setattr(cfg.router, "transfer_penalty_s", float(v)),
        ("router", "boarding_penalty_s"):
            lambda v: setattr(cfg.router, "boarding_penalty_s", float(v)),
        ("router", "value_of_time_per_h"):
            lambda v: setattr(cfg.router, "value_of_time_per_h", float(v)),
    }
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in known_sections:
                raise UnknownKey(f"line {ln}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise InvalidValue(f"line {ln}: expected key = value")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        setter = setters.get((section, key))
        if setter is None:
            raise UnknownKey(f"line {ln}: unknown key {key!r} in [{section}]")
        try:
            setter(value)
        except (ValueError, InvalidValue) as exc:
            raise InvalidValue(f"line {ln}: bad value for {key!r}: {exc}")
    _validate(cfg)
    return cfg


def _validate(cfg):
    if not 0.0 <= cfg.fmlm_subsidy <= 1.0:
        raise InvalidValue("fmlm_subsidy must be in [0, 1]")
    if cfg.freq_multiplier <= 0 or cfg.speed_multiplier <= 0:
        raise InvalidValue("multipliers must be positive")
    if cfg.toll_per_km < 0:
        raise InvalidValue("toll_per_km must be non-negative")
    wins = sorted(cfg.toll_windows)
    for (a0, a1), (b0, b1) in zip(wins, wins[1:]):
        if b0 < a1:
            raise InvalidValue(f"toll windows overlap: {a0}-{a1}, {b0}-{b1}")
    for a0, a1 in wins:
        if a1 <= a0:
            raise InvalidValue(f"empty toll window {a0}-{a1}")
    cfg.router.fmlm_subsidy = cfg.fmlm_subsidy
    cfg.router.toll_per_km = cfg.toll_per_km


@dataclass
class TripRequest:
    traveler: int
    origin: int
    destination: int
    depart_s: float
    mode: str

    def to_plan(self):
        return TravelerPlan(self.traveler, self.origin, self.destination,
                            self.depart_s, self.mode)


def ingest_trips(path_or_file, locations, horizon_s=DEFAULT_HORIZON_S):
    """Validated trip requests from a CSV with columns
    traveler,origin,destination,depart,mode.  Bad rows are rejected one by
    one and reported, never fatal; an empty result is a warning condition
    for the caller."""
    if hasattr(path_or_file, "read"):
        rows = list(csv.DictReader(path_or_file))
    else:
        with open(path_or_file, newline="") as fh:
            rows = list(csv.DictReader(fh))
    requests = []
    rejects = []
    for i, row in enumerate(rows, 1):
        try:
            traveler = int(row["traveler"])
            origin = int(row["origin"])
            destination = int(row["destination"])
            depart = float(row["depart"])
            mode = row["mode"]
        except (KeyError, TypeError, ValueError) as exc:
            rejects.append((i, f"malformed row: {exc}"))
            continue
        if mode not in MODE_RULES:
            rejects.append((i, f"unknown mode {mode!r}"))
            continue
        if origin not in locations or destination not in locations:
            rejects.append((i, "unknown location"))
            continue
        if not 0.0 <= depart < horizon_s:
            rejects.append((i, f"depart {depart} outside horizon"))
            continue
        requests.append(TripRequest(traveler, origin, destination, depart,
                                    mode))
    return requests, rejects


@dataclass
class MetricsReport:
    total_trips: int = 0
    trips_by_mode: dict = field(default_factory=dict)
    transit_person_trips: int = 0
    boardings: int = 0
    transfers: int = 0
    mode_shares: dict = field(default_factory=dict)
    shares_defined: bool = False
    failures: int = 0
    boardings_by_route: dict = field(default_factory=dict)  # (route, bin)->n


def compute_metrics(result, plans, timetable, bin_s=3600):
    """Mode share, boardings, transfers; per-route boardings by time bin."""
    report = MetricsReport()
    report.total_trips = len(plans)
    for plan in plans:
        report.trips_by_mode[plan.mode] = \
            report.trips_by_mode.get(plan.mode, 0) + 1
    if report.total_trips:
        report.shares_defined = True
        report.mode_shares = {m: n / report.total_trips
                              for m, n in sorted(report.trips_by_mode.items())}
    for rec in result.traveler_records.values():
        report.boardings += rec.boardings
        if rec.boardings > 0:
            report.transit_person_trips += 1
        if rec.status == "failed":
            report.failures += 1
    report.transfers = report.boardings - report.transit_person_trips
    for time, kind, _, _, trip, _ in result.events:
        if kind != "board":
            continue
        pattern = timetable.trips[trip].pattern_id
        route = timetable.pattern_route[pattern]
        key = (route, int(time // bin_s))
        report.boardings_by_route[key] = \
            report.boardings_by_route.get(key, 0) + 1
    return report


def export_results(report, iteration_stats, out_dir):
    """metrics.csv, boardings_by_route.csv, iteration_stats.csv."""
    try:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "metrics.csv"), "w",
                  newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["metric", "value"])
            w.writerow(["total_trips", report.total_trips])
            w.writerow(["transit_person_trips", report.transit_person_trips])
            w.writerow(["boardings", report.boardings])
            w.writerow(["transfers", report.transfers])
            w.writerow(["failures", report.failures])
            for mode in sorted(report.trips_by_mode):
                w.writerow([f"trips:{mode}", report.trips_by_mode[mode]])
            for mode in sorted(report.mode_shares):
                w.writerow([f"share:{mode}", repr(report.mode_shares[mode])])
        with open(os.path.join(out_dir, "boardings_by_route.csv"), "w",
                  newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["route_id", "bin", "boardings"])
            for route, b in sorted(report.boardings_by_route):
                w.writerow([route, b, report.boardings_by_route[(route, b)]])
        with open(os.path.join(out_dir, "iteration_stats.csv"), "w",
                  newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "avg_gap", "share_reassigned",
                        "total_travel_time_s"])
            for s in iteration_stats:
                w.writerow([s.iteration, repr(s.avg_gap),
                            repr(s.share_reassigned),
                            repr(s.total_travel_time_s)])
    except OSError as exc:
        raise IoFailure(f"cannot write results to {out_dir}: {exc}")


def load_locations(path):
    """CSV (location_id, lat, lon) -> list of ActivityLocation."""
    from .graph import ActivityLocation
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(ActivityLocation(int(row["location_id"]),
                                        float(row["lat"]),
                                        float(row["lon"])))
    return out


def run_pipeline(cfg):
    """Store -> levers -> graph -> demand -> assignment -> metrics files."""
    from .assignment import run_dta_loop
    from .edit import EditTransaction, update_frequencies, update_speeds
    from .graph import attach_activity_locations, build_graph
    from .roads import load_road_network
    from .router import Router
    from .sim import run_simulation, write_event_log
    from .store import load_network
    from .timetable import Timetable

    store = load_network(cfg.store)
    with EditTransaction(store):
        if cfg.freq_routes and cfg.freq_multiplier != 1.0:
            update_frequencies(store, cfg.freq_routes, (0.0, DEFAULT_HORIZON_S),
                               multiplier=cfg.freq_multiplier)
        if cfg.speed_routes and cfg.speed_multiplier != 1.0:
            update_speeds(store, cfg.speed_routes, cfg.speed_multiplier)
    road_links, road_nodes = load_road_network(cfg.road_links, cfg.road_nodes)
    graph = build_graph(store, road_links, road_nodes)
    if cfg.toll_per_km > 0:
        for link in graph.links.values():
            if link.drivable:
                link.tolled = True
    attach_activity_locations(graph, load_locations(cfg.locations))
    timetable = Timetable(store)
    requests, rejects = ingest_trips(cfg.demand, graph.locations)
    plans = [r.to_plan() for r in requests]
    dta = run_dta_loop(plans, graph, timetable, router_cfg=cfg.router,
                       mix_cfg=cfg.mix, max_iter=cfg.max_iter, seed=cfg.seed,
                       gap_threshold=cfg.gap_threshold,
                       mixed_traffic=cfg.mixed_traffic)
    active = [(p, p.path) for p in dta.plans if p.path is not None]
    router = Router(graph, timetable, dta.profiles, cfg.router)
    result = run_simulation(graph, timetable, active, profiles=dta.profiles,
                            mixed_traffic=cfg.mixed_traffic, router=router)
    report = compute_metrics(result, plans, timetable)
    export_results(report, dta.stats, cfg.out)
    write_event_log(result.events, os.path.join(cfg.out, "events.csv"))
    with open(os.path.join(cfg.out, "rejected_trips.csv"), "w",
              newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["row", "reason"])
        w.writerows(rejects)
    return report, dta, result
