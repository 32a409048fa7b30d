"""Point-to-point, time-dependent, intermodal A* with per-mode link subsets.

Search states carry (node, phase, boarded-before, on-tnc, on-bike) plus
in-vehicle states (trip, stop index).  Because edge costs are time-dependent,
a single label per state is not sufficient: labels form a Pareto front over
(arrival time, generalized cost) and are expanded best-cost-first with an
admissible great-circle heuristic.
"""

import heapq
import itertools
import math
from dataclasses import dataclass, field

from .errors import ModeUnreachable, NoParkingRecord, NoPath
from .geo import haversine_m
from .graph import DRIVING, MICROMOBILITY, TRANSIT, WALKING
from .modes import RouterConfig, mode_rule

EPS = 1e-9


@dataclass
class Leg:
    mode: str                 # walk | bike | drive | tnc | transit
    links: list = field(default_factory=list)
    board_stop: int = -1
    alight_stop: int = -1
    trip_id: int = -1
    start_s: float = 0.0
    end_s: float = 0.0
    wait_s: float = 0.0
    fare: float = 0.0


@dataclass
class Path:
    mode: str
    legs: list
    departure: float
    arrival: float
    gen_cost: float
    fare_total: float
    parked_link: int = -1

    @property
    def boardings(self):
        return sum(1 for leg in self.legs if leg.mode == "transit")

    def uses_transit(self):
        return self.boardings > 0


def link_subsets(location, mode_name, end):
    """Anchor links for one trip end per the mode's layer matrix."""
    rule = mode_rule(mode_name)
    layers = rule.origin_layers if end == "origin" else rule.dest_layers
    anchors = []
    for layer in layers:
        anchors.extend((layer, lid, off) for lid, off in location.anchors(layer))
    if not anchors:
        raise ModeUnreachable(
            f"location {location.location_id} has no {layers} anchors for "
            f"{mode_name} {end}")
    return anchors


class _Label:
    __slots__ = ("state", "time", "cost", "fare", "parent", "edge")

    def __init__(self, state, time, cost, fare, parent, edge):
        self.state = state
        self.time = time
        self.cost = cost
        self.fare = fare
        self.parent = parent
        self.edge = edge


class Router:
    """Read-only over an immutable graph/timetable/profiles snapshot."""

    def __init__(self, graph, timetable, profiles, config=None):
        self.graph = graph
        self.tt = timetable
        self.profiles = profiles
        self.cfg = config or RouterConfig()
        self.v_max = self._compute_v_max()
        self.h_scale = min(1.0, self.cfg.w_walk, self.cfg.w_wait)

    def _compute_v_max(self):
        v = max(self.graph.walk_speed, self.graph.bike_speed)
        for link in self.graph.links.values():
            if link.drivable and link.base_time > 0:
                t = self.profiles.min_time(link.link_id, link.base_time)
                if t > 0:
                    v = max(v, link.length / t)
        v = max(v, self.tt.max_segment_speed())
        return v

    # -- cost pieces --

    def _walk_cost(self, link, on_bike):
        speed = self.graph.bike_speed if on_bike else self.graph.walk_speed
        time = link.length / speed
        return time, self.cfg.w_walk * time

    def _drive_arrival(self, link, t):
        return self.profiles.arrival(link.link_id, t, link.base_time)

    def _toll_fare(self, link):
        if link.tolled and self.cfg.toll_per_km > 0:
            return self.cfg.toll_per_km * link.length / 1000.0
        return 0.0

    def _tnc_link_fare(self, link):
        return (self.cfg.tnc_fare_per_km * link.length / 1000.0
                * (1.0 - self.cfg.fmlm_subsidy))

    # -- main search --

    def route(self, origin, destination, depart, mode_name):
        rule = mode_rule(mode_name)
        cfg = self.cfg
        origin_anchors = link_subsets(origin, mode_name, "origin")
        dest_anchors = link_subsets(destination, mode_name, "destination")

        dest_points = []  # (lat, lon) of anchor feet, for the heuristic
        goal_tails = {}   # node -> list of (tail_time_fn, anchor)
        for layer, lid, off in dest_anchors:
            link = self.graph.links[lid]
            a = self.graph.nodes[link.from_node]
            b = self.graph.nodes[link.to_node]
            frac = off / link.length if link.length > 0 else 0.0
            dest_points.append((a.lat + frac * (b.lat - a.lat),
                                a.lon + frac * (b.lon - a.lon)))
            goal_tails.setdefault(link.from_node, []).append(
                (layer, lid, off, "fwd"))
            if layer in (WALKING, MICROMOBILITY):
                goal_tails.setdefault(link.to_node, []).append(
                    (layer, lid, link.length - off, "rev"))

        h_cache = {}

        def h(node):
            v = h_cache.get(node)
            if v is None:
                n = self.graph.nodes[node]
                d = min(haversine_m(n.lat, n.lon, la, lo)
                        for la, lo in dest_points)
                v = self.h_scale * d / self.v_max
                h_cache[node] = v
            return v

        counter = itertools.count()
        heap = []
        fronts = {}

        def push(label):
            front = fronts.setdefault(label.state, [])
            for (t0, c0) in front:
                if t0 <= label.time + EPS and c0 <= label.cost + EPS:
                    return
            front[:] = [(t0, c0) for (t0, c0) in front
                        if not (label.time <= t0 + EPS and label.cost <= c0 + EPS)]
            front.append((label.time, label.cost))
            node = label.state[1] if label.state[0] == "n" else \
                self.graph.stop_nodes[
                    self.tt.pattern_stops[self.tt.trips[label.state[1]]
                                          .pattern_id][label.state[2]]]
            heapq.heappush(heap, (label.cost + h(node), next(counter), label))

        best = None  # (total_cost, label, tail_edge)

        # direct origin->destination on a shared anchor link
        for layer_o, lid_o, off_o in origin_anchors:
            for layer_d, lid_d, off_d in dest_anchors:
                if lid_o != lid_d or layer_o != layer_d:
                    continue
                link = self.graph.links[lid_o]
                if layer_o in (WALKING, MICROMOBILITY):
                    dist = abs(off_d - off_o)
                    time = dist / self.graph.walk_speed
                    cost = cfg.w_walk * time
                elif off_d >= off_o and link.length > 0:
                    frac = (off_d - off_o) / link.length
                    time = self.profiles.travel_time(
                        lid_o, depart, link.base_time) * frac
                    cost = time + cfg.fare_cost_s(self._toll_fare(link) * frac)
                else:
                    continue
                lab = _Label(("n", -1, 0, False, False, False), depart + time,
                             cost, 0.0, None,
                             ("direct", layer_o, lid_o, off_o, off_d, time))
                if best is None or cost < best[0] - EPS:
                    best = (cost, lab, None)

        # seed the open list from the origin anchors
        for layer, lid, off in origin_anchors:
            link = self.graph.links[lid]
            if layer in (WALKING, MICROMOBILITY):
                for end_node, dist in ((link.from_node, off),
                                       (link.to_node, link.length - off)):
                    time = dist / self.graph.walk_speed
                    push(_Label(("n", end_node, 0, False, False, False),
                                depart + time, cfg.w_walk * time, 0.0, None,
                                ("start", layer, lid, end_node, time)))
            elif layer == DRIVING:
                frac = 1.0 - (off / link.length if link.length > 0 else 0.0)
                time = self.profiles.travel_time(lid, depart,
                                                 link.base_time) * frac
                fare = self._toll_fare(link) * frac
                cost = time + cfg.fare_cost_s(fare)
                on_tnc = False
                if rule.tnc:
                    on_tnc = True
                    fare += cfg.tnc_base_fare * (1.0 - cfg.fmlm_subsidy) \
                        + self._tnc_link_fare(link) * frac - self._toll_fare(link) * frac
                    cost = (cfg.w_wait * cfg.tnc_wait_s + time
                            + cfg.fare_cost_s(fare))
                    time += cfg.tnc_wait_s
                push(_Label(("n", link.to_node, 0, False, on_tnc, False),
                            depart + time, cost, fare, None,
                            ("start", DRIVING, lid, link.to_node, time)))

        while heap:
            f, _, label = heapq.heappop(heap)
            if best is not None and f >= best[0] - EPS:
                break
            kind = label.state[0]
            if kind == "n":
                self._expand_node(label, rule, push, goal_tails, depart)
                cand = self._try_goal(label, rule, goal_tails)
                if cand is not None and (best is None or cand[0] < best[0] - EPS):
                    best = cand
            else:
                self._expand_vehicle(label, push)

        if best is None:
            raise NoPath(f"no {mode_name} path between locations "
                         f"{origin.location_id} and {destination.location_id}")
        return self._build_path(best, mode_name, depart)

    def _try_goal(self, label, rule, goal_tails):
        _, node, phase, hb, on_tnc, on_bike = label.state
        if on_bike:
            return None  # docked vehicle must be dropped first
        allowed = rule.pre_layers if phase == 0 else rule.post_layers
        tails = goal_tails.get(node)
        if not tails:
            return None
        cfg = self.cfg
        best = None
        for layer, lid, dist, sense in tails:
            link = self.graph.links[lid]
            if layer in (WALKING, MICROMOBILITY):
                if WALKING not in allowed and MICROMOBILITY not in allowed:
                    continue
                time = dist / self.graph.walk_speed
                cost = cfg.w_walk * time
                fare = 0.0
            else:  # driving tail, forward only
                if DRIVING not in allowed or sense != "fwd":
                    continue
                frac = dist / link.length if link.length > 0 else 0.0
                time = self.profiles.travel_time(lid, label.time,
                                                 link.base_time) * frac
                fare = self._toll_fare(link) * frac
                if on_tnc:
                    fare = self._tnc_link_fare(link) * frac + self._toll_fare(link) * frac
                cost = time + cfg.fare_cost_s(fare)
            total = label.cost + cost
            if best is None or total < best[0] - EPS:
                best = (total, label, ("end", layer, lid, dist, time, fare))
        return best

    def _expand_node(self, label, rule, push, goal_tails, depart):
        _, node, phase, hb, on_tnc, on_bike = label.state
        cfg = self.cfg
        allowed = rule.pre_layers if phase == 0 else rule.post_layers

        for lid in sorted(self.graph.out_links[node]):
            link = self.graph.links[lid]
            if link.layer in (WALKING,):
                if on_bike:
                    if not link.bikeable:
                        continue
                    time, cost = self._walk_cost(link, True)
                    push(_Label(("n", link.to_node, phase, hb, False, True),
                                label.time + time, label.cost + cost,
                                label.fare, label, ("bike_ride", lid, time)))
                elif WALKING in allowed:
                    time, cost = self._walk_cost(link, False)
                    push(_Label(("n", link.to_node, phase, hb, False, False),
                                label.time + time, label.cost + cost,
                                label.fare, label, ("walk", lid, time)))
            elif link.layer == DRIVING and not on_bike:
                if DRIVING not in allowed:
                    continue
                if link.dedicated_to >= 0:
                    continue  # BRT lane closed to general traffic
                if rule.tnc:
                    wait = 0.0 if on_tnc else cfg.tnc_wait_s
                    t0 = label.time + wait
                    arr = self._drive_arrival(link, t0)
                    fare = self._tnc_link_fare(link) + self._toll_fare(link)
                    if not on_tnc:
                        fare += cfg.tnc_base_fare * (1.0 - cfg.fmlm_subsidy)
                    cost = (cfg.w_wait * wait + (arr - t0)
                            + cfg.fare_cost_s(fare))
                    push(_Label(("n", link.to_node, phase, hb, True, False),
                                arr, label.cost + cost, label.fare + fare,
                                label, ("tnc", lid, arr - t0, wait, fare)))
                else:
                    arr = self._drive_arrival(link, label.time)
                    fare = self._toll_fare(link)
                    cost = (arr - label.time) + cfg.fare_cost_s(fare)
                    push(_Label(("n", link.to_node, phase, hb, False, False),
                                arr, label.cost + cost, label.fare + fare,
                                label, ("drive", lid, arr - label.time, fare)))

        # park: one-way driving -> walking phase change at parking nodes
        if (rule.post_layers and phase == 0
                and node in self.graph.parking_nodes):
            push(_Label(("n", node, 1, hb, False, False), label.time,
                        label.cost, label.fare, label, ("park", node)))

        # board scheduled service
        if (rule.transit and phase == rule.transit_phase and not on_bike
                and not on_tnc and node in self.graph.node_stops):
            stop_id = self.graph.node_stops[node]
            for pid, idx in self.tt.board_positions.get(stop_id, []):
                for dep, trip in self.tt.departures_from(pid, idx, label.time):
                    wait = dep - label.time
                    fare = self.tt.boarding_fare(pid, not hb)
                    cost = (cfg.w_wait * wait + cfg.boarding_penalty_s
                            + (cfg.transfer_penalty_s if hb else 0.0)
                            + cfg.fare_cost_s(fare))
                    push(_Label(("v", trip, idx), dep, label.cost + cost,
                                label.fare + fare, label,
                                ("board", trip, idx, dep, wait, fare)))

        # micromobility dock pick/drop
        if rule.use_docks and node in self.graph.dock_capacity:
            if on_bike:
                push(_Label(("n", node, phase, hb, False, False), label.time,
                            label.cost, label.fare, label, ("drop", node)))
            else:
                push(_Label(("n", node, phase, hb, False, True), label.time,
                            label.cost, label.fare, label, ("pick", node)))

    def _expand_vehicle(self, label, push):
        _, trip, idx = label.state
        ts = self.tt.trips[trip]
        stop_node = self.graph.stop_nodes[ts.stops[idx]]
        # alight (phase/flags restored as post-transit walking state)
        push(_Label(("n", stop_node, self._veh_phase(label), True, False,
                     False), label.time, label.cost, label.fare, label,
                    ("alight", trip, idx)))
        if idx + 1 < len(ts.stops):
            arr = ts.arrivals[idx + 1]
            if arr + EPS >= label.time:
                cost = arr - label.time
                push(_Label(("v", trip, idx + 1), arr, label.cost + cost,
                            label.fare, label, ("ride", trip, idx, idx + 1)))

    @staticmethod
    def _veh_phase(label):
        # phase travels with the label chain; find it from the boarding edge
        lab = label
        while lab is not None:
            if lab.edge and lab.edge[0] == "board":
                return lab.parent.state[2]
            lab = lab.parent
        return 0

    # -- path assembly --

    def _build_path(self, best, mode_name, depart):
        total_cost, label, tail = best
        edges = []
        lab = label
        while lab is not None:
            edges.append((lab.edge, lab.time, lab.fare))
            lab = lab.parent
        edges.reverse()
        if tail is not None:
            edges.append((tail, None, None))

        legs = []
        fare_total = 0.0
        parked_link = -1
        arrival = depart
        t_prev = depart

        def extend(mode, link=None, dt=0.0, wait=0.0, fare=0.0, **kw):
            nonlocal arrival, fare_total, t_prev
            if legs and legs[-1].mode == mode and mode in ("walk", "bike",
                                                           "drive", "tnc"):
                leg = legs[-1]
            else:
                leg = Leg(mode, start_s=t_prev, **kw)
                legs.append(leg)
            if link is not None:
                leg.links.append(link)
            leg.wait_s += wait
            leg.fare += fare
            fare_total += fare
            t_prev += dt + wait
            leg.end_s = t_prev
            arrival = t_prev

        board_info = None
        for edge, etime, _ in edges:
            if edge is None:
                continue
            kind = edge[0]
            if kind == "start":
                _, layer, lid, _, time = edge
                if layer not in (WALKING, MICROMOBILITY) \
                        and not mode_rule(mode_name).tnc:
                    parked_link = lid
                extend("walk" if layer in (WALKING, MICROMOBILITY)
                       else ("tnc" if mode_rule(mode_name).tnc else "drive"),
                       lid, time)
            elif kind == "walk":
                extend("walk", edge[1], edge[2])
            elif kind == "bike_ride":
                extend("bike", edge[1], edge[2])
            elif kind == "drive":
                extend("drive", edge[1], edge[2], fare=edge[3])
                parked_link = edge[1]
            elif kind == "tnc":
                extend("tnc", edge[1], edge[2], wait=edge[3], fare=edge[4])
            elif kind == "board":
                _, trip, idx, dep, wait, fare = edge
                ts = self.tt.trips[trip]
                board_info = (trip, idx, wait, fare)
                t_prev = dep - wait
            elif kind == "ride":
                pass
            elif kind == "alight":
                _, trip, idx = edge
                ts = self.tt.trips[trip]
                b_trip, b_idx, wait, fare = board_info
                leg = Leg("transit", links=[], board_stop=ts.stops[b_idx],
                          alight_stop=ts.stops[idx], trip_id=trip,
                          start_s=t_prev, end_s=etime, wait_s=wait, fare=fare)
                legs.append(leg)
                fare_total += fare
                t_prev = etime
                arrival = etime
            elif kind in ("park", "pick", "drop"):
                pass
            elif kind == "direct":
                _, layer, lid, off_o, off_d, time = edge
                if layer not in (WALKING, MICROMOBILITY):
                    parked_link = lid
                extend("walk" if layer in (WALKING, MICROMOBILITY) else "drive",
                       lid, time)
            elif kind == "end":
                _, layer, lid, dist, time, fare = edge
                if layer not in (WALKING, MICROMOBILITY) \
                        and not mode_rule(mode_name).tnc:
                    parked_link = lid
                extend("walk" if layer in (WALKING, MICROMOBILITY)
                       else ("tnc" if mode_rule(mode_name).tnc else "drive"),
                       lid, time, fare=fare)

        return Path(mode_name, legs, depart, arrival, total_cost, fare_total,
                    parked_link)

    def route_drive_after_transit(self, origin, destination, depart,
                                  parked_link):
        """Stage 1: walk+transit to the parked car; stage 2: drive on."""
        if parked_link is None or parked_link < 0 \
                or parked_link not in self.graph.links:
            raise NoParkingRecord("no recorded parking link")
        link = self.graph.links[parked_link]
        node = self.graph.nodes[link.to_node]
        anchors = self.graph_anchor_point(node.lat, node.lon)
        park_loc_walk = _PseudoLocation(-1, node.lat, node.lon,
                                        walk=anchors[WALKING],
                                        drive=[(parked_link, link.length)])
        stage1 = self.route(origin, park_loc_walk, depart, "walk_transit")
        park_loc_drive = _PseudoLocation(-2, node.lat, node.lon,
                                         drive=[(parked_link, link.length)])
        stage2 = self.route(park_loc_drive, destination, stage1.arrival, "car")
        legs = stage1.legs + stage2.legs
        return Path("drive_after_transit", legs, depart, stage2.arrival,
                    stage1.gen_cost + stage2.gen_cost,
                    stage1.fare_total + stage2.fare_total)

    def route_from_point(self, lat, lon, destination, depart, mode_name):
        """Route from an arbitrary coordinate (e.g. a mid-trip position)."""
        anchors = self.graph_anchor_point(lat, lon)
        origin = _PseudoLocation(-1, lat, lon, walk=anchors[WALKING],
                                 bike=anchors[MICROMOBILITY],
                                 drive=anchors[DRIVING])
        return self.route(origin, destination, depart, mode_name)

    def graph_anchor_point(self, lat, lon, k=4, radius=1000.0):
        from .geo import point_segment_projection, to_local_xy
        out = {WALKING: [], MICROMOBILITY: [], DRIVING: []}
        preds = {WALKING: lambda l: l.walkable and not l.virtual,
                 MICROMOBILITY: lambda l: l.bikeable and not l.virtual,
                 DRIVING: lambda l: l.drivable}
        for layer, pred in preds.items():
            scored = []
            for lid in sorted(self.graph.links):
                link = self.graph.links[lid]
                if link.virtual or not pred(link):
                    continue
                a = self.graph.nodes[link.from_node]
                b = self.graph.nodes[link.to_node]
                ax, ay = to_local_xy(a.lat, a.lon, lat, lon)
                bx, by = to_local_xy(b.lat, b.lon, lat, lon)
                t, _, _, dist = point_segment_projection(0, 0, ax, ay, bx, by)
                if dist <= radius:
                    scored.append((dist, lid, t * link.length))
            scored.sort(key=lambda s: (s[0], s[1]))
            out[layer] = [(lid, off) for _, lid, off in scored[:k]]
        return out


class _PseudoLocation:
    def __init__(self, location_id, lat, lon, walk=None, bike=None, drive=None):
        self.location_id = location_id
        self.lat = lat
        self.lon = lon
        self.walk_anchors = walk or []
        self.bike_anchors = bike or []
        self.drive_anchors = drive or []

    def anchors(self, layer):
        return {WALKING: self.walk_anchors, MICROMOBILITY: self.bike_anchors,
                DRIVING: self.drive_anchors}[layer]
