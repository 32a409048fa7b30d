"""Integrated multimodal graph: walk layer derivation, stop/dock projection,
bus pattern mapping onto the driving network, and activity-location anchoring."""

import csv
import heapq
import math
import os
from dataclasses import dataclass, field

from .errors import (DisconnectedTransitNode, NoCandidateLink, NoDrivingPath,
                     UnanchoredLocation, UnmappableStop)
from .geo import haversine_m, point_segment_projection, to_local_xy
from .gtfs import MIXED_TRAFFIC_MODES
from .roads import NON_WALKABLE_CLASSES
from .store import AccessLinkRow, PatternMappingRow

DRIVING = "driving"
WALKING = "walking"
MICROMOBILITY = "micromobility"
TRANSIT = "transit"

DEFAULT_STOP_RADIUS_M = 500.0
DEFAULT_DOCK_RADIUS_M = 300.0
DEFAULT_LOCATION_RADIUS_M = 1000.0
PARKING_TRANSIT_RADIUS_M = 100.0
FOOT_MERGE_TOLERANCE_M = 1.0


@dataclass
class GNode:
    node_id: int
    layer: str
    lat: float
    lon: float


@dataclass
class GLink:
    link_id: int
    from_node: int
    to_node: int
    layer: str
    length: float
    base_time: float
    capacity_per_h: float = 0.0
    pattern_id: int = -1
    walkable: bool = False
    bikeable: bool = False
    drivable: bool = False
    virtual: bool = False
    dedicated_to: int = -1  # BRT route id; -1 = general traffic
    tolled: bool = False
    road_class: str = ""


@dataclass
class TriggerPoint:
    pattern_id: int
    seq: int
    driving_link: int
    offset: float       # meters along the driving link
    path_offset: float  # cumulative meters along the mapped path
    stop_node: int


@dataclass
class PatternDrivingMap:
    pattern_id: int
    link_path: list      # ordered driving link ids
    triggers: list       # TriggerPoint, in stop order
    start_offset: float  # meters into link_path[0] where the run starts


@dataclass
class ActivityLocation:
    location_id: int
    lat: float
    lon: float
    walk_anchors: list = field(default_factory=list)   # (link_id, offset_m)
    bike_anchors: list = field(default_factory=list)
    drive_anchors: list = field(default_factory=list)

    def anchors(self, layer):
        return {WALKING: self.walk_anchors, MICROMOBILITY: self.bike_anchors,
                DRIVING: self.drive_anchors}[layer]


class MultimodalGraph:
    def __init__(self, walk_speed=1.3, bike_speed=4.0):
        self.nodes = {}
        self.links = {}
        self.out_links = {}
        self.in_links = {}
        self.stop_nodes = {}    # transit stop_id -> node_id
        self.node_stops = {}    # node_id -> transit stop_id
        self.dock_nodes = {}    # dock id -> node_id
        self.dock_capacity = {}
        self.dock_initial = {}
        self.parking_nodes = set()
        self.locations = {}
        self.pattern_maps = {}  # pattern_id -> PatternDrivingMap
        self.road_node_ids = {}
        self.walk_speed = walk_speed
        self.bike_speed = bike_speed
        self._next_node = 0
        self._next_link = 0

    # -- construction primitives --

    def add_node(self, layer, lat, lon):
        nid = self._next_node
        self._next_node += 1
        self.nodes[nid] = GNode(nid, layer, lat, lon)
        self.out_links[nid] = []
        self.in_links[nid] = []
        return nid

    def add_link(self, frm, to, layer, length, base_time, **kw):
        lid = self._next_link
        self._next_link += 1
        link = GLink(lid, frm, to, layer, round(length, 2), base_time, **kw)
        self.links[lid] = link
        self.out_links[frm].append(lid)
        self.in_links[to].append(lid)
        return lid

    def remove_link(self, lid):
        link = self.links.pop(lid)
        self.out_links[link.from_node].remove(lid)
        self.in_links[link.to_node].remove(lid)

    def node_pos(self, nid):
        n = self.nodes[nid]
        return n.lat, n.lon

    # -- projection / bisection --

    def _candidate_links(self, lat, lon, predicate, radius):
        """(distance, t, link_id) of the best projection target, or None."""
        best = None
        for lid in sorted(self.links):
            link = self.links[lid]
            if link.virtual or not predicate(link):
                continue
            a = self.nodes[link.from_node]
            b = self.nodes[link.to_node]
            ax, ay = to_local_xy(a.lat, a.lon, lat, lon)
            bx, by = to_local_xy(b.lat, b.lon, lat, lon)
            t, _, _, dist = point_segment_projection(0.0, 0.0, ax, ay, bx, by)
            if dist > radius:
                continue
            if best is None or (dist, lid) < (best[0], best[2]):
                best = (dist, t, lid)
        return best

    def _split_at(self, lid, t):
        """Bisect link lid (and its reverse twin) at fraction t; return foot node.

        Feet within 1 m of an existing endpoint reuse that node (no bisection).
        """
        link = self.links[lid]
        along = t * link.length
        if along <= FOOT_MERGE_TOLERANCE_M:
            return link.from_node
        if link.length - along <= FOOT_MERGE_TOLERANCE_M:
            return link.to_node

        a = self.nodes[link.from_node]
        b = self.nodes[link.to_node]
        lat = a.lat + t * (b.lat - a.lat)
        lon = a.lon + t * (b.lon - a.lon)
        foot = self.add_node(link.layer, lat, lon)

        twin = self._find_twin(link)
        for l, frac in ((link, t), (twin, 1.0 - t)) if twin else ((link, t),):
            kw = dict(capacity_per_h=l.capacity_per_h, walkable=l.walkable,
                      bikeable=l.bikeable, drivable=l.drivable,
                      dedicated_to=l.dedicated_to, tolled=l.tolled,
                      road_class=l.road_class)
            self.add_link(l.from_node, foot, l.layer, l.length * frac,
                          l.base_time * frac, **kw)
            self.add_link(foot, l.to_node, l.layer, l.length * (1.0 - frac),
                          l.base_time * (1.0 - frac), **kw)
            self.remove_link(l.link_id)
        return foot

    def _find_twin(self, link):
        for lid in self.out_links[link.to_node]:
            other = self.links[lid]
            if (other.to_node == link.from_node and other.layer == link.layer
                    and abs(other.length - link.length) < 1e-6):
                return other
        return None

    def project_point(self, lat, lon, radius, predicate=None):
        """Project a point onto the nearest matching link; bisect and return
        (foot_node, distance_m).  Raises NoCandidateLink when nothing is in
        range."""
        predicate = predicate or (lambda l: l.walkable)
        best = self._candidate_links(lat, lon, predicate, radius)
        if best is None:
            raise NoCandidateLink(f"no link within {radius} m of ({lat}, {lon})")
        dist, t, lid = best
        foot = self._split_at(lid, t)
        return foot, dist

    def attach_with_access_link(self, node, lat, lon, radius, predicate=None):
        """Project and connect node to the walking layer via a virtual link pair."""
        foot, dist = self.project_point(lat, lon, radius, predicate)
        length = round(dist, 2)
        tt = length / self.walk_speed
        self.add_link(node, foot, WALKING, length, tt, walkable=True,
                      bikeable=True, virtual=True)
        self.add_link(foot, node, WALKING, length, tt, walkable=True,
                      bikeable=True, virtual=True)
        return foot, length

    # -- shortest path on the driving layer (free flow) --

    def driving_shortest_path(self, from_node, to_node, exclude_dedicated=None):
        """Free-flow Dijkstra over drivable links; returns ordered link ids."""
        if from_node == to_node:
            return []
        dist = {from_node: 0.0}
        prev = {}
        heap = [(0.0, from_node)]
        while heap:
            d, u = heapq.heappop(heap)
            if u == to_node:
                break
            if d > dist.get(u, math.inf):
                continue
            for lid in sorted(self.out_links[u]):
                link = self.links[lid]
                if not link.drivable:
                    continue
                if (exclude_dedicated is not None and link.dedicated_to >= 0
                        and link.dedicated_to != exclude_dedicated):
                    continue
                nd = d + link.base_time
                if nd < dist.get(link.to_node, math.inf):
                    dist[link.to_node] = nd
                    prev[link.to_node] = lid
                    heapq.heappush(heap, (nd, link.to_node))
        if to_node not in prev and to_node != from_node:
            raise NoDrivingPath(f"no driving path {from_node} -> {to_node}")
        path = []
        u = to_node
        while u != from_node:
            lid = prev[u]
            path.append(lid)
            u = self.links[lid].from_node
        path.reverse()
        return path


def derive_walk_layer(graph, road_links, road_nodes, extra_walk_links=None):
    """Create driving nodes/links and copy walkable ones into the walking layer."""
    for rn in road_nodes:
        graph.road_node_ids[rn.id] = graph.add_node(DRIVING, rn.lat, rn.lon)
    for rl in road_links:
        u = graph.road_node_ids[rl.from_node]
        v = graph.road_node_ids[rl.to_node]
        tt = rl.length / rl.ff_speed
        dirs = [(u, v)] if rl.oneway else [(u, v), (v, u)]
        walkable = rl.road_class not in NON_WALKABLE_CLASSES
        for a, b in dirs:
            graph.add_link(a, b, DRIVING, rl.length, tt,
                           capacity_per_h=rl.capacity_per_h, drivable=True,
                           road_class=rl.road_class)
        if walkable:
            wt = rl.length / graph.walk_speed
            for a, b in [(u, v), (v, u)]:
                graph.add_link(a, b, WALKING, rl.length, wt, walkable=True,
                               bikeable=True, road_class=rl.road_class)
    if extra_walk_links:
        for frm, to, length in extra_walk_links:
            u = graph.road_node_ids[frm]
            v = graph.road_node_ids[to]
            wt = length / graph.walk_speed
            graph.add_link(u, v, WALKING, length, wt, walkable=True, bikeable=True)
            graph.add_link(v, u, WALKING, length, wt, walkable=True, bikeable=True)
    return graph


@dataclass
class ConnectReport:
    disconnected_stops: list = field(default_factory=list)
    walk_access_rows: list = field(default_factory=list)
    bike_access_rows: list = field(default_factory=list)


def connect_layers(graph, store, docks=None, stop_radius=DEFAULT_STOP_RADIUS_M,
                   dock_radius=DEFAULT_DOCK_RADIUS_M, strict=False):
    """Project transit stops and micromobility docks onto the walking layer and
    add schedule-bearing transit links.  Returns a ConnectReport."""
    report = ConnectReport()

    for stop in store.stops:
        nid = graph.add_node(TRANSIT, stop.lat, stop.lon)
        graph.stop_nodes[stop.stop_id] = nid
        graph.node_stops[nid] = stop.stop_id
        try:
            _, length = graph.attach_with_access_link(
                nid, stop.lat, stop.lon, stop_radius)
            report.walk_access_rows.append(AccessLinkRow(stop.stop_id, nid, length))
        except NoCandidateLink:
            report.disconnected_stops.append(stop.stop_id)

    for link in store.links:
        u = graph.stop_nodes[link.from_stop]
        v = graph.stop_nodes[link.to_stop]
        graph.add_link(u, v, TRANSIT, link.length, 0.0, pattern_id=link.pattern_id)

    if docks:
        for dock in docks:
            nid = graph.add_node(MICROMOBILITY, dock["lat"], dock["lon"])
            graph.dock_nodes[dock["id"]] = nid
            graph.dock_capacity[nid] = int(dock.get("capacity", 10))
            graph.dock_initial[nid] = int(dock.get("bikes", 5))
            try:
                _, length = graph.attach_with_access_link(
                    nid, dock["lat"], dock["lon"], dock_radius)
                report.bike_access_rows.append(AccessLinkRow(nid, nid, length))
            except NoCandidateLink:
                report.disconnected_stops.append(f"dock:{dock['id']}")

    if strict and report.disconnected_stops:
        raise DisconnectedTransitNode(
            f"disconnected transit/micromobility nodes: "
            f"{report.disconnected_stops}")

    store.walk_access = report.walk_access_rows
    store.bike_access = report.bike_access_rows
    return report


def flag_parking_nodes(graph, parking_road_nodes):
    """Parking transfer nodes: flagged road nodes within 100 m of a transit node."""
    transit_nodes = [graph.nodes[n] for n in graph.node_stops]
    for raw_id in parking_road_nodes:
        nid = graph.road_node_ids.get(raw_id)
        if nid is None:
            continue
        node = graph.nodes[nid]
        for tn in transit_nodes:
            if haversine_m(node.lat, node.lon, tn.lat, tn.lon) \
                    <= PARKING_TRANSIT_RADIUS_M:
                graph.parking_nodes.add(nid)
                break


def map_pattern_to_driving(graph, store, pattern_id, radius=DEFAULT_STOP_RADIUS_M):
    """Project each stop of a bus pattern onto the driving layer and join
    consecutive projections by free-flow shortest paths.  Returns a
    PatternDrivingMap; rail/non-bus patterns are skipped by the caller."""
    stop_seq = store.pattern_stop_sequence(pattern_id)
    stops_by_id = store.stops_by_id()
    route_id = next(p.route_id for p in store.patterns
                    if p.pattern_id == pattern_id)

    projections = []
    for sid in stop_seq:
        stop = stops_by_id[sid]
        best = graph._candidate_links(stop.lat, stop.lon,
                                      lambda l: l.drivable, radius)
        if best is None:
            raise UnmappableStop(f"stop {sid} has no drivable link in range")
        _, t, lid = best
        projections.append((lid, t * graph.links[lid].length, sid))

    link_path = [projections[0][0]]
    triggers = []
    cum_base = 0.0
    start_offset = projections[0][1]
    prev_lid, prev_off, _ = projections[0]
    for seq, (lid, off, sid) in enumerate(projections):
        if seq > 0:
            if lid == prev_lid and off >= prev_off:
                pass  # same link, forward: nothing to join
            else:
                mid = graph.driving_shortest_path(
                    graph.links[prev_lid].to_node, graph.links[lid].from_node,
                    exclude_dedicated=route_id)
                cum_base += graph.links[prev_lid].length
                for m in mid:
                    link_path.append(m)
                    cum_base += graph.links[m].length
                link_path.append(lid)
            prev_lid, prev_off = lid, off
        triggers.append(TriggerPoint(pattern_id, seq, lid, round(off, 2),
                                     round(cum_base + off, 2),
                                     graph.stop_nodes[sid]))

    for a, b in zip(triggers, triggers[1:]):
        if b.path_offset <= a.path_offset:
            raise NoDrivingPath(
                f"pattern {pattern_id}: trigger offsets not increasing "
                f"({a.path_offset} -> {b.path_offset})")
    return PatternDrivingMap(pattern_id, link_path, triggers, start_offset)


def map_bus_patterns(graph, store, radius=DEFAULT_STOP_RADIUS_M):
    """Map every mixed-traffic-capable pattern; fill the store mapping table."""
    mode_of_route = {r.route_id: r.mode for r in store.routes}
    store.pattern_mapping = []
    for p in sorted(store.patterns, key=lambda p: p.pattern_id):
        if mode_of_route.get(p.route_id) not in MIXED_TRAFFIC_MODES:
            continue  # trains run on the non-congestable layer
        pm = map_pattern_to_driving(graph, store, p.pattern_id, radius)
        graph.pattern_maps[p.pattern_id] = pm
        for tp in pm.triggers:
            store.pattern_mapping.append(PatternMappingRow(
                p.pattern_id, tp.seq, tp.driving_link, tp.offset))
    return graph.pattern_maps


def attach_activity_locations(graph, locations, k=4,
                              radius=DEFAULT_LOCATION_RADIUS_M):
    """Anchor each location to its nearest-k links per layer."""
    for loc in locations:
        selections = {
            WALKING: lambda l: l.walkable and not l.virtual,
            MICROMOBILITY: lambda l: l.bikeable and not l.virtual,
            DRIVING: lambda l: l.drivable,
        }
        found_any = False
        for layer, predicate in selections.items():
            scored = []
            for lid in sorted(graph.links):
                link = graph.links[lid]
                if link.virtual or not predicate(link):
                    continue
                a = graph.nodes[link.from_node]
                b = graph.nodes[link.to_node]
                ax, ay = to_local_xy(a.lat, a.lon, loc.lat, loc.lon)
                bx, by = to_local_xy(b.lat, b.lon, loc.lat, loc.lon)
                t, _, _, dist = point_segment_projection(0, 0, ax, ay, bx, by)
                if dist <= radius:
                    scored.append((dist, lid, t * link.length))
            scored.sort(key=lambda s: (s[0], s[1]))
            anchors = [(lid, round(off, 2)) for _, lid, off in scored[:k]]
            loc.anchors(layer)[:] = anchors
            if anchors:
                found_any = True
        if not found_any:
            raise UnanchoredLocation(
                f"location {loc.location_id} has no links within {radius} m")
        graph.locations[loc.location_id] = loc
    return locations


def connected_components(graph):
    parent = {n: n for n in graph.nodes}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for link in graph.links.values():
        a, b = find(link.from_node), find(link.to_node)
        if a != b:
            parent[a] = b
    comps = {}
    for n in graph.nodes:
        comps.setdefault(find(n), []).append(n)
    return list(comps.values())


def check_transit_connectivity(graph):
    """Transit nodes not in the main walking component, as a list."""
    comps = connected_components(graph)
    walk_comp = None
    best_size = -1
    for comp in comps:
        walk_nodes = sum(1 for n in comp if graph.nodes[n].layer == DRIVING)
        if walk_nodes > best_size:
            best_size = walk_nodes
            walk_comp = set(comp)
    return sorted(n for n in graph.node_stops if n not in walk_comp)


def build_graph(store, road_links, road_nodes, docks=None, parking=None,
                extra_walk_links=None, strict=False,
                stop_radius=DEFAULT_STOP_RADIUS_M, walk_speed=1.3,
                bike_speed=4.0):
    """Full build: walk layer, projections, transit links, mapping, parking."""
    graph = MultimodalGraph(walk_speed=walk_speed, bike_speed=bike_speed)
    derive_walk_layer(graph, road_links, road_nodes, extra_walk_links)
    connect_layers(graph, store, docks=docks, stop_radius=stop_radius,
                   strict=strict)
    if parking:
        flag_parking_nodes(graph, parking)
    map_bus_patterns(graph, store, radius=stop_radius)
    if strict:
        stranded = check_transit_connectivity(graph)
        if stranded:
            raise DisconnectedTransitNode(f"transit nodes {stranded} are "
                                          f"not connected to the walking layer")
    return graph


# -- persistence (CSV directory dump) --

def save_graph(graph, path):
    os.makedirs(path, exist_ok=True)

    def w(name, header, rows):
        with open(os.path.join(path, name + ".csv"), "w", newline="") as fh:
            cw = csv.writer(fh)
            cw.writerow(header)
            cw.writerows(rows)

    w("nodes", ["node_id", "layer", "lat", "lon"],
      [(n.node_id, n.layer, repr(n.lat), repr(n.lon))
       for n in graph.nodes.values()])
    w("links", ["link_id", "from_node", "to_node", "layer", "length",
                "base_time", "capacity_per_h", "pattern_id", "walkable",
                "bikeable", "drivable", "virtual", "dedicated_to", "tolled",
                "road_class"],
      [(l.link_id, l.from_node, l.to_node, l.layer, repr(l.length),
        repr(l.base_time), repr(l.capacity_per_h), l.pattern_id,
        int(l.walkable), int(l.bikeable), int(l.drivable), int(l.virtual),
        l.dedicated_to, int(l.tolled), l.road_class)
       for l in graph.links.values()])
    w("stop_nodes", ["stop_id", "node_id"], sorted(graph.stop_nodes.items()))
    w("dock_nodes", ["dock_id", "node_id", "capacity", "bikes"],
      [(d, n, graph.dock_capacity[n], graph.dock_initial[n])
       for d, n in sorted(graph.dock_nodes.items())])
    w("parking_nodes", ["node_id"], [(n,) for n in sorted(graph.parking_nodes)])
    w("road_nodes", ["road_id", "node_id"], sorted(graph.road_node_ids.items()))
    w("locations", ["location_id", "lat", "lon", "layer", "link_id", "offset"],
      [(loc.location_id, repr(loc.lat), repr(loc.lon), layer, lid, repr(off))
       for loc in graph.locations.values()
       for layer in (WALKING, MICROMOBILITY, DRIVING)
       for lid, off in loc.anchors(layer)])
    w("pattern_paths", ["pattern_id", "seq", "link_id"],
      [(pid, i, lid) for pid, pm in sorted(graph.pattern_maps.items())
       for i, lid in enumerate(pm.link_path)])
    w("pattern_triggers", ["pattern_id", "seq", "driving_link", "offset",
                           "path_offset", "stop_node", "start_offset"],
      [(pid, tp.seq, tp.driving_link, repr(tp.offset), repr(tp.path_offset),
        tp.stop_node, repr(pm.start_offset))
       for pid, pm in sorted(graph.pattern_maps.items())
       for tp in pm.triggers])
    with open(os.path.join(path, "meta.csv"), "w", newline="") as fh:
        cw = csv.writer(fh)
        cw.writerow(["walk_speed", "bike_speed"])
        cw.writerow([repr(graph.walk_speed), repr(graph.bike_speed)])


def load_graph(path):
    def rows(name):
        with open(os.path.join(path, name + ".csv"), newline="") as fh:
            return list(csv.DictReader(fh))

    meta = rows("meta")[0]
    graph = MultimodalGraph(walk_speed=float(meta["walk_speed"]),
                            bike_speed=float(meta["bike_speed"]))
    for r in rows("nodes"):
        nid = int(r["node_id"])
        graph.nodes[nid] = GNode(nid, r["layer"], float(r["lat"]),
                                 float(r["lon"]))
        graph.out_links[nid] = []
        graph.in_links[nid] = []
        graph._next_node = max(graph._next_node, nid + 1)
    for r in rows("links"):
        lid = int(r["link_id"])
        link = GLink(lid, int(r["from_node"]), int(r["to_node"]), r["layer"],
                     float(r["length"]), float(r["base_time"]),
                     float(r["capacity_per_h"]), int(r["pattern_id"]),
                     bool(int(r["walkable"])), bool(int(r["bikeable"])),
                     bool(int(r["drivable"])), bool(int(r["virtual"])),
                     int(r["dedicated_to"]), bool(int(r["tolled"])),
                     r["road_class"])
        graph.links[lid] = link
        graph.out_links[link.from_node].append(lid)
        graph.in_links[link.to_node].append(lid)
        graph._next_link = max(graph._next_link, lid + 1)
    for r in rows("stop_nodes"):
        graph.stop_nodes[int(r["stop_id"])] = int(r["node_id"])
        graph.node_stops[int(r["node_id"])] = int(r["stop_id"])
    for r in rows("dock_nodes"):
        nid = int(r["node_id"])
        graph.dock_nodes[r["dock_id"]] = nid
        graph.dock_capacity[nid] = int(r["capacity"])
        graph.dock_initial[nid] = int(r["bikes"])
    for r in rows("parking_nodes"):
        graph.parking_nodes.add(int(r["node_id"]))
    for r in rows("road_nodes"):
        graph.road_node_ids[r["road_id"]] = int(r["node_id"])
    for r in rows("locations"):
        lid = int(r["location_id"])
        if lid not in graph.locations:
            graph.locations[lid] = ActivityLocation(lid, float(r["lat"]),
                                                    float(r["lon"]))
        graph.locations[lid].anchors(r["layer"]).append(
            (int(r["link_id"]), float(r["offset"])))
    paths = {}
    for r in rows("pattern_paths"):
        paths.setdefault(int(r["pattern_id"]), []).append(
            (int(r["seq"]), int(r["link_id"])))
    trig = {}
    starts = {}
    for r in rows("pattern_triggers"):
        pid = int(r["pattern_id"])
        trig.setdefault(pid, []).append(TriggerPoint(
            pid, int(r["seq"]), int(r["driving_link"]), float(r["offset"]),
            float(r["path_offset"]), int(r["stop_node"])))
        starts[pid] = float(r["start_offset"])
    for pid, seq in paths.items():
        link_path = [lid for _, lid in sorted(seq)]
        triggers = sorted(trig.get(pid, []), key=lambda t: t.seq)
        graph.pattern_maps[pid] = PatternDrivingMap(pid, link_path, triggers,
                                                    starts.get(pid, 0.0))
    return graph
