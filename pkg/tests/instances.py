"""Random small multimodal instances with integer times, for oracle checks."""

import math
import random

from transitkit.graph import DRIVING, WALKING, ActivityLocation, MultimodalGraph
from transitkit.geo import haversine_m
from transitkit.store import (NetworkStore, TransitAgency, TransitLink,
                              TransitPattern, TransitPatternLink, TransitRoute,
                              TransitScheduleRow, TransitStop, TransitTrip)
from transitkit.timetable import Timetable

LAT0, LON0 = 41.88, -87.63
M_PER_DEG_LAT = 111194.93


def _pos(rng, box_m):
    dx = rng.uniform(-box_m, box_m)
    dy = rng.uniform(-box_m, box_m)
    lat = LAT0 + dy / M_PER_DEG_LAT
    lon = LON0 + dx / (M_PER_DEG_LAT * math.cos(math.radians(LAT0)))
    return lat, lon


def random_instance(seed, max_nodes=12, max_trips=5, box_m=600):
    """Graph + store + timetable + origin/dest with all-integer times.

    Walk speed is 1 m/s and link lengths are integers, so every event in the
    instance happens on a whole second (the time-expanded oracle needs that).
    """
    rng = random.Random(seed)
    graph = MultimodalGraph(walk_speed=1.0, bike_speed=4.0)
    n = rng.randint(5, max_nodes)
    for _ in range(n):
        lat, lon = _pos(rng, box_m)
        graph.add_node(DRIVING, lat, lon)

    def add_walk(u, v):
        a, b = graph.nodes[u], graph.nodes[v]
        length = int(math.ceil(haversine_m(a.lat, a.lon, b.lat, b.lon))) \
            + rng.randint(0, 40)
        graph.add_link(u, v, WALKING, length, length / graph.walk_speed,
                       walkable=True, bikeable=True)
        graph.add_link(v, u, WALKING, length, length / graph.walk_speed,
                       walkable=True, bikeable=True)

    order = list(range(n))
    rng.shuffle(order)
    for u, v in zip(order, order[1:]):
        add_walk(u, v)
    existing = {(l.from_node, l.to_node) for l in graph.links.values()}
    for _ in range(rng.randint(0, n)):
        u, v = rng.sample(range(n), 2)
        if (u, v) not in existing:
            add_walk(u, v)
            existing.add((u, v))
            existing.add((v, u))

    store = NetworkStore()
    store.agencies.append(TransitAgency(0, "A", "A"))
    store.routes.append(TransitRoute(0, "R0", 0, 3, "bus"))
    n_patterns = rng.randint(1, 2)
    trips_left = rng.randint(1, max_trips)
    next_link = 0
    next_trip = 0
    stop_of_node = {}
    for pid in range(n_patterns):
        stops = rng.sample(range(n), rng.randint(2, min(4, n)))
        stop_ids = []
        for node in stops:
            if node not in stop_of_node:
                sid = len(stop_of_node)
                stop_of_node[node] = sid
                nd = graph.nodes[node]
                store.stops.append(TransitStop(sid, str(sid), str(sid), 0,
                                               nd.lat, nd.lon))
                graph.stop_nodes[sid] = node
                graph.node_stops[node] = sid
            stop_ids.append(stop_of_node[node])
        store.patterns.append(TransitPattern(pid, 0, len(stop_ids) - 1))
        lengths = []
        for seq, (a, b) in enumerate(zip(stop_ids, stop_ids[1:])):
            na = graph.nodes[graph.stop_nodes[a]]
            nb = graph.nodes[graph.stop_nodes[b]]
            length = round(haversine_m(na.lat, na.lon, nb.lat, nb.lon), 2)
            store.links.append(TransitLink(next_link, a, b, pid, length))
            store.pattern_links.append(TransitPatternLink(pid, seq, next_link))
            lengths.append(length)
            next_link += 1
        n_trips_here = max(1, trips_left // (n_patterns - pid))
        trips_left -= n_trips_here
        for _ in range(n_trips_here):
            t = rng.randint(0, 900)
            store.trips.append(TransitTrip(next_trip, str(next_trip), pid))
            for seq, sid in enumerate(stop_ids):
                if seq > 0:
                    speed = rng.uniform(4.0, 15.0)
                    t += max(1, int(math.ceil(lengths[seq - 1] / speed)))
                arr = t
                dep = t + rng.randint(0, 30)
                t = dep
                store.schedule.append(
                    TransitScheduleRow(next_trip, seq, sid, float(arr),
                                       float(dep)))
            next_trip += 1

    ttbl = Timetable(store)
    origin, dest = rng.sample(range(n), 2)

    def loc_for(node, loc_id):
        lid = next(l for l in sorted(graph.out_links[node])
                   if graph.links[l].layer == WALKING)
        nd = graph.nodes[node]
        loc = ActivityLocation(loc_id, nd.lat, nd.lon)
        loc.walk_anchors.append((lid, 0.0))
        return loc

    depart = rng.randint(0, 300)
    return {
        "graph": graph, "store": store, "timetable": ttbl,
        "origin_node": origin, "dest_node": dest,
        "origin": loc_for(origin, 0), "dest": loc_for(dest, 1),
        "depart": depart,
        "horizon": 6000,
    }
