"""Event-driven simulation of travelers and transit vehicles.

Vehicles follow their schedule exactly, or, for buses when mixed traffic is
on, follow a road-layer twin whose trigger points pace the transit-layer
arrivals.  Travelers move link by link, wait at stops, and board under seat
and standing capacity with FIFO order; rejected travelers re-route.
"""

import csv
import heapq
from dataclasses import dataclass, field

from .errors import MappingExhausted, NoPath, ModeUnreachable
from .modes import mode_rule

DEFAULT_BIN_S = 900
DEFAULT_HORIZON_S = 30 * 3600

# seated, standing per vehicle by service mode
VEHICLE_CAPACITY = {
    "bus": (35, 35),
    "trolleybus": (35, 35),
    "metro": (40, 80),
    "rail": (40, 80),
    "tram": (40, 80),
}
DEFAULT_CAPACITY = (35, 35)

BOARD_S = 2.0    # dwell per boarding, twin mode
ALIGHT_S = 1.5   # dwell per alighting, twin mode

# events at equal times: traveler movement, then alighting, then boarding
PRI_TRAVELER = 0
PRI_ARRIVE = 1
PRI_DEPART = 2


@dataclass
class TravelerRecord:
    traveler_id: int
    depart_s: float
    arrive_s: float = -1.0
    wait_s: float = 0.0
    boardings: int = 0
    rejections: int = 0
    status: str = "active"   # active | done | failed


@dataclass
class TripStats:
    trip_id: int
    boardings: int = 0
    alightings: int = 0
    max_load: int = 0


@dataclass
class SimulationResult:
    events: list
    link_volumes: dict            # (link_id, bin) -> count
    traveler_records: dict        # traveler_id -> TravelerRecord
    trip_stats: dict              # trip_id -> TripStats
    bin_s: int = DEFAULT_BIN_S

    def experienced(self, traveler_id):
        rec = self.traveler_records[traveler_id]
        if rec.status != "done":
            return float("inf")
        return rec.arrive_s - rec.depart_s


class _Vehicle:
    def __init__(self, ts, mode, capacities=None):
        self.trip_id = ts.trip_id
        self.pattern_id = ts.pattern_id
        self.stops = ts.stops
        self.arrivals = ts.arrivals
        self.departures = ts.departures
        self.idx = 0
        table = capacities or VEHICLE_CAPACITY
        cap = table.get(mode, DEFAULT_CAPACITY)
        self.cap_seat, self.cap_stand = cap
        self.seated = []     # traveler ids in boarding order
        self.standing = []
        self.stats = TripStats(ts.trip_id)
        self.twin = None

    @property
    def onboard(self):
        return len(self.seated) + len(self.standing)

    def remaining_stops(self):
        return self.stops[self.idx + 1:]


class _Twin:
    def __init__(self, pmap):
        self.link_path = pmap.link_path
        self.triggers = pmap.triggers
        self.cum = []          # path offset at the start of each link
        self.next_trigger = 0
        self.pos = pmap.start_offset
        self.entered = set()   # link indices already counted in volumes


class _Traveler:
    def __init__(self, plan, path):
        self.plan = plan
        self.id = plan.traveler_id
        self.legs = list(path.legs)
        self.leg = 0
        self.link = 0
        self.state = "start"
        self.wait_start = 0.0
        self.board_stop = -1
        self.alight_stop = -1
        self.allowed_patterns = set()
        self.record = TravelerRecord(self.id, plan.depart_s)
        self.mode = path.mode


class Simulation:
    def __init__(self, graph, timetable, travelers, profiles=None,
                 mixed_traffic=False, router=None, bin_s=DEFAULT_BIN_S,
                 horizon_s=DEFAULT_HORIZON_S, capacities=None):
        self.graph = graph
        self.capacities = capacities
        self.tt = timetable
        self.profiles = profiles
        self.mixed_traffic = mixed_traffic
        self.router = router
        self.bin_s = bin_s
        self.horizon_s = horizon_s
        self.heap = []
        self.seq = 0
        self.events = []
        self.volumes = {}
        self.waiting = {}   # stop_id -> [traveler ids]
        self.dock_bikes = dict(graph.dock_initial)
        self.vehicles = {}
        self.travelers = {}
        for plan, path in travelers:
            tv = _Traveler(plan, path)
            self.travelers[tv.id] = tv

    # -- plumbing --

    def push(self, time, pri, kind, payload):
        heapq.heappush(self.heap, (time, pri, self.seq, kind, payload))
        self.seq += 1

    def log(self, time, kind, subject, loc=-1, trip=-1, detail=""):
        self.events.append((time, kind, subject, loc, trip, detail))

    def _count_volume(self, link_id, t):
        b = int(min(max(t, 0.0), self.horizon_s - 1) // self.bin_s)
        key = (link_id, b)
        self.volumes[key] = self.volumes.get(key, 0) + 1

    def _link_time(self, link, t):
        if self.profiles is not None and link.drivable:
            return self.profiles.arrival(link.link_id, t, link.base_time) - t
        return link.base_time

    # -- vehicles --

    def dispatch_vehicles(self):
        for trip_id in sorted(self.tt.trips):
            ts = self.tt.trips[trip_id]
            if len(ts.stops) < 2:
                continue
            mode = self.tt.pattern_mode(ts.pattern_id)
            veh = _Vehicle(ts, mode, self.capacities)
            if self.mixed_traffic and ts.pattern_id in self.graph.pattern_maps:
                pmap = self.graph.pattern_maps[ts.pattern_id]
                twin = _Twin(pmap)
                off = 0.0
                for lid in pmap.link_path:
                    twin.cum.append(off)
                    off += self.graph.links[lid].length
                twin.total = off
                veh.twin = twin
            self.vehicles[trip_id] = veh
            self.push(ts.departures[0], PRI_ARRIVE, "dispatch", trip_id)

    def _handle_dispatch(self, now, trip_id):
        veh = self.vehicles[trip_id]
        self.log(now, "dispatch", trip_id, veh.stops[0], trip_id)
        if veh.twin is None:
            self._arrive_schedule(now, veh, first=True)
        else:
            b, a = self.process_stop(veh, veh.stops[0], now, twin_mode=True)
            dwell = max(0.0, BOARD_S * b + ALIGHT_S * a)
            self._schedule_next_trigger(veh, now + dwell)

    def _arrive_schedule(self, now, veh, first=False):
        stop = veh.stops[veh.idx]
        if not first:
            self.log(now, "veh-arrive", veh.trip_id, stop, veh.trip_id)
        self._alight_phase(veh, stop, now)
        if veh.idx + 1 < len(veh.stops):
            dep = veh.departures[veh.idx]
            self.push(dep, PRI_DEPART, "veh-depart", veh.trip_id)
        else:
            self._finish_vehicle(veh, now)

    def _handle_depart(self, now, trip_id):
        veh = self.vehicles[trip_id]
        stop = veh.stops[veh.idx]
        self._board_phase(veh, stop, now)
        self.log(now, "veh-depart", veh.trip_id, stop, veh.trip_id)
        veh.idx += 1
        self.push(veh.arrivals[veh.idx], PRI_ARRIVE, "veh-arrive", trip_id)

    def _handle_arrive(self, now, trip_id):
        self._arrive_schedule(now, self.vehicles[trip_id])

    def _finish_vehicle(self, veh, now):
        self.log(now, "veh-finish", veh.trip_id, veh.stops[-1], veh.trip_id)

    # twin pacing: the road copy of the bus crosses trigger k, which places
    # the transit copy at stop k at that instant

    def _schedule_next_trigger(self, veh, now):
        twin = veh.twin
        if twin.next_trigger + 1 >= len(twin.triggers):
            self._finish_vehicle(veh, now)
            return
        target = twin.triggers[twin.next_trigger + 1]
        t = now
        pos = twin.pos
        if target.path_offset > twin.total + 1e-6:
            raise MappingExhausted(
                f"pattern {veh.pattern_id}: trigger beyond mapped path")
        # walk driving links from pos to the trigger's path offset
        i = self._link_index_at(twin, pos)
        while pos < target.path_offset - 1e-9:
            lid = twin.link_path[i]
            link = self.graph.links[lid]
            start = twin.cum[i]
            end = start + link.length
            if i not in twin.entered:
                twin.entered.add(i)
                self._count_volume(lid, t)
            seg_to = min(end, target.path_offset)
            full = self._link_time(link, t)
            frac = (seg_to - pos) / link.length if link.length > 0 else 0.0
            t += full * frac
            pos = seg_to
            i += 1
        twin.pos = target.path_offset
        twin.next_trigger += 1
        self.push(t, PRI_ARRIVE, "twin-trigger", veh.trip_id)

    def _link_index_at(self, twin, pos):
        i = 0
        while (i + 1 < len(twin.cum) and twin.cum[i + 1] <= pos + 1e-9):
            i += 1
        return i

    def _handle_trigger(self, now, trip_id):
        veh = self.vehicles[trip_id]
        veh.idx += 1
        stop = veh.stops[veh.idx]
        self.log(now, "veh-arrive", veh.trip_id, stop, veh.trip_id, "twin")
        b, a = self.process_stop(veh, stop, now, twin_mode=True)
        dwell = max(0.0, BOARD_S * b + ALIGHT_S * a)
        if veh.idx + 1 < len(veh.stops):
            self.log(now + dwell, "veh-depart", veh.trip_id, stop, veh.trip_id)
            self._schedule_next_trigger(veh, now + dwell)
        else:
            self._finish_vehicle(veh, now + dwell)

    # -- stop exchange --

    def process_stop(self, veh, stop, now, twin_mode=False):
        alighted = self._alight_phase(veh, stop, now)
        boarded = self._board_phase(veh, stop, now)
        return boarded, alighted

    def _alight_phase(self, veh, stop, now):
        leaving = [tid for tid in veh.seated + veh.standing
                   if self.travelers[tid].alight_stop == stop]
        for tid in leaving:
            if tid in veh.seated:
                veh.seated.remove(tid)
            else:
                veh.standing.remove(tid)
            veh.stats.alightings += 1
            tv = self.travelers[tid]
            tv.state = "walking"
            self.log(now, "alight", tid, stop, veh.trip_id)
            tv.leg += 1
            self._start_leg(tv, now)
        # standing travelers take freed seats in boarding order
        while veh.standing and len(veh.seated) < veh.cap_seat:
            veh.seated.append(veh.standing.pop(0))
        return len(leaving)

    def _board_phase(self, veh, stop, now):
        queue = self.waiting.get(stop, [])
        order = sorted(queue, key=lambda tid: (self.travelers[tid].wait_start,
                                               tid))
        boarded = 0
        for tid in order:
            tv = self.travelers[tid]
            if tv.wait_start > now + 1e-9:
                continue
            if veh.pattern_id not in tv.allowed_patterns:
                continue
            if tv.alight_stop not in veh.remaining_stops():
                continue
            if len(veh.seated) < veh.cap_seat:
                veh.seated.append(tid)
            elif len(veh.standing) < veh.cap_stand:
                veh.standing.append(tid)
            else:
                tv.record.rejections += 1
                self.log(now, "reject", tid, stop, veh.trip_id)
                self.handle_rejection(tv, stop, now)
                continue
            queue.remove(tid)
            tv.state = "in-vehicle"
            tv.record.wait_s += now - tv.wait_start
            tv.record.boardings += 1
            veh.stats.boardings += 1
            boarded += 1
            self.log(now, "board", tid, stop, veh.trip_id)
        veh.stats.max_load = max(veh.stats.max_load, veh.onboard)
        return boarded

    # -- travelers --

    def start_travelers(self):
        for tid in sorted(self.travelers):
            tv = self.travelers[tid]
            self.push(tv.plan.depart_s, PRI_TRAVELER, "traveler-start", tid)

    def _handle_traveler_start(self, now, tid):
        tv = self.travelers[tid]
        self.log(now, "depart", tid)
        self._start_leg(tv, now)

    def _start_leg(self, tv, now):
        while tv.leg < len(tv.legs):
            leg = tv.legs[tv.leg]
            if leg.mode == "transit":
                self._enter_waiting(tv, leg, now)
                return
            if leg.mode in ("walk", "bike") and not leg.links:
                tv.leg += 1
                continue
            if leg.mode == "bike" and mode_rule(tv.mode).use_docks:
                node = self.graph.links[leg.links[0]].from_node
                if self.dock_bikes.get(node, 0) <= 0:
                    self.log(now, "dock-empty", tv.id, node)
                    self.handle_rejection(tv, None, now)
                    return
                self.dock_bikes[node] -= 1
                self.log(now, "pick", tv.id, node)
            if leg.mode in ("drive", "tnc"):
                start = now + (leg.wait_s if leg.mode == "tnc" else 0.0)
                tv.link = 0
                self._drive_next_link(tv, leg, start)
                return
            # walk or bike: per-link times scaled so the leg total matches
            # the routed duration (anchor ends are partial links)
            tv.link = 0
            tv.state = "walking" if leg.mode == "walk" else "biking"
            self._foot_next_link(tv, leg, now)
            return
        self._finish_traveler(tv, now)

    def _leg_link_times(self, tv, leg):
        speed = (self.graph.bike_speed if leg.mode == "bike"
                 else self.graph.walk_speed)
        raw = [self.graph.links[lid].length / speed for lid in leg.links]
        total = sum(raw)
        duration = leg.end_s - leg.start_s
        if total <= 0:
            return [0.0] * len(raw)
        return [r * duration / total for r in raw]

    def _foot_next_link(self, tv, leg, now):
        times = self._leg_link_times(tv, leg)
        if tv.link >= len(leg.links):
            self._end_leg(tv, leg, now)
            return
        lid = leg.links[tv.link]
        self.push(now + times[tv.link], PRI_TRAVELER, "foot-link",
                  (tv.id, lid))

    def _handle_foot_link(self, now, payload):
        tid, lid = payload
        tv = self.travelers[tid]
        leg = tv.legs[tv.leg]
        self.log(now, "link", tid, lid)
        tv.link += 1
        self._foot_next_link(tv, leg, now)

    def _drive_next_link(self, tv, leg, now):
        if tv.link >= len(leg.links):
            self._end_leg(tv, leg, now)
            return
        lid = leg.links[tv.link]
        link = self.graph.links[lid]
        self._count_volume(lid, now)
        tv.state = "driving"
        self.push(now + self._link_time(link, now), PRI_TRAVELER,
                  "drive-link", (tv.id, lid))

    def _handle_drive_link(self, now, payload):
        tid, lid = payload
        tv = self.travelers[tid]
        leg = tv.legs[tv.leg]
        self.log(now, "link", tid, lid)
        tv.link += 1
        self._drive_next_link(tv, leg, now)

    def _end_leg(self, tv, leg, now):
        if leg.mode == "bike" and mode_rule(tv.mode).use_docks and leg.links:
            node = self.graph.links[leg.links[-1]].to_node
            self.dock_bikes[node] = self.dock_bikes.get(node, 0) + 1
            self.log(now, "drop", tv.id, node)
        tv.leg += 1
        self._start_leg(tv, now)

    def _enter_waiting(self, tv, leg, now):
        ts = self.tt.trips[leg.trip_id]
        tv.state = "waiting"
        tv.wait_start = now
        tv.board_stop = leg.board_stop
        tv.alight_stop = leg.alight_stop
        tv.allowed_patterns = {ts.pattern_id}
        self.waiting.setdefault(leg.board_stop, []).append(tv.id)
        self.log(now, "wait", tv.id, leg.board_stop)

    def _finish_traveler(self, tv, now):
        tv.state = "done"
        tv.record.status = "done"
        tv.record.arrive_s = now
        self.log(now, "done", tv.id)

    def _fail_traveler(self, tv, now):
        tv.state = "failed"
        tv.record.status = "failed"
        self.log(now, "failed", tv.id)

    def handle_rejection(self, tv, stop, now):
        """Re-route in place with the same mode rules; identical advice means
        keep waiting without resetting the wait start."""
        if self.router is None:
            self._remove_waiting(tv)
            self._fail_traveler(tv, now)
            return
        if stop is not None:
            node = self.graph.stop_nodes[stop]
        else:
            lid = tv.legs[tv.leg].links[0]
            node = self.graph.links[lid].from_node
        nd = self.graph.nodes[node]
        dest = tv.plan.destination
        if isinstance(dest, int):
            dest = self.graph.locations[dest]
        try:
            path = self.router.route_from_point(nd.lat, nd.lon, dest, now,
                                                tv.mode)
        except (NoPath, ModeUnreachable):
            self._remove_waiting(tv)
            self._fail_traveler(tv, now)
            return
        first = next((l for l in path.legs if l.mode == "transit"), None)
        if (tv.state == "waiting" and first is not None
                and first.board_stop == tv.board_stop
                and self.tt.trips[first.trip_id].pattern_id
                in tv.allowed_patterns):
            self.log(now, "reroute-keep", tv.id, tv.board_stop)
            return
        self._remove_waiting(tv)
        self.log(now, "reroute", tv.id)
        tv.legs = tv.legs[:tv.leg] + list(path.legs)
        tv.state = "rerouting"
        self._start_leg(tv, now)

    def _remove_waiting(self, tv):
        q = self.waiting.get(tv.board_stop)
        if q and tv.id in q:
            q.remove(tv.id)

    # -- loop --

    def run(self):
        self.dispatch_vehicles()
        self.start_travelers()
        handlers = {
            "dispatch": self._handle_dispatch,
            "veh-arrive": self._handle_arrive,
            "veh-depart": self._handle_depart,
            "twin-trigger": self._handle_trigger,
            "traveler-start": self._handle_traveler_start,
            "foot-link": self._handle_foot_link,
            "drive-link": self._handle_drive_link,
        }
        while self.heap:
            time, _, _, kind, payload = heapq.heappop(self.heap)
            if time > self.horizon_s:
                continue
            handlers[kind](time, payload)
        for tid in sorted(self.travelers):
            tv = self.travelers[tid]
            if tv.record.status == "active":
                self._remove_waiting(tv)
                self._fail_traveler(tv, self.horizon_s)
        return SimulationResult(
            self.events, self.volumes,
            {tid: tv.record for tid, tv in sorted(self.travelers.items())},
            {t: v.stats for t, v in sorted(self.vehicles.items())},
            self.bin_s)


def run_simulation(graph, timetable, travelers, profiles=None,
                   mixed_traffic=False, router=None, bin_s=DEFAULT_BIN_S,
                   horizon_s=DEFAULT_HORIZON_S, capacities=None):
    """travelers: list of (TravelerPlan, Path).  Returns SimulationResult."""
    sim = Simulation(graph, timetable, travelers, profiles=profiles,
                     mixed_traffic=mixed_traffic, router=router, bin_s=bin_s,
                     horizon_s=horizon_s, capacities=capacities)
    return sim.run()


def write_event_log(events, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time_s", "kind", "subject", "loc", "trip", "detail"])
        for time, kind, subject, loc, trip, detail in events:
            w.writerow([repr(float(time)), kind, subject, loc, trip, detail])


def write_sim_metrics(result, out_dir):
    import os
    with open(os.path.join(out_dir, "trip_stats.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["trip_id", "boardings", "alightings", "max_load"])
        for trip_id in sorted(result.trip_stats):
            s = result.trip_stats[trip_id]
            w.writerow([trip_id, s.boardings, s.alightings, s.max_load])
    with open(os.path.join(out_dir, "link_volumes.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["link_id", "bin", "volume"])
        for (lid, b) in sorted(result.link_volumes):
            w.writerow([lid, b, result.link_volumes[(lid, b)]])
    with open(os.path.join(out_dir, "travelers.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["traveler_id", "depart_s", "arrive_s", "wait_s",
                    "boardings", "rejections", "status"])
        for tid in sorted(result.traveler_records):
            r = result.traveler_records[tid]
            w.writerow([tid, repr(float(r.depart_s)), repr(float(r.arrive_s)),
                        repr(float(r.wait_s)), r.boardings, r.rejections,
                        r.status])
