"""Schedule index over a NetworkStore for routing and simulation."""

import bisect
from dataclasses import dataclass


@dataclass
class TripSchedule:
    trip_id: int
    pattern_id: int
    stops: list       # stop ids, length k+1
    arrivals: list    # seconds, length k+1
    departures: list


class Timetable:
    """Lookup structures: next departure per (pattern, stop index), ride times
    per trip, flat fare per boarding."""

    def __init__(self, store):
        self.store = store
        self.pattern_stops = {p.pattern_id: store.pattern_stop_sequence(p.pattern_id)
                              for p in store.patterns}
        self.pattern_route = {p.pattern_id: p.route_id for p in store.patterns}
        route_agency = {r.route_id: r.agency_id for r in store.routes}
        self.route_mode = {r.route_id: r.mode for r in store.routes}
        fare_by_agency = {}
        for f in store.fares:
            fare_by_agency.setdefault(f.agency_id, f)
        self._fares = fare_by_agency
        self._route_agency = route_agency

        sched = store.schedule_by_trip()
        self.trips = {}
        for t in store.trips:
            rows = sched.get(t.trip_id, [])
            self.trips[t.trip_id] = TripSchedule(
                t.trip_id, t.pattern_id,
                self.pattern_stops[t.pattern_id],
                [r.arrival for r in rows],
                [r.departure for r in rows])

        # (pattern, stop_index) -> sorted [(departure, trip_id)]
        self._departures = {}
        # stop_id -> [(pattern_id, stop_index)], boardable positions only
        self.board_positions = {}
        for ts in sorted(self.trips.values(), key=lambda ts: ts.trip_id):
            for idx in range(len(ts.stops) - 1):
                key = (ts.pattern_id, idx)
                self._departures.setdefault(key, []).append(
                    (ts.departures[idx], ts.trip_id))
        for key in self._departures:
            self._departures[key].sort()
        for pid, stops in sorted(self.pattern_stops.items()):
            for idx, sid in enumerate(stops[:-1]):
                self.board_positions.setdefault(sid, []).append((pid, idx))

    def next_departure(self, stop_id, pattern_ids, t):
        """Earliest departure >= t at stop over the given patterns.

        Returns (trip_id, departure) or None after last service.  Boarding at
        the exact departure instant is allowed; ties break on trip id.
        """
        best = None
        for pid, idx in self.board_positions.get(stop_id, []):
            if pid not in pattern_ids:
                continue
            for dep, trip in self.departures_from(pid, idx, t):
                if best is None or (dep, trip) < best:
                    best = (dep, trip)
                break
        if best is None:
            return None
        return best[1], best[0]

    def departures_from(self, pattern_id, stop_index, t):
        """All (departure, trip_id) with departure >= t, in order."""
        rows = self._departures.get((pattern_id, stop_index), [])
        i = bisect.bisect_left(rows, (t, -1))
        return rows[i:]

    def boarding_fare(self, pattern_id, first_boarding):
        fare = self._fares.get(self._route_agency.get(
            self.pattern_route[pattern_id]))
        if fare is None:
            return 0.0
        if first_boarding:
            return fare.price
        return fare.price * (1.0 - fare.transfer_discount)

    def pattern_mode(self, pattern_id):
        return self.route_mode[self.pattern_route[pattern_id]]

    def max_segment_speed(self):
        """Fastest scheduled speed over any segment, m/s (heuristic bound)."""
        links_by_id = {l.link_id: l for l in self.store.links}
        seg_lengths = {}
        for pl in self.store.pattern_links:
            link = links_by_id[pl.link_id]
            seg_lengths.setdefault(pl.pattern_id, {})[pl.seq] = link.length
        vmax = 0.0
        for ts in self.trips.values():
            lengths = seg_lengths.get(ts.pattern_id, {})
            for i in range(len(ts.arrivals) - 1):
                dt = ts.arrivals[i + 1] - ts.departures[i]
                length = lengths.get(i, 0.0)
                if dt > 0 and length > 0:
                    vmax = max(vmax, length / dt)
        return vmax
