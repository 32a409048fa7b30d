"""Per-link, time-binned travel time profiles with FIFO arrival clamping."""

import csv
from dataclasses import dataclass, field

from .errors import BinMismatch

DEFAULT_BIN_S = 900
DEFAULT_HORIZON_S = 30 * 3600


@dataclass
class TravelTimeProfiles:
    """Travel time per driving link per time bin; other links fall back to
    their base time.  Arrival times are clamped so that departing later can
    never arrive earlier (FIFO), which label-based search requires."""
    bin_s: int = DEFAULT_BIN_S
    horizon_s: int = DEFAULT_HORIZON_S
    times: dict = field(default_factory=dict)  # link_id -> [tt per bin]
    _boundary_max: dict = field(default_factory=dict, repr=False)

    @property
    def n_bins(self):
        return self.horizon_s // self.bin_s

    def set_profile(self, link_id, bin_times):
        if len(bin_times) != self.n_bins:
            raise BinMismatch(f"expected {self.n_bins} bins, got {len(bin_times)}")
        self.times[link_id] = list(bin_times)
        self._boundary_max.pop(link_id, None)

    def bin_index(self, t):
        return max(0, min(self.n_bins - 1, int(t // self.bin_s)))

    def raw_time(self, link_id, t, base_time):
        prof = self.times.get(link_id)
        if prof is None:
            return base_time
        return prof[self.bin_index(t)]

    def _boundaries(self, link_id):
        # prefix max of arrival times when entering exactly at each bin end
        cached = self._boundary_max.get(link_id)
        if cached is None:
            prof = self.times[link_id]
            cached = []
            running = 0.0
            for i, tt in enumerate(prof):
                running = max(running, (i + 1) * self.bin_s + tt)
                cached.append(running)
            self._boundary_max[link_id] = cached
        return cached

    def arrival(self, link_id, t, base_time):
        """FIFO arrival time at the end of link_id when entering at t."""
        prof = self.times.get(link_id)
        if prof is None:
            return t + base_time
        i = self.bin_index(t)
        arr = t + prof[i]
        if i > 0:
            arr = max(arr, self._boundaries(link_id)[i - 1])
        return arr

    def travel_time(self, link_id, t, base_time):
        return self.arrival(link_id, t, base_time) - t

    def copy(self):
        out = TravelTimeProfiles(self.bin_s, self.horizon_s)
        out.times = {k: list(v) for k, v in self.times.items()}
        return out

    def min_time(self, link_id, base_time):
        prof = self.times.get(link_id)
        return base_time if prof is None else min(min(prof), base_time)


def mix_travel_times(historical, current, w_current):
    """Per-bin blend: expected = w*current + (1-w)*historical.

    Links present in only one profile are carried over unchanged.
    """
    if historical.bin_s != current.bin_s or historical.horizon_s != current.horizon_s:
        raise BinMismatch("profiles do not share binning")
    out = TravelTimeProfiles(current.bin_s, current.horizon_s)
    for lid in sorted(set(historical.times) | set(current.times)):
        h = historical.times.get(lid)
        c = current.times.get(lid)
        if h is None:
            out.times[lid] = list(c)
        elif c is None:
            out.times[lid] = list(h)
        else:
            out.times[lid] = [w_current * cv + (1.0 - w_current) * hv
                              for cv, hv in zip(c, h)]
    return out


def save_profiles(profiles, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["link_id", "bin_start_s", "travel_time_s"])
        for lid in sorted(profiles.times):
            for i, tt in enumerate(profiles.times[lid]):
                w.writerow([lid, i * profiles.bin_s, repr(tt)])


def load_profiles(path, bin_s=DEFAULT_BIN_S, horizon_s=DEFAULT_HORIZON_S):
    raw = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            raw.setdefault(int(row["link_id"]), []).append(
                (int(row["bin_start_s"]), float(row["travel_time_s"])))
    profiles = TravelTimeProfiles(bin_s, horizon_s)
    for lid, pairs in raw.items():
        pairs.sort()
        profiles.set_profile(lid, [tt for _, tt in pairs])
    return profiles
