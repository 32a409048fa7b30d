"""Gap-based iterative assignment: route-or-keep, simulate, re-mix times."""

import math
import random
from dataclasses import dataclass, field

from .errors import NonPositiveRouted, NoPath, ModeUnreachable
from .profiles import TravelTimeProfiles, mix_travel_times
from .roads import volume_delay_time

GAP_THRESHOLD_DEFAULT = 0.03
HISTORY_WINDOW = 5


@dataclass
class MixConfig:
    """Knobs for the keep/reroute rule and the time-mixing weight."""
    lam: float = 5.0      # scale, iterations
    kappa: float = 1.5    # shape
    gamma: float = 0.2    # reassignment gap scale
    epsilon: float = 0.01  # keep threshold

    def __post_init__(self):
        if self.lam <= 0 or self.kappa <= 0 or self.gamma <= 0 or self.epsilon < 0:
            raise ValueError("MixConfig out of range")


@dataclass
class TravelerPlan:
    traveler_id: int
    origin: int
    destination: int
    depart_s: float
    mode: str
    path: object = None
    routed_s: float = 0.0
    experienced_s: float = None
    gap: float = 0.0


@dataclass
class IterationStats:
    iteration: int
    avg_gap: float
    share_reassigned: float
    total_travel_time_s: float


def relative_gap(experienced_s, routed_s):
    """Clamped relative excess of experienced over routed travel time."""
    if routed_s <= 0:
        raise NonPositiveRouted(f"routed time {routed_s} must be positive")
    return max(0.0, (experienced_s - routed_s) / routed_s)


def reassignment_decision(g, n, cfg, rng):
    """True to reroute.  Gap at or below epsilon always keeps; above it the
    reroute probability is min(1, g/gamma).  The rng draw happens on every
    call past the keep threshold so decision streams stay reproducible."""
    if g <= cfg.epsilon:
        return False
    p = min(1.0, g / cfg.gamma)
    return rng.random() < p


def mixing_weight(n, g, cfg):
    """Weight on the current iteration's times, in [0,1].

    Weibull-survival shape: starts at 1, decays with iteration count, decays
    slower for travelers whose last gap was large (they need fresher times).
    """
    if n < 0 or g < 0:
        raise ValueError("n and g must be non-negative")
    if n == 0:
        return 1.0
    return math.exp(-((n / (cfg.lam * (1.0 + g))) ** cfg.kappa))


def update_historical(history, current, window=HISTORY_WINDOW):
    """Append the current profile to the history list and return the running
    average profile over the last `window` iterations."""
    history.append(current.copy())
    del history[:-window]
    out = TravelTimeProfiles(current.bin_s, current.horizon_s)
    links = sorted({lid for p in history for lid in p.times})
    for lid in links:
        rows = [p.times[lid] for p in history if lid in p.times]
        out.times[lid] = [sum(col) / len(rows) for col in zip(*rows)]
    return out


def profile_from_volumes(graph, volumes, bin_s, horizon_s, period_s=None):
    """Volume-delay times for every congestable driving link.

    volumes maps (link_id, bin_index) -> vehicle count per bin; counts are
    scaled to hourly rates before the delay function.
    """
    profiles = TravelTimeProfiles(bin_s, horizon_s)
    per_hour = 3600.0 / (period_s or bin_s)
    for lid, link in graph.links.items():
        if not link.drivable or link.capacity_per_h <= 0:
            continue
        bins = []
        for b in range(profiles.n_bins):
            v = volumes.get((lid, b), 0) * per_hour
            bins.append(volume_delay_time(link.base_time, v, link.capacity_per_h))
        profiles.times[lid] = bins
    return profiles


def path_travel_time(path, profiles, graph):
    """Experienced door-to-door time of a routed path under given profiles.

    Driving legs are re-propagated link by link; everything else keeps the
    routed leg duration (walk and schedule times do not congest here).
    """
    t = path.departure
    for leg in path.legs:
        if leg.mode in ("drive", "tnc"):
            for lid in leg.links:
                link = graph.links[lid]
                t = profiles.arrival(lid, t, link.base_time)
        else:
            t += leg.end_s - leg.start_s
    return t - path.departure


@dataclass
class DtaResult:
    profiles: TravelTimeProfiles
    stats: list                 # IterationStats per iteration
    plans: list                 # TravelerPlan with final paths and gaps
    status: str                 # converged | max-iter


def run_dta_loop(demand, graph, timetable, router_cfg=None, mix_cfg=None,
                 max_iter=30, seed=0, gap_threshold=GAP_THRESHOLD_DEFAULT,
                 bin_s=900, horizon_s=30 * 3600, mixed_traffic=False,
                 capacities=None):
    """Iterate route-or-keep, simulate, measure gaps, and mix link times.

    demand is a list of TravelerPlan; origin/destination may be location ids
    (resolved against graph.locations) or location objects.  Returns the final
    link-time profiles plus per-iteration stats.
    """
    from .modes import RouterConfig
    from .router import Router
    from .sim import run_simulation

    cfg = mix_cfg or MixConfig()
    router_cfg = router_cfg or RouterConfig()
    rng = random.Random(seed)
    plans = list(demand)
    current = TravelTimeProfiles(bin_s, horizon_s)
    history = []
    stats = []
    status = "max-iter"

    def resolve(x):
        return graph.locations[x] if isinstance(x, int) else x

    def best_path(router, plan):
        try:
            return router.route(resolve(plan.origin),
                                resolve(plan.destination),
                                plan.depart_s, plan.mode)
        except (NoPath, ModeUnreachable):
            return None

    # initial assignment: everyone on the free-flow shortest path
    free_router = Router(graph, timetable, current, router_cfg)
    for plan in plans:
        plan.path = best_path(free_router, plan)

    for n in range(1, max_iter + 1):
        active = [p for p in plans if p.path is not None]
        sim = run_simulation(graph, timetable,
                             [(p, p.path) for p in active],
                             profiles=current, mixed_traffic=mixed_traffic,
                             capacities=capacities, bin_s=bin_s,
                             horizon_s=horizon_s)
        new_times = profile_from_volumes(graph, sim.link_volumes, bin_s,
                                         horizon_s)
        historical = update_historical(history, new_times)

        # the gap compares experienced time with the freshly found shortest
        # path under current times; travelers who draw a reroute adopt the
        # path found under their personalized historical/current blend
        cur_router = Router(graph, timetable, new_times, router_cfg)
        routers = {}
        reassigned = 0
        total_tt = 0.0
        gaps = []
        for plan in active:
            plan.experienced_s = path_travel_time(plan.path, new_times, graph)
            total_tt += plan.experienced_s
            best = best_path(cur_router, plan)
            if best is None:
                plan.gap = 0.0
                gaps.append(0.0)
                continue
            plan.routed_s = best.arrival - best.departure
            # zero-duration trips (origin and destination share a node)
            # have nothing to improve
            plan.gap = (relative_gap(plan.experienced_s, plan.routed_s)
                        if plan.routed_s > 0 else 0.0)
            gaps.append(plan.gap)
            if reassignment_decision(plan.gap, n, cfg, rng):
                w = mixing_weight(n, plan.gap, cfg)
                router = routers.get(w)
                if router is None:
                    expected = mix_travel_times(historical, new_times, w)
                    router = routers[w] = Router(graph, timetable, expected,
                                                 router_cfg)
                cand = best_path(router, plan)
                if cand is not None:
                    plan.path = cand
                    reassigned += 1
        avg_gap = sum(gaps) / len(gaps) if gaps else 0.0
        share = reassigned / len(plans) if plans else 0.0
        stats.append(IterationStats(n, avg_gap, share, total_tt))
        current = new_times
        if avg_gap < gap_threshold:
            status = "converged"
            break

    return DtaResult(current, stats, plans, status)
