"""Mode rule sets and routing cost configuration."""

from dataclasses import dataclass, field

from .graph import DRIVING, MICROMOBILITY, WALKING


@dataclass
class RouterConfig:
    w_wait: float = 2.0
    w_walk: float = 2.0
    transfer_penalty_s: float = 300.0
    boarding_penalty_s: float = 5.0
    value_of_time_per_h: float = 20.0  # dollars/hour, converts fares to seconds
    tnc_wait_s: float = 300.0
    tnc_base_fare: float = 2.0
    tnc_fare_per_km: float = 1.5
    fmlm_subsidy: float = 0.0  # fraction of the TNC fare covered
    toll_per_km: float = 0.0   # applied on links flagged tolled

    def fare_cost_s(self, fare):
        return fare * 3600.0 / self.value_of_time_per_h


@dataclass(frozen=True)
class ModeRule:
    """Which layers a mode may use and at which trip ends.

    phases: park-and-ride style one-way transfers are expressed as a phase
    change; phase 0 permits `pre_layers`, phase 1 permits `post_layers`, and
    the 0 -> 1 transition happens only at parking nodes.  Single-phase modes
    leave post_layers empty.
    """
    name: str
    origin_layers: tuple
    dest_layers: tuple
    pre_layers: tuple          # layers usable in phase 0
    post_layers: tuple = ()    # layers usable in phase 1 (two-phase modes)
    transit: bool = False      # may board scheduled vehicles
    transit_phase: int = 0     # phase in which boarding is allowed
    tnc: bool = False          # driving links usable as hired rides
    use_docks: bool = False    # micromobility pick/drop at docks


MODE_RULES = {
    "car": ModeRule("car", (DRIVING,), (DRIVING,), (DRIVING,)),
    "walk": ModeRule("walk", (WALKING,), (WALKING,), (WALKING,)),
    "bike": ModeRule("bike", (WALKING,), (WALKING,), (WALKING,)),
    "walk_transit": ModeRule("walk_transit", (WALKING,), (WALKING,),
                             (WALKING,), transit=True),
    "park_and_ride": ModeRule("park_and_ride", (DRIVING,), (WALKING,),
                              (DRIVING,), (WALKING,), transit=True,
                              transit_phase=1),
    # kiss-and-ride: same search as park-and-ride, no stage-2 return
    "kiss_and_ride": ModeRule("kiss_and_ride", (DRIVING,), (WALKING,),
                              (DRIVING,), (WALKING,), transit=True,
                              transit_phase=1),
    "tnc_transit": ModeRule("tnc_transit", (WALKING, DRIVING),
                            (WALKING, DRIVING), (WALKING, DRIVING),
                            transit=True, tnc=True),
    "bike_transit": ModeRule("bike_transit", (WALKING, MICROMOBILITY),
                             (WALKING, MICROMOBILITY), (WALKING,),
                             transit=True, use_docks=True),
}


def mode_rule(name):
    if name not in MODE_RULES:
        raise KeyError(f"unknown mode {name!r}")
    return MODE_RULES[name]
