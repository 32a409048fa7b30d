"""Driving network input (CSV) and the link performance function."""

import csv
from dataclasses import dataclass

NON_WALKABLE_CLASSES = {"freeway", "motorway", "ramp", "expressway"}


@dataclass
class RoadNode:
    id: str
    lat: float
    lon: float


@dataclass
class RoadLink:
    id: str
    from_node: str
    to_node: str
    length: float       # meters
    lanes: int
    capacity_per_h: float
    ff_speed: float     # m/s
    road_class: str
    oneway: bool = False


def load_road_network(links_path, nodes_path):
    nodes = []
    with open(nodes_path, newline="") as fh:
        for row in csv.DictReader(fh):
            nodes.append(RoadNode(row["id"].strip(), float(row["lat"]),
                                  float(row["lon"])))
    links = []
    with open(links_path, newline="") as fh:
        for row in csv.DictReader(fh):
            links.append(RoadLink(
                id=row["id"].strip(),
                from_node=row["from"].strip(),
                to_node=row["to"].strip(),
                length=float(row["length"]),
                lanes=int(row.get("lanes") or 1),
                capacity_per_h=float(row.get("capacity") or 1800),
                ff_speed=float(row.get("ff_speed") or 13.9),
                road_class=(row.get("class") or "local").strip(),
                oneway=(row.get("oneway") or "0").strip() in ("1", "true", "yes"),
            ))
    return links, nodes


def volume_delay_time(base_time_s, volume_per_h, capacity_per_h,
                      alpha=0.15, beta=4.0):
    """Congested link time t = t0 * (1 + alpha * (v/c)^beta)."""
    if capacity_per_h <= 0:
        return base_time_s
    return base_time_s * (1.0 + alpha * (volume_per_h / capacity_per_h) ** beta)
