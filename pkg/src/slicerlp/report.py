"""Algorithm outcomes and their CSV row form."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .model import Placement, RoutingPlan

FEASIBLE = "Feasible"
PLACEMENT_FAILED = "PlacementFailed"
ROUTING_FAILED = "RoutingFailed"
ERROR = "Error"
INFEASIBLE = "Infeasible"  # exact oracle only

SCHEMA_VERSION = 1
CSV_COLUMNS = (
    "instance",
    "num_services",
    "algorithm",
    "status",
    "activated_nodes",
    "total_delay",
    "lp_solves",
    "wall_time_ms",
    "seed",
    "objective",
    "schema_version",
)


@dataclass
class SolveReport:
    algorithm: str
    status: str
    activated_nodes: int = 0
    nfv_delay: float = math.nan
    link_delay: float = math.nan
    objective: float = math.nan
    lp_solves: int = 0
    placement_solves: int = 0
    routing_solves: int = 0
    wall_time_ms: float = 0.0
    placement: Optional[Placement] = None
    routing: Optional[RoutingPlan] = None
    weights: dict = field(default_factory=dict)
    paths_exceed_budget: list = field(default_factory=list)
    failure: str = ""
    lp_bound: int = 0

    @property
    def feasible(self) -> bool:
        return self.status == FEASIBLE

    @property
    def total_delay(self) -> float:
        return self.nfv_delay + self.link_delay

    def row(self, instance_id, num_services: int, seed) -> dict:
        ok = self.feasible
        return {
            "instance": instance_id,
            "num_services": num_services,
            "algorithm": self.algorithm,
            "status": self.status,
            "activated_nodes": self.activated_nodes if ok else "",
            "total_delay": _fmt(self.total_delay) if ok else "",
            "lp_solves": self.lp_solves,
            "wall_time_ms": f"{self.wall_time_ms:.3f}",
            "seed": seed,
            "objective": _fmt(self.objective) if ok else "",
            "schema_version": SCHEMA_VERSION,
        }


def _fmt(x: float) -> str:
    return repr(float(x))
