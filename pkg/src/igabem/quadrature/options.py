from __future__ import annotations

import math
from dataclasses import dataclass, asdict


@dataclass(frozen=True)
class QuadratureOptions:
    """Gauss order selection for surface and volume integrals.

    Regular regions get ``base_order + ceil(escalation * L / d)`` points per
    direction (capped at ``max_order``), where L is the region diameter and d
    the distance to the source. Regions with d / L below ``near_ratio`` are
    subdivided instead.
    """

    base_order: int = 6
    max_order: int = 16
    escalation: float = 4.0
    near_ratio: float = 0.5
    max_depth: int = 14
    singular_order: int = 12
    fan_layout: str = "split"
    volume_base_order: int = 4
    volume_singular_order: int = 8

    def order_for(self, L: float, d: float) -> int:
        return int(min(self.base_order + math.ceil(self.escalation * L / d), self.max_order))

    def volume_order_for(self, L: float, d: float) -> int:
        return int(min(self.volume_base_order + math.ceil(self.escalation * L / d), self.max_order))

    def to_dict(self) -> dict:
        return asdict(self)
