"""Modulation formats, per-slot data rates and transmission reach."""

from __future__ import annotations

import math
from dataclasses import dataclass

SLOT_GHZ = 12.5
BAUD_GBPS = 12.5


@dataclass(frozen=True)
class ModulationFormat:
    name: str
    level: int
    bits_per_symbol: int
    slot_ghz: float
    rate_per_slot: float
    reach_km: float


class ModulationTable:
    """Lookup over the supported modulation formats, ordered by level."""

    def __init__(self, formats: list[ModulationFormat]):
        self.formats = sorted(formats, key=lambda f: f.level)
        self._by_level = {f.level: f for f in self.formats}
        reaches = [f.reach_km for f in self.formats]
        if any(b >= a for a, b in zip(reaches, reaches[1:])):
            raise ValueError("reach must strictly decrease as level increases")

    @property
    def levels(self) -> list[int]:
        return [f.level for f in self.formats]

    @property
    def default_level(self) -> int:
        return self.formats[0].level

    def get(self, level: int) -> ModulationFormat:
        try:
            return self._by_level[level]
        except KeyError:
            raise ValueError(f"unknown modulation level {level!r}") from None

    def reach(self, level: int) -> float:
        return self.get(level).reach_km

    def rate_per_slot(self, level: int) -> float:
        return self.get(level).rate_per_slot

    def best_level_for_distance(self, distance_km: float) -> int:
        """Highest level whose reach covers ``distance_km`` (boundary inclusive).

        Raises ``ValueError`` when even the most robust format falls short.
        """
        best = None
        for f in self.formats:
            if distance_km <= f.reach_km:
                best = f.level
        if best is None:
            raise ValueError(f"no modulation format reaches {distance_km} km")
        return best

    def slots_for_rate(self, gbps: float, level: int) -> int:
        return max(1, math.ceil(gbps / self.rate_per_slot(level) - 1e-9))


def _fmt(name: str, level: int, reach: float) -> ModulationFormat:
    bits = int(math.log2(level))
    return ModulationFormat(name, level, bits, SLOT_GHZ, bits * BAUD_GBPS, reach)


TABLE_I = ModulationTable(
    [
        _fmt("BPSK", 2, 9600.0),
        _fmt("QPSK", 4, 4800.0),
        _fmt("8QAM", 8, 2400.0),
        _fmt("16QAM", 16, 1200.0),
    ]
)


def reach(level: int) -> float:
    return TABLE_I.reach(level)


def best_level_for_distance(distance_km: float) -> int:
    return TABLE_I.best_level_for_distance(distance_km)
