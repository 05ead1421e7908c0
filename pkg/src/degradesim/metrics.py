"""Bandwidth blocking probability and windowed transient series."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

PRIORITIES = (1, 2, 3, 4, 5)


@dataclass
class MetricsAccumulator:
    window: float = 0.05
    offered: dict[int, float] = field(default_factory=lambda: {p: 0.0 for p in PRIORITIES})
    blocked: dict[int, float] = field(default_factory=lambda: {p: 0.0 for p in PRIORITIES})
    # per-window arrival tallies, keyed by window index
    window_offered: dict[int, float] = field(default_factory=dict)
    window_blocked: dict[int, float] = field(default_factory=dict)
    # (time, change in total carried Gbps)
    rate_log: list[tuple[float, float]] = field(default_factory=list)
    horizon: float = 0.0

    def __post_init__(self):
        if self.window <= 0:
            raise ValueError("window length must be positive")

    def _ensure(self, priority: int) -> None:
        if priority not in self.offered:
            self.offered[priority] = 0.0
            self.blocked[priority] = 0.0

    def record_arrival(self, t: float, bw: float, priority: int, blocked: bool, counted: bool = True) -> None:
        """Log one arrival. ``counted`` False keeps it out of the BBP totals
        (warm-up) while still feeding the transient series."""
        w = int(t // self.window)
        self.window_offered[w] = self.window_offered.get(w, 0.0) + bw
        if blocked:
            self.window_blocked[w] = self.window_blocked.get(w, 0.0) + bw
        if counted:
            self._ensure(priority)
            self.offered[priority] += bw
            if blocked:
                self.blocked[priority] += bw
        self.horizon = max(self.horizon, t)

    def record_rate_change(self, t: float, delta: float) -> None:
        if delta != 0.0:
            self.rate_log.append((t, delta))
        self.horizon = max(self.horizon, t)

    @property
    def total_offered(self) -> float:
        return sum(self.offered.values())

    @property
    def total_blocked(self) -> float:
        return sum(self.blocked.values())


def bbp(acc: MetricsAccumulator, priority: int | None = None) -> float:
    """Blocked bandwidth over offered bandwidth; 0 when nothing was offered."""
    if priority is None:
        offered, blocked = acc.total_offered, acc.total_blocked
    else:
        offered, blocked = acc.offered.get(priority, 0.0), acc.blocked.get(priority, 0.0)
    return blocked / offered if offered > 0 else 0.0


def carried_volume(acc: MetricsAccumulator, t_end: float | None = None) -> float:
    """Integral of total carried rate from 0 to ``t_end``."""
    t_end = acc.horizon if t_end is None else t_end
    total = 0.0
    for t, delta in acc.rate_log:
        if t < t_end:
            total += delta * (t_end - t)
    return total


def instantaneous_series(acc: MetricsAccumulator, t_end: float | None = None) -> list[tuple[float, float, float]]:
    """Per-window ``(window start, carried throughput Gbps, window BBP)``.

    Throughput is the window's carried volume divided by the window length,
    so a trailing partial window is averaged over the full length.
    """
    t_end = acc.horizon if t_end is None else t_end
    if t_end <= 0 and not acc.window_offered:
        return []
    n_windows = max(int(math.ceil(t_end / acc.window)), max(acc.window_offered, default=-1) + 1)
    volume = [0.0] * n_windows
    rate = 0.0
    t_prev = 0.0
    changes = sorted(acc.rate_log) + [(t_end, 0.0)]
    for t, delta in changes:
        t = min(t, t_end)
        # spread the constant rate over [t_prev, t) window by window
        while t_prev < t:
            w = int(t_prev // acc.window)
            if (w + 1) * acc.window <= t_prev:
                w += 1
            hi = min((w + 1) * acc.window, t)
            if w < n_windows:
                volume[w] += rate * (hi - t_prev)
            t_prev = hi
        rate += delta
    series = []
    for w in range(n_windows):
        offered = acc.window_offered.get(w, 0.0)
        blocked = acc.window_blocked.get(w, 0.0)
        series.append(
            (w * acc.window, volume[w] / acc.window, blocked / offered if offered > 0 else 0.0)
        )
    return series
