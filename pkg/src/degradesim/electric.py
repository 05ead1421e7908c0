"""Electric-layer degraded bandwidth allocation (ED-BA).

A request slowed to ``bw'`` keeps its total volume ``bw * tau`` and finishes
later, never past ``t + tau + eta``. Higher-priority arrivals may slow down
requests of equal or lower priority on congested lightpaths.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .netmodel import EPS, MultiLayerNet
from .routing import DegradedRoute


@dataclass
class ServiceRequest:
    id: int
    s: int
    d: int
    bw: float
    t: float
    tau: float
    eta: float
    rho: int
    tolerance: float = 0.25
    current_rate: float = 0.0
    delivered: float = 0.0
    last_update: float = 0.0
    finish: float = 0.0
    route: list[int] = field(default_factory=list)

    def __post_init__(self):
        if self.current_rate == 0.0:
            self.current_rate = self.bw
        if self.last_update == 0.0:
            self.last_update = self.t

    @property
    def volume(self) -> float:
        return self.bw * self.tau

    @property
    def deadline(self) -> float:
        return self.t + self.tau + self.eta

    @property
    def floor_rate(self) -> float:
        return self.bw * self.tolerance

    def delivered_at(self, t_c: float) -> float:
        return self.delivered + self.current_rate * (t_c - self.last_update)

    def advance(self, t_c: float) -> None:
        self.delivered = self.delivered_at(t_c)
        self.last_update = t_c

    def remaining_at(self, t_c: float) -> float:
        return max(self.volume - self.delivered_at(t_c), 0.0)


def max_degraded_rate(r: ServiceRequest, t_c: float) -> float:
    """Lowest rate that still moves the remaining volume by the deadline,
    clamped to the request's tolerance floor and never above its current rate."""
    window = r.deadline - t_c
    remaining = r.remaining_at(t_c)
    if window <= 0 or remaining <= 0:
        return r.current_rate
    rate = max(remaining / window, r.floor_rate)
    return min(rate, r.current_rate)


@dataclass
class AllocationPlan:
    """New rates for degraded requests and the admission rate of the arrival.

    ``degraded`` keeps the order in which requests were selected.
    """

    request_id: int
    route: list[int]
    rate: float
    degraded: list[tuple[int, float, float]] = field(default_factory=list)

    @property
    def self_degraded(self) -> bool:
        return any(rid == self.request_id for rid, _old, _new in self.degraded)

    def freed(self) -> float:
        return sum(old - new for _rid, old, new in self.degraded)


def ed_ba(
    net: MultiLayerNet, route: DegradedRoute, r0: ServiceRequest, t_c: float
) -> AllocationPlan | None:
    """Plan which requests to slow down so ``r0`` fits on ``route``.

    Returns ``None`` when some congested link cannot be relieved; nothing is
    mutated either way.
    """
    planned: dict[int, float] = {}
    order: list[tuple[int, float, float]] = []

    def rate_of(rid: int) -> float:
        if rid in planned:
            return planned[rid]
        return r0.bw if rid == r0.id else net.requests[rid].current_rate

    def target(x: ServiceRequest) -> float:
        if x.id in planned:
            return planned[x.id]
        return max_degraded_rate(x, t_c)

    for ref in route.refs:
        lp = net.lightpaths[ref]
        r0_rate = rate_of(r0.id)
        free = lp.capacity - sum(rate_of(rid) for rid in lp.reserved)
        if free + EPS >= r0_rate:
            continue
        need = r0_rate - free
        pdl = [r0] + [
            net.requests[rid] for rid in sorted(lp.reserved) if net.requests[rid].rho <= r0.rho
        ]
        gains = {x.id: rate_of(x.id) - target(x) for x in pdl}
        if sum(gains.values()) + EPS < need:
            return None
        freed = 0.0
        for x in sorted(pdl, key=lambda x: x.rho):
            gain = gains[x.id]
            if gain <= EPS:
                continue
            old = rate_of(x.id)
            planned[x.id] = old - gain
            order.append((x.id, old, old - gain))
            freed += gain
            if freed + EPS >= need:
                break
    return AllocationPlan(r0.id, list(route.refs), rate_of(r0.id), order)


def apply_plan(
    net: MultiLayerNet, plan: AllocationPlan, r0: ServiceRequest, t_c: float
) -> list[ServiceRequest]:
    """Apply ``plan`` and admit ``r0``; returns the existing requests whose
    finish time moved."""
    moved = []
    for rid, _old, new in plan.degraded:
        if rid == r0.id:
            continue
        x = net.requests[rid]
        x.advance(t_c)
        net.set_request_rate(rid, new)
        x.finish = t_c + x.remaining_at(t_c) / new
        moved.append(x)
    r0.last_update = t_c
    net.attach_request(r0, plan.route, plan.rate)
    r0.finish = t_c + r0.volume / plan.rate
    return moved
