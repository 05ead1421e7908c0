"""Discrete-event simulation core.

Every arrival first goes through conventional provisioning (grooming, then a
new First-Fit lightpath on the fewest-hop fiber route). Only if that fails
does the policy's degradation run: electric (degraded routing + ED-BA over
existing lightpaths) and/or optical (degraded routing over fibers + OD-MSA
for a new lightpath). Blocked requests are dropped.
"""

from __future__ import annotations

import hashlib
import heapq
import itertools
import logging
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .electric import ServiceRequest, apply_plan, ed_ba
from .metrics import PRIORITIES, MetricsAccumulator, bbp, instantaneous_series
from .netmodel import ELECTRIC, EPS, OPTICAL, MultiLayerNet
from .optical import (
    ProvisionConfig,
    establish_degraded,
    lightpath_slots,
    optical_route,
    provision_lightpath_layer,
)
from .routing import MIN_PDR, MIN_RH, ROUTING_POLICIES, DegradedRoute, min_pdr_route, min_rh_route

log = logging.getLogger(__name__)

DEPARTURE, ARRIVAL = 0, 1

ADMIT = "admit"
ADMIT_DEGRADED = "admit-degraded"
BLOCKED = "blocked"

E_FIRST = "E-first"
O_FIRST = "O-first"

# Degraded requests keep their reduced rate until they finish.
KEEP_DEGRADED_RATE = True


@dataclass(frozen=True)
class PolicyConfig:
    layers: str = "none"  # none | E | O | OE
    routing: str = MIN_RH

    def __post_init__(self):
        if self.layers not in ("none", "E", "O", "OE"):
            raise ValueError(f"unknown degradation layers {self.layers!r}")
        if self.routing not in ROUTING_POLICIES:
            raise ValueError(f"unknown routing policy {self.routing!r}")

    @property
    def electric(self) -> bool:
        return "E" in self.layers

    @property
    def optical(self) -> bool:
        return "O" in self.layers

    @property
    def name(self) -> str:
        if self.layers == "none":
            return "baseline"
        return f"{self.layers}-{self.routing}"

    @classmethod
    def parse(cls, name: str) -> "PolicyConfig":
        if name == "baseline":
            return cls()
        try:
            layers, routing = name.split("-", 1)
            return cls(layers, routing)
        except ValueError:
            raise ValueError(f"unknown policy {name!r}") from None


POLICY_NAMES = (
    "baseline", "OE-MinPDR", "O-MinPDR", "E-MinPDR", "OE-MinRH", "O-MinRH", "E-MinRH",
)
POLICIES = tuple(PolicyConfig.parse(n) for n in POLICY_NAMES)


@dataclass(frozen=True)
class EngineConfig:
    provision: ProvisionConfig = ProvisionConfig()
    oe_order: str = E_FIRST
    window: float = 0.05
    warmup: int = 0
    audit: bool = False
    trace: bool = False
    compare_routes: bool = True

    def __post_init__(self):
        if self.oe_order not in (E_FIRST, O_FIRST):
            raise ValueError(f"unknown oe-order {self.oe_order!r}")


class EventQueue:
    """Min-heap of events ordered by (time, departures first, request id).

    Rescheduling a departure leaves the old entry in the heap and marks it
    stale; stale entries are skipped on pop.
    """

    def __init__(self):
        self._heap: list[tuple[float, int, int, int]] = []
        self._seq = itertools.count()
        self._departures: dict[int, int] = {}

    def __len__(self) -> int:
        return len(self._departures) + sum(1 for e in self._heap if e[1] == ARRIVAL)

    def push_arrival(self, t: float, req_id: int) -> None:
        heapq.heappush(self._heap, (t, ARRIVAL, req_id, next(self._seq)))

    def schedule_departure(self, t: float, req_id: int) -> None:
        seq = next(self._seq)
        self._departures[req_id] = seq
        heapq.heappush(self._heap, (t, DEPARTURE, req_id, seq))

    def departure_time(self, req_id: int) -> float | None:
        seq = self._departures.get(req_id)
        if seq is None:
            return None
        for t, kind, rid, s in self._heap:
            if s == seq:
                return t
        return None

    def pop(self) -> tuple[float, int, int] | None:
        while self._heap:
            t, kind, rid, seq = heapq.heappop(self._heap)
            if kind == DEPARTURE:
                if self._departures.get(rid) != seq:
                    continue
                del self._departures[rid]
            return t, kind, rid
        return None

    def pending(self) -> list[tuple[float, int, int]]:
        live = [
            (t, k, rid) for t, k, rid, seq in self._heap
            if k == ARRIVAL or self._departures.get(rid) == seq
        ]
        return sorted(live)


def reschedule_after_degradation(
    queue: EventQueue, moved: Iterable[ServiceRequest]
) -> EventQueue:
    """Move the departure of each degraded request to its recomputed finish."""
    for r in moved:
        queue.schedule_departure(r.finish, r.id)
    return queue


@dataclass
class RouteStats:
    """Sums over every degraded-routing call of both policies' routes, each
    computed on the same snapshot."""

    calls: int = 0
    pdr: dict[str, int] = field(default_factory=lambda: {MIN_RH: 0, MIN_PDR: 0})
    rh: dict[str, int] = field(default_factory=lambda: {MIN_RH: 0, MIN_PDR: 0})
    violations: int = 0

    def mean(self, metric: str, policy: str) -> float:
        total = (self.pdr if metric == "pdr" else self.rh)[policy]
        return total / self.calls if self.calls else 0.0


@dataclass
class SimulationReport:
    policy: str
    seed: int | None
    load: float | None
    offered: dict[int, float]
    blocked: dict[int, float]
    bbp: float
    bbp_by_priority: dict[int, float]
    counters: dict[str, int]
    series: list[tuple[float, float, float]]
    route_stats: RouteStats
    trace_digest: str
    trace: list[str]
    max_deadline_overrun: float
    max_volume_error: float
    horizon: float

    def summary(self) -> str:
        lines = [f"policy={self.policy} seed={self.seed} load={self.load}", f"bbp={self.bbp:.6g}"]
        lines += [f"bbp[{p}]={self.bbp_by_priority[p]:.6g}" for p in sorted(self.bbp_by_priority)]
        lines += [f"{k}={v}" for k, v in sorted(self.counters.items())]
        return "\n".join(lines)


def _fmt(x: float) -> str:
    return repr(float(x))


class Simulator:
    def __init__(
        self,
        net: MultiLayerNet,
        policy: PolicyConfig = PolicyConfig(),
        config: EngineConfig = EngineConfig(),
    ):
        self.net = net
        self.policy = policy
        self.config = config
        self.queue = EventQueue()
        self.metrics = MetricsAccumulator(window=config.window)
        self.route_stats = RouteStats()
        self.counters = {
            "arrivals": 0, "admitted": 0, "admitted_conventional": 0, "admitted_electric": 0,
            "admitted_optical": 0, "blocked": 0, "self_degraded": 0, "requests_degraded": 0,
            "lightpaths_degraded": 0, "lightpaths_established": 0, "lightpaths_torn_down": 0,
            "departures": 0,
        }
        self.trace: list[str] = []
        self._hash = hashlib.sha256()
        self.max_deadline_overrun = 0.0
        self.max_volume_error = 0.0
        self.now = 0.0

    # -- bookkeeping ------------------------------------------------------
    def _log(self, line: str) -> None:
        self._hash.update(line.encode())
        self._hash.update(b"\n")
        if self.config.trace:
            self.trace.append(line)

    def _audit(self) -> None:
        problems = self.net.audit()
        if problems:
            raise AssertionError(f"t={self.now}: " + "; ".join(problems[:5]))

    def _compare(self, layer: str, s: int, d: int, needed: float) -> None:
        if not self.config.compare_routes:
            return
        rh = min_rh_route(self.net, layer, s, d, needed)
        pdr = min_pdr_route(self.net, layer, s, d, needed)
        if rh is None or pdr is None:
            return
        st = self.route_stats
        st.calls += 1
        st.pdr[MIN_RH] += rh.pdr
        st.pdr[MIN_PDR] += pdr.pdr
        st.rh[MIN_RH] += rh.rh
        st.rh[MIN_PDR] += pdr.rh
        if pdr.pdr > rh.pdr or rh.rh > pdr.rh:
            st.violations += 1

    def _route(self, layer: str, s: int, d: int, needed: float) -> DegradedRoute | None:
        self._compare(layer, s, d, needed)
        if self.policy.routing == MIN_PDR:
            return min_pdr_route(self.net, layer, s, d, needed)
        return min_rh_route(self.net, layer, s, d, needed)

    # -- pipeline stages --------------------------------------------------
    def _conventional(self, r0: ServiceRequest, t_c: float) -> bool:
        prov = provision_lightpath_layer(self.net, r0, MIN_RH, False, self.config.provision)
        if prov is None:
            return False
        if prov.new_lightpath is not None:
            self.counters["lightpaths_established"] += 1
        r0.last_update = t_c
        self.net.attach_request(r0, prov.route, r0.bw)
        r0.finish = t_c + r0.tau
        self._log(f"{_fmt(t_c)} admit {r0.id} conventional {prov.kind} {prov.route}")
        return True

    def _electric(self, r0: ServiceRequest, t_c: float) -> list[ServiceRequest] | None:
        route = self._route(ELECTRIC, r0.s, r0.d, r0.bw)
        if route is None:
            return None
        plan = ed_ba(self.net, route, r0, t_c)
        if plan is None:
            return None
        moved = apply_plan(self.net, plan, r0, t_c)
        self.counters["requests_degraded"] += len(moved)
        self.counters["self_degraded"] += int(plan.self_degraded)
        for rid, old, new in plan.degraded:
            if rid != r0.id:
                self.metrics.record_rate_change(t_c, new - old)
        self._log(
            f"{_fmt(t_c)} admit {r0.id} electric rate={_fmt(plan.rate)} route={plan.route} "
            + " ".join(f"{rid}:{_fmt(new)}" for rid, _o, new in plan.degraded)
        )
        return moved

    def _optical(self, r0: ServiceRequest, t_c: float) -> bool:
        cfg = self.config.provision
        needed = lightpath_slots(self.net, r0.bw, self.net.modulation.default_level, cfg)
        self._compare(OPTICAL, r0.s, r0.d, needed)
        nodes = optical_route(self.net, r0.s, r0.d, self.policy.routing, needed)
        if nodes is None:
            return False
        done = establish_degraded(self.net, nodes, r0.bw, cfg)
        if done is None:
            return False
        lp, plan = done
        self.counters["lightpaths_established"] += 1
        self.counters["lightpaths_degraded"] += len(plan.degradations)
        r0.last_update = t_c
        self.net.attach_request(r0, [lp.id], r0.bw)
        r0.finish = t_c + r0.tau
        self._log(
            f"{_fmt(t_c)} admit {r0.id} optical lp={lp.id} nodes={list(nodes)} "
            f"span={lp.xi_l}-{lp.xi_r} degraded={[d[0] for d in plan.degradations]}"
        )
        return True

    # -- events -----------------------------------------------------------
    def on_arrival(self, r0: ServiceRequest, t_c: float) -> str:
        if self._conventional(r0, t_c):
            self.counters["admitted_conventional"] += 1
            return ADMIT
        stages = []
        if self.policy.electric:
            stages.append("E")
        if self.policy.optical:
            stages.append("O")
        if self.config.oe_order == O_FIRST:
            stages.reverse()
        for stage in stages:
            if stage == "E":
                moved = self._electric(r0, t_c)
                if moved is not None:
                    reschedule_after_degradation(self.queue, moved)
                    self.counters["admitted_electric"] += 1
                    return ADMIT_DEGRADED
            elif self._optical(r0, t_c):
                self.counters["admitted_optical"] += 1
                return ADMIT_DEGRADED
        self._log(f"{_fmt(t_c)} block {r0.id}")
        return BLOCKED

    def on_departure(self, req_id: int, t_c: float) -> list[int]:
        if req_id not in self.net.requests:
            raise ValueError(f"unknown request {req_id}")
        r = self.net.requests[req_id]
        self.max_deadline_overrun = max(self.max_deadline_overrun, t_c - r.deadline)
        r.advance(t_c)
        self.max_volume_error = max(self.max_volume_error, abs(r.delivered - r.volume) / r.volume)
        self.metrics.record_rate_change(t_c, -r.current_rate)
        emptied = self.net.detach_request(req_id)
        for lp_id in emptied:
            self.net.remove_lightpath(lp_id)
        self.counters["lightpaths_torn_down"] += len(emptied)
        self.counters["departures"] += 1
        self._log(f"{_fmt(t_c)} depart {req_id} teardown={emptied}")
        return emptied

    def run(self, requests: Iterable[ServiceRequest]) -> None:
        stream: Iterator[ServiceRequest] = iter(requests)
        pending: dict[int, ServiceRequest] = {}
        n_seen = 0

        def feed() -> None:
            r = next(stream, None)
            if r is not None:
                pending[r.id] = r
                self.queue.push_arrival(r.t, r.id)

        feed()
        while True:
            event = self.queue.pop()
            if event is None:
                break
            t_c, kind, rid = event
            if t_c + EPS < self.now:
                raise AssertionError("event queue went back in time")
            self.now = t_c
            if kind == ARRIVAL:
                r0 = pending.pop(rid)
                feed()
                self.counters["arrivals"] += 1
                outcome = self.on_arrival(r0, t_c)
                admitted = outcome != BLOCKED
                counted = n_seen >= self.config.warmup
                n_seen += 1
                self.metrics.record_arrival(t_c, r0.bw, r0.rho, not admitted, counted)
                if admitted:
                    self.counters["admitted"] += 1
                    self.metrics.record_rate_change(t_c, r0.current_rate)
                    self.queue.schedule_departure(r0.finish, r0.id)
                else:
                    self.counters["blocked"] += 1
            else:
                self.on_departure(rid, t_c)
            if self.config.audit:
                self._audit()

    def report(self, seed: int | None = None, load: float | None = None) -> SimulationReport:
        acc = self.metrics
        return SimulationReport(
            policy=self.policy.name,
            seed=seed,
            load=load,
            offered=dict(acc.offered),
            blocked=dict(acc.blocked),
            bbp=bbp(acc),
            bbp_by_priority={p: bbp(acc, p) for p in PRIORITIES},
            counters=dict(self.counters),
            series=instantaneous_series(acc, acc.horizon),
            route_stats=self.route_stats,
            trace_digest=self._hash.hexdigest(),
            trace=list(self.trace),
            max_deadline_overrun=self.max_deadline_overrun,
            max_volume_error=self.max_volume_error,
            horizon=acc.horizon,
        )


def run(
    net: MultiLayerNet,
    workload: Iterable[ServiceRequest],
    policy: PolicyConfig = PolicyConfig(),
    config: EngineConfig = EngineConfig(),
    seed: int | None = None,
    load: float | None = None,
) -> SimulationReport:
    sim = Simulator(net, policy, config)
    sim.run(workload)
    return sim.report(seed, load)
