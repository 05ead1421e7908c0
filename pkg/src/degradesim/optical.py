"""Optical-layer machinery: spectrum scans, lightpath degradation, OD-MSA and
threshold-based grooming.

Degrading a lightpath raises its modulation level and shrinks its slot span
so that ``slots * log2(level)`` (its capacity) is preserved, rounding the
slot count up. A left-hand neighbour shrinks toward its left edge and a
right-hand neighbour toward its right edge, so freed slots always border the
candidate location.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

from .modulation import ModulationTable
from .netmodel import EPS, OPTICAL, FiberLink, Lightpath, MultiLayerNet, Node, span_mask
from .routing import MIN_RH, DegradedRoute, degraded_route

SETUP_DEFAULT = "default"
SETUP_BEST = "best"


class DegradationRefused(ValueError):
    pass


@dataclass(frozen=True)
class LightpathRequest:
    i: Node
    j: Node
    theta: int

    def __post_init__(self):
        if self.theta < 1:
            raise ValueError("a lightpath request needs at least one slot")


def _fibers(net: MultiLayerNet, route) -> list[FiberLink]:
    if isinstance(route, DegradedRoute):
        return [net.fiber_by_id[l.ref] for l in route.links]
    route = list(route)
    if not route:
        raise ValueError("empty optical route")
    if isinstance(route[0], FiberLink):
        return route
    return net.fiber_path(route)


def occupied_mask(net: MultiLayerNet, route) -> int:
    fibers = _fibers(net, route)
    if not fibers:
        raise ValueError("empty optical route")
    occ = 0
    for f in fibers:
        occ |= f.spectrum
    return occ


def _bits(mask: int, width: int) -> list[int]:
    return [p + 1 for p in range(width) if mask >> p & 1]


def compute_assi(net: MultiLayerNet, route) -> list[int]:
    """Slots (1-based) free on every fiber of the route."""
    free = ~occupied_mask(net, route) & net.full_mask
    return _bits(free, net.n_slots)


def compute_sbtl(net: MultiLayerNet, route) -> list[int]:
    """Slot borders ``1..B+1`` that no lightpath on the route straddles.

    Border ``w`` sits between slots ``w - 1`` and ``w``; a span
    ``[xi_l, xi_r]`` straddles exactly the borders ``xi_l + 1 .. xi_r``.
    """
    straddled = 0
    seen = set()
    for f in _fibers(net, route):
        for lp_id in f.lightpaths:
            if lp_id in seen:
                continue
            seen.add(lp_id)
            lp = net.lightpaths[lp_id]
            straddled |= span_mask(lp.xi_l + 1, lp.xi_r)
    border_mask = (1 << (net.n_slots + 1)) - 1
    return _bits(~straddled & border_mask, net.n_slots + 1)


def free_runs(free_slots: Sequence[int]) -> list[tuple[int, int]]:
    """Maximal runs of consecutive slots, as inclusive ``(l, r)`` pairs."""
    runs: list[tuple[int, int]] = []
    for p in free_slots:
        if runs and runs[-1][1] == p - 1:
            runs[-1] = (runs[-1][0], p)
        else:
            runs.append((p, p))
    return runs


def first_fit(free_slots: Sequence[int], theta: int) -> int | None:
    """Lowest start index of ``theta`` consecutive free slots."""
    for l, r in free_runs(free_slots):
        if r - l + 1 >= theta:
            return l
    return None


def degraded_span(
    lp: Lightpath, new_level: int, table: ModulationTable, anchor: str = "left"
) -> tuple[int, int]:
    """Span after raising ``lp`` to ``new_level``, or raise ``DegradationRefused``."""
    if new_level <= lp.level:
        raise DegradationRefused(f"level {new_level} is not above current level {lp.level}")
    if lp.length > table.reach(new_level) + EPS:
        raise DegradationRefused(
            f"{lp.length} km exceeds the {table.reach(new_level)} km reach of level {new_level}"
        )
    bits_old = table.get(lp.level).bits_per_symbol
    bits_new = table.get(new_level).bits_per_symbol
    n_new = -(-(lp.n_slots * bits_old) // bits_new)
    if n_new * table.rate_per_slot(new_level) + EPS < lp.load:
        raise DegradationRefused("degraded capacity would strand groomed traffic")
    if anchor == "left":
        return lp.xi_l, lp.xi_l + n_new - 1
    if anchor == "right":
        return lp.xi_r - n_new + 1, lp.xi_r
    raise ValueError(f"unknown anchor {anchor!r}")


def degrade_lightpath(
    net: MultiLayerNet, lp: Lightpath | int, new_level: int, anchor: str = "left"
) -> Lightpath:
    if isinstance(lp, int):
        lp = net.lightpaths[lp]
    xi_l, xi_r = degraded_span(lp, new_level, net.modulation, anchor)
    return net.reshape_lightpath(lp.id, xi_l, xi_r, new_level)


# ---------------------------------------------------------------------------
# OD-MSA
# ---------------------------------------------------------------------------


@dataclass
class OdMsaPlan:
    nodes: tuple[Node, ...]
    xi_l: int
    xi_r: int
    level: int
    # (lightpath id, new xi_l, new xi_r, new level) in application order
    degradations: list[tuple[int, int, int, int]] = field(default_factory=list)
    side: str = "none"


def _neighbours(net: MultiLayerNet, fibers: list[FiberLink], edge_slot: int, right_edge: bool) -> list[Lightpath]:
    found = {}
    for f in fibers:
        for lp_id in f.lightpaths:
            lp = net.lightpaths[lp_id]
            if (lp.xi_r if right_edge else lp.xi_l) == edge_slot:
                found[lp_id] = lp
    return [found[i] for i in sorted(found)]


def od_msa(
    net: MultiLayerNet,
    route,
    l0: LightpathRequest,
    delta: float | None = None,
    level: int | None = None,
) -> OdMsaPlan | None:
    """Find room for ``l0`` on ``route``, degrading neighbour lightpaths if needed.

    Pure: returns a plan (apply with :func:`apply_od_msa`) or ``None`` when
    blocked.
    """
    fibers = _fibers(net, route)
    nodes = (fibers[0].src,) + tuple(f.dst for f in fibers)
    if nodes[0] != l0.i or nodes[-1] != l0.j:
        raise ValueError("route does not connect the lightpath request endpoints")
    table = net.modulation
    if delta is None:
        delta = sum(f.length for f in fibers)
    if level is None:
        level = table.default_level
    if delta > table.reach(level) + EPS:
        return None
    theta = l0.theta
    masks = {f.id: f.spectrum for f in fibers}
    assi = _bits(~_or(masks.values()) & net.full_mask, net.n_slots)
    start = first_fit(assi, theta)
    if start is not None:
        return OdMsaPlan(nodes, start, start + theta - 1, level)
    runs = free_runs(assi)
    seeds = [(l, r) for l, r in sorted(runs, key=lambda lr: (-(lr[1] - lr[0]), lr[0]))]
    seeds += [(w, w - 1) for w in compute_sbtl(net, fibers)]
    for l, r in seeds:
        plan = _degrade_around(net, fibers, masks, l, r, theta)
        if plan is not None:
            degradations, side, lo = plan
            return OdMsaPlan(nodes, lo, lo + theta - 1, level, degradations, side)
    return None


def _degrade_around(
    net: MultiLayerNet, fibers: list[FiberLink], masks: dict[int, int], l: int, r: int, theta: int
) -> tuple[list[tuple[int, int, int, int]], str, int] | None:
    """Single- then double-side degradation around the free run ``[l, r]``
    (``r = l - 1`` for a bare slot border). Returns (degradations, side,
    first slot of the grown run) or ``None``."""
    table = net.modulation
    masks = dict(masks)
    left = _neighbours(net, fibers, l - 1, right_edge=True) if l > 1 else []
    right = _neighbours(net, fibers, r + 1, right_edge=False) if r < net.n_slots else []
    degradations: list[tuple[int, int, int, int]] = []
    for side, group, anchor in (("single", left, "left"), ("double", right, "right")):
        for lp in group:
            try:
                best = table.best_level_for_distance(lp.length)
                xi_l, xi_r = degraded_span(lp, best, table, anchor)
            except ValueError:
                continue
            freed = lp.mask & ~span_mask(xi_l, xi_r)
            for fid in lp.fibers:
                if fid in masks:
                    masks[fid] &= ~freed
            degradations.append((lp.id, xi_l, xi_r, best))
        lo, hi = _grow(masks.values(), l, r, net.n_slots)
        if hi - lo + 1 >= theta:
            return degradations, side if degradations else "none", lo
    return None


def _or(masks) -> int:
    out = 0
    for m in masks:
        out |= m
    return out


def _grow(masks, l: int, r: int, n_slots: int) -> tuple[int, int]:
    occ = _or(masks)
    lo, hi = l, r
    while lo > 1 and not occ >> (lo - 2) & 1:
        lo -= 1
    while hi < n_slots and not occ >> hi & 1:
        hi += 1
    return lo, hi


def apply_od_msa(net: MultiLayerNet, plan: OdMsaPlan) -> Lightpath:
    for lp_id, xi_l, xi_r, level in plan.degradations:
        net.reshape_lightpath(lp_id, xi_l, xi_r, level)
    return net.add_lightpath(plan.nodes, plan.xi_l, plan.xi_r, plan.level)


# ---------------------------------------------------------------------------
# Grooming and lightpath establishment
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProvisionConfig:
    threshold_gbps: float = 150.0
    setup_modulation: str = SETUP_DEFAULT

    def __post_init__(self):
        if self.threshold_gbps <= 0:
            raise ValueError("grooming threshold must be positive")
        if self.setup_modulation not in (SETUP_DEFAULT, SETUP_BEST):
            raise ValueError(f"unknown setup modulation {self.setup_modulation!r}")


@dataclass
class Provisioning:
    kind: str  # "groomed" | "new" | "od-msa"
    route: list[int]
    new_lightpath: int | None = None
    degraded_lightpaths: list[int] = field(default_factory=list)
    optical_route: tuple[Node, ...] = ()


def groom_route(net: MultiLayerNet, s: Node, d: Node, bw: float) -> list[int] | None:
    """Fewest-hop chain of existing lightpaths with ``bw`` spare on each.

    Among parallel lightpaths the tightest fit is used.
    """
    best: dict[tuple[Node, Node], Lightpath] = {}
    for lp_id in sorted(net.lightpaths):
        lp = net.lightpaths[lp_id]
        if lp.spare + EPS < bw:
            continue
        cur = best.get((lp.src, lp.dst))
        if cur is None or lp.spare < cur.spare - EPS:
            best[(lp.src, lp.dst)] = lp
    adj: dict[Node, list[Lightpath]] = {}
    for (i, _j), lp in sorted(best.items()):
        adj.setdefault(i, []).append(lp)
    prev: dict[Node, Lightpath | None] = {s: None}
    queue = deque([s])
    while queue:
        v = queue.popleft()
        for lp in adj.get(v, ()):
            if lp.dst in prev:
                continue
            prev[lp.dst] = lp
            if lp.dst == d:
                chain = []
                node = d
                while prev[node] is not None:
                    chain.append(prev[node].id)
                    node = prev[node].src
                return chain[::-1]
            queue.append(lp.dst)
    return None


def setup_level(net: MultiLayerNet, distance: float, cfg: ProvisionConfig) -> int | None:
    table = net.modulation
    if cfg.setup_modulation == SETUP_BEST:
        try:
            return table.best_level_for_distance(distance)
        except ValueError:
            return None
    level = table.default_level
    return level if distance <= table.reach(level) + EPS else None


def lightpath_slots(net: MultiLayerNet, bw: float, level: int, cfg: ProvisionConfig) -> int:
    return net.modulation.slots_for_rate(max(bw, cfg.threshold_gbps), level)


def establish_first_fit(
    net: MultiLayerNet, nodes: tuple[Node, ...], bw: float, cfg: ProvisionConfig
) -> Lightpath | None:
    level = setup_level(net, net.path_length(nodes), cfg)
    if level is None:
        return None
    theta = lightpath_slots(net, bw, level, cfg)
    start = first_fit(compute_assi(net, nodes), theta)
    if start is None:
        return None
    return net.add_lightpath(nodes, start, start + theta - 1, level)


def establish_degraded(
    net: MultiLayerNet, nodes: tuple[Node, ...], bw: float, cfg: ProvisionConfig
) -> tuple[Lightpath, OdMsaPlan] | None:
    distance = net.path_length(nodes)
    level = setup_level(net, distance, cfg)
    if level is None:
        return None
    l0 = LightpathRequest(nodes[0], nodes[-1], lightpath_slots(net, bw, level, cfg))
    plan = od_msa(net, nodes, l0, distance, level)
    if plan is None:
        return None
    return apply_od_msa(net, plan), plan


def optical_route(
    net: MultiLayerNet, s: Node, d: Node, policy: str = MIN_RH, needed: float = 0.0
) -> tuple[Node, ...] | None:
    route = degraded_route(net, OPTICAL, s, d, policy, needed)
    return route.nodes if route is not None else None


def provision_lightpath_layer(
    net: MultiLayerNet,
    request,
    policy: str = MIN_RH,
    optical_degradation: bool = False,
    cfg: ProvisionConfig = ProvisionConfig(),
) -> Provisioning | None:
    """Groom ``request`` onto existing lightpaths, else open a new direct
    lightpath by First-Fit, else (if enabled) open one through OD-MSA.

    Does not attach the request; the caller reserves bandwidth on the
    returned lightpath chain.
    """
    chain = groom_route(net, request.s, request.d, request.bw)
    if chain is not None:
        return Provisioning("groomed", chain)
    nodes = optical_route(net, request.s, request.d, policy)
    if nodes is None:
        return None
    lp = establish_first_fit(net, nodes, request.bw, cfg)
    if lp is not None:
        return Provisioning("new", [lp.id], lp.id, optical_route=nodes)
    if not optical_degradation:
        return None
    done = establish_degraded(net, nodes, request.bw, cfg)
    if done is None:
        return None
    lp, plan = done
    return Provisioning("od-msa", [lp.id], lp.id, [d[0] for d in plan.degradations], nodes)
