"""Degraded routing: MinRH and MinPDR route computation on either layer.

MinPDR follows the enhanced multi-layer construction: weight the upper layer
(requests above the electric layer, lightpaths above the optical layer),
substitute isolated endpoints, take a weighted shortest path there and
expand it into fewest-hop lower-layer segments. That candidate then bounds an
exact label-setting search over (node, set of crossed entities) labels, so
the returned route has the true minimum PDR whenever the search finishes
within its label budget.
"""

from __future__ import annotations

import heapq
import itertools
from collections import deque
from dataclasses import dataclass
from typing import Iterable

from .netmodel import (
    AuxGraph,
    LayerLink,
    LayerView,
    MultiLayerNet,
    Node,
    _as_view,
    aux_graph_from_view,
    bypass_substitutes,
    default_big_m,
)

MIN_RH = "MinRH"
MIN_PDR = "MinPDR"
ROUTING_POLICIES = (MIN_RH, MIN_PDR)

# Popped labels before the exact search gives up and keeps its incumbent.
LABEL_BUDGET = 20_000


@dataclass(frozen=True)
class DegradedRoute:
    layer: str
    links: tuple[LayerLink, ...]

    def __post_init__(self):
        for a, b in zip(self.links, self.links[1:]):
            if a.dst != b.src:
                raise ValueError("route links are not connected")
        nodes = self.nodes
        if len(set(nodes)) != len(nodes):
            raise ValueError(f"route revisits a node: {nodes}")

    @property
    def nodes(self) -> tuple[Node, ...]:
        if not self.links:
            return ()
        return (self.links[0].src,) + tuple(l.dst for l in self.links)

    @property
    def rh(self) -> int:
        return count_rh(self)

    @property
    def pdr(self) -> int:
        return count_pdr(self)

    @property
    def refs(self) -> list[int]:
        return [l.ref for l in self.links]


def count_rh(route: DegradedRoute | Iterable[LayerLink]) -> int:
    links = route.links if isinstance(route, DegradedRoute) else tuple(route)
    return len(links)


def count_pdr(route: DegradedRoute | Iterable[LayerLink]) -> int:
    """Distinct upper-layer entities crossing any link of the route."""
    links = route.links if isinstance(route, DegradedRoute) else tuple(route)
    seen_links = set()
    crossed: set[int] = set()
    for link in links:
        key = (link.src, link.dst, link.k, link.ref)
        if key in seen_links:
            raise ValueError(f"link {link.src}->{link.dst} listed twice in route")
        seen_links.add(key)
        crossed |= link.carried
    return len(crossed)


def _route_key(route: DegradedRoute, mode: str) -> tuple:
    if mode == MIN_PDR:
        return (route.pdr, route.rh, route.nodes)
    return (route.rh, route.pdr, route.nodes)


def _check_endpoints(view: LayerView, s: Node, d: Node) -> None:
    nodes = set(view.nodes)
    for n in (s, d):
        if n not in nodes:
            raise ValueError(f"unknown node {n!r}")
    if s == d:
        raise ValueError("source and destination coincide")


def hop_distances(adj: dict[Node, list[LayerLink]], target: Node) -> dict[Node, int]:
    """Fewest hops from every node to ``target``."""
    rev: dict[Node, list[Node]] = {n: [] for n in adj}
    for links in adj.values():
        for l in links:
            rev[l.dst].append(l.src)
    dist = {target: 0}
    queue = deque([target])
    while queue:
        v = queue.popleft()
        for u in rev[v]:
            if u not in dist:
                dist[u] = dist[v] + 1
                queue.append(u)
    return dist


def _label_search(
    adj: dict[Node, list[LayerLink]],
    s: Node,
    d: Node,
    mode: str,
    bound: tuple[int, int] | None = None,
    budget: int = LABEL_BUDGET,
) -> tuple[tuple[LayerLink, ...] | None, bool]:
    """Best-first search over simple paths with labels (crossed set, hops).

    Keys are (pdr, hops, nodes) for MinPDR and (hops, pdr, nodes) for MinRH,
    both monotone under extension, so the first label settled at ``d`` is
    optimal. A label is dropped when a settled label at the same node crossed
    a subset of its entities using no more hops (earlier in order on equal
    hops). Returns (links or None, finished-within-budget).
    """
    rdist = hop_distances(adj, d)
    if s not in rdist:
        return None, True
    min_hops = rdist[s]
    best_pdr, best_hops = bound if bound is not None else (None, None)

    def key(crossed: frozenset, hops: int, nodes: tuple) -> tuple:
        if mode == MIN_PDR:
            return (len(crossed), hops, nodes)
        return (hops, len(crossed), nodes)

    settled: dict[Node, list[tuple[frozenset, int, tuple]]] = {}

    def dominated(node: Node, crossed: frozenset, hops: int, nodes: tuple) -> bool:
        for c2, h2, n2 in settled.get(node, ()):
            if c2 <= crossed and (h2 < hops or (h2 == hops and n2 <= nodes)):
                return True
        return False

    counter = itertools.count()
    start = frozenset()
    heap = [(key(start, 0, (s,)), next(counter), s, start, (s,), ())]
    pops = 0
    while heap:
        _k, _c, v, crossed, nodes, links = heapq.heappop(heap)
        if dominated(v, crossed, len(links), nodes):
            continue
        pops += 1
        if pops > budget:
            return None, False
        settled.setdefault(v, []).append((crossed, len(links), nodes))
        if v == d:
            return links, True
        hops = len(links) + 1
        for link in adj[v]:
            w = link.dst
            if w in nodes or w not in rdist:
                continue
            c2 = crossed | link.carried
            if mode == MIN_RH:
                if hops + rdist[w] > min_hops:
                    continue
            elif best_pdr is not None:
                if len(c2) > best_pdr or (len(c2) == best_pdr and hops + rdist[w] > best_hops):
                    continue
            n2 = nodes + (w,)
            if dominated(w, c2, hops, n2):
                continue
            heapq.heappush(heap, (key(c2, hops, n2), next(counter), w, c2, n2, links + (link,)))
    return None, True


def _fewest_hops_nodes(adj: dict[Node, list[LayerLink]], s: Node, d: Node) -> list[Node] | None:
    """Lexicographically smallest fewest-hop node path (BFS with sorted neighbours)."""
    if s == d:
        return [s]
    prev = {s: None}
    queue = deque([s])
    while queue:
        v = queue.popleft()
        for link in adj[v]:
            if link.dst not in prev:
                prev[link.dst] = v
                if link.dst == d:
                    path = [d]
                    while prev[path[-1]] is not None:
                        path.append(prev[path[-1]])
                    return path[::-1]
                queue.append(link.dst)
    return None


def cancel_loops(walk: list[Node]) -> list[Node]:
    out: list[Node] = []
    pos: dict[Node, int] = {}
    for n in walk:
        if n in pos:
            cut = pos[n]
            for dropped in out[cut + 1 :]:
                del pos[dropped]
            del out[cut + 1 :]
        else:
            pos[n] = len(out)
            out.append(n)
    return out


def _links_for(adj: dict[Node, list[LayerLink]], nodes: list[Node]) -> tuple[LayerLink, ...]:
    table = {(l.src, l.dst): l for links in adj.values() for l in links}
    return tuple(table[(a, b)] for a, b in zip(nodes, nodes[1:]))


def _upper_shortest_path(aux: AuxGraph, s: Node, d: Node) -> list[Node] | None:
    """Dijkstra on the auxiliary graph, ties broken by node sequence."""
    if s == d:
        return [s]
    out: dict[Node, list[tuple[Node, int]]] = {n: [] for n in aux.nodes}
    for (i, j), w in sorted(aux.weights.items()):
        out[i].append((j, w))
    heap = [(0, (s,))]
    done = set()
    while heap:
        dist, path = heapq.heappop(heap)
        v = path[-1]
        if v in done:
            continue
        done.add(v)
        if v == d:
            return list(path)
        for w, weight in out[v]:
            if w not in done and w not in path:
                heapq.heappush(heap, (dist + weight, path + (w,)))
    return None


def aux_graph_candidate(
    view: LayerView, s: Node, d: Node, big_m: int | None = None, needed: float = 0.0
) -> DegradedRoute | None:
    """Route from the auxiliary-graph construction alone (no refinement)."""
    _check_endpoints(view, s, d)
    if big_m is None:
        big_m = default_big_m(view)
    aux = aux_graph_from_view(view, big_m, needed)
    adj = view.adjacency(needed)
    sources = [s]
    targets = [d]
    if aux.degree(s) == 0:
        sources = sorted(bypass_substitutes(view, s)) or [s]
    if aux.degree(d) == 0:
        targets = sorted(bypass_substitutes(view, d)) or [d]
    best = None
    for s2, d2 in itertools.product(sources, targets):
        upper = _upper_shortest_path(aux, s2, d2)
        if upper is None:
            continue
        # Substituted ends are expanded from/to the isolated node itself.
        upper = [s] + upper[1:-1] + [d] if len(upper) > 1 else [s, d]
        walk = [s]
        ok = True
        for m, n in zip(upper, upper[1:]):
            seg = _fewest_hops_nodes(adj, m, n)
            if seg is None:
                ok = False
                break
            walk.extend(seg[1:])
        if not ok:
            continue
        nodes = cancel_loops(walk)
        route = DegradedRoute(view.layer, _links_for(adj, nodes))
        if best is None or _route_key(route, MIN_PDR) < _route_key(best, MIN_PDR):
            best = route
    return best


def min_pdr_route(
    net: MultiLayerNet | LayerView,
    layer: str,
    s: Node,
    d: Node,
    needed: float = 0.0,
    big_m: int | None = None,
    budget: int = LABEL_BUDGET,
) -> DegradedRoute | None:
    """Route minimising potential degraded requests, then hops, then node order."""
    view = _as_view(net, layer)
    _check_endpoints(view, s, d)
    if big_m is None:
        big_m = default_big_m(net)
    candidate = aux_graph_candidate(view, s, d, big_m, needed)
    bound = (candidate.pdr, candidate.rh) if candidate is not None else None
    links, finished = _label_search(view.adjacency(needed), s, d, MIN_PDR, bound, budget)
    if links is not None:
        return DegradedRoute(view.layer, links)
    if finished and candidate is None:
        return None
    # Either the budget ran out or nothing beat/equalled the bound, which
    # only happens when the candidate itself is optimal.
    return candidate


def min_rh_route(
    net: MultiLayerNet | LayerView,
    layer: str,
    s: Node,
    d: Node,
    needed: float = 0.0,
    budget: int = LABEL_BUDGET,
) -> DegradedRoute | None:
    """Fewest-hop route; ties broken by PDR, then node order."""
    view = _as_view(net, layer)
    _check_endpoints(view, s, d)
    adj = view.adjacency(needed)
    links, finished = _label_search(adj, s, d, MIN_RH, budget=budget)
    if links is not None:
        return DegradedRoute(view.layer, links)
    if finished:
        return None
    nodes = _fewest_hops_nodes(adj, s, d)
    return DegradedRoute(view.layer, _links_for(adj, nodes))


def degraded_route(
    net: MultiLayerNet | LayerView, layer: str, s: Node, d: Node, policy: str, needed: float = 0.0
) -> DegradedRoute | None:
    if policy == MIN_PDR:
        return min_pdr_route(net, layer, s, d, needed)
    if policy == MIN_RH:
        return min_rh_route(net, layer, s, d, needed)
    raise ValueError(f"unknown routing policy {policy!r}")
