from __future__ import annotations

import itertools
import random

import pytest

from degradesim.netmodel import ELECTRIC, LayerLink, LayerView, UpperEntity, load_topology


# filled by the acceptance suite, printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def synthetic_view(n, edges, requests=None, free=None, layer=ELECTRIC):
    """LayerView over ``n`` nodes whose links carry the given requests.

    ``requests`` maps id -> node path; every consecutive pair must be an edge.
    ``free`` maps (u, v) -> free capacity (default 100).
    """
    requests = requests or {}
    free = free or {}
    carried = {e: set() for e in edges}
    for rid, path in requests.items():
        for a, b in zip(path, path[1:]):
            carried[(a, b)].add(rid)
    links = tuple(
        LayerLink(u, v, 0, frozenset(carried[(u, v)]), float(free.get((u, v), 100.0)), i)
        for i, (u, v) in enumerate(edges)
    )
    upper = tuple(UpperEntity(rid, tuple(p)) for rid, p in sorted(requests.items()))
    return LayerView(layer, tuple(range(n)), links, upper)


def random_instance(rng: random.Random, max_nodes=7, max_requests=4, p_edge=0.45):
    n = rng.randint(3, max_nodes)
    edges = [(u, v) for u, v in itertools.permutations(range(n), 2) if rng.random() < p_edge]
    adj = {}
    for u, v in edges:
        adj.setdefault(u, []).append(v)
    requests = {}
    for rid in range(rng.randint(0, max_requests)):
        # random walk without revisits
        start = rng.randrange(n)
        path = [start]
        for _ in range(rng.randint(1, n - 1)):
            options = [w for w in adj.get(path[-1], []) if w not in path]
            if not options:
                break
            path.append(rng.choice(options))
        if len(path) >= 2:
            requests[100 + rid] = path
    free = {e: rng.choice([0.0, 5.0, 50.0]) for e in edges}
    s, d = rng.sample(range(n), 2)
    return synthetic_view(n, edges, requests, free), s, d


def brute_force_routes(view: LayerView, s, d):
    """All simple s->d paths as (pdr, rh, nodes), by exhaustive DFS."""
    out_links = {}
    for link in view.links:
        out_links.setdefault(link.src, []).append(link)
    results = []

    def dfs(node, nodes, crossed):
        if node == d:
            results.append((len(crossed), len(nodes) - 1, tuple(nodes)))
            return
        for link in out_links.get(node, ()):
            if link.dst in nodes:
                continue
            dfs(link.dst, nodes + [link.dst], crossed | link.carried)

    dfs(s, [s], frozenset())
    return results


def bfs_hops(view: LayerView, s, d):
    frontier, seen, hops = {s}, {s}, 0
    while frontier:
        if d in frontier:
            return hops
        nxt = {l.dst for l in view.links if l.src in frontier and l.dst not in seen}
        seen |= nxt
        frontier = nxt
        hops += 1
    return None


@pytest.fixture
def line_net():
    """Three nodes in a line, 10 slots, 500 km hops."""
    return load_topology("nodes 3 slots 10\nlink 0 1 500\nlink 1 2 500\n")
