"""Three-layer network state and the auxiliary graphs used for degraded routing.

The optical layer holds directed fibers with a spectrum bitmask each, the
electric layer is the virtual topology of lightpaths, and the service layer
holds active requests. Slot ``p`` (1-based) of a fiber maps to bit ``p - 1``
of its mask.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from typing import TYPE_CHECKING, Iterable

from .modulation import TABLE_I, ModulationTable

if TYPE_CHECKING:
    from .electric import ServiceRequest

ELECTRIC = "electric"
OPTICAL = "optical"
LAYERS = (ELECTRIC, OPTICAL)

EPS = 1e-9

Node = int


class TopologyError(ValueError):
    """Raised for malformed topology descriptions."""


@dataclass
class FiberLink:
    id: int
    src: Node
    dst: Node
    length: float
    spectrum: int = 0
    lightpaths: set[int] = field(default_factory=set)

    @property
    def endpoints(self) -> tuple[Node, Node]:
        return self.src, self.dst


@dataclass
class Lightpath:
    """An optical channel occupying slots ``xi_l..xi_r`` (inclusive) on every
    fiber of its route. ``reserved`` maps groomed request ids to Gbps."""

    id: int
    nodes: tuple[Node, ...]
    fibers: tuple[int, ...]
    xi_l: int
    xi_r: int
    level: int
    length: float
    rate_per_slot: float
    reserved: dict[int, float] = field(default_factory=dict)

    @property
    def src(self) -> Node:
        return self.nodes[0]

    @property
    def dst(self) -> Node:
        return self.nodes[-1]

    @property
    def n_slots(self) -> int:
        return self.xi_r - self.xi_l + 1

    @property
    def capacity(self) -> float:
        return self.n_slots * self.rate_per_slot

    @property
    def load(self) -> float:
        return sum(self.reserved.values())

    @property
    def spare(self) -> float:
        return self.capacity - self.load

    @property
    def mask(self) -> int:
        return span_mask(self.xi_l, self.xi_r)


def span_mask(xi_l: int, xi_r: int) -> int:
    """Bitmask with slots ``xi_l..xi_r`` (1-based, inclusive) set."""
    if xi_r < xi_l:
        return 0
    return ((1 << (xi_r - xi_l + 1)) - 1) << (xi_l - 1)


@dataclass(frozen=True)
class LayerLink:
    """A routable link of one layer: ``carried`` is the set of upper-layer
    entities riding it and ``free_capacity`` its spare capacity (Gbps for
    lightpaths, free slots for fibers). ``ref`` names the underlying object."""

    src: Node
    dst: Node
    k: int
    carried: frozenset[int]
    free_capacity: float
    ref: int


@dataclass(frozen=True)
class UpperEntity:
    """Something routed over a layer: a request over lightpaths, or a
    lightpath over fibers. ``nodes`` is its node sequence in that layer."""

    id: int
    nodes: tuple[Node, ...]

    @property
    def src(self) -> Node:
        return self.nodes[0]

    @property
    def dst(self) -> Node:
        return self.nodes[-1]


@dataclass
class LayerView:
    """Read-only snapshot of one layer together with its upper layer."""

    layer: str
    nodes: tuple[Node, ...]
    links: tuple[LayerLink, ...]
    upper: tuple[UpperEntity, ...]
    _adj: dict[float, dict[Node, list[LayerLink]]] = field(default_factory=dict, repr=False)

    def best_link(self, links: list[LayerLink], needed: float = 0.0) -> LayerLink:
        return min(
            links,
            key=lambda l: (l.free_capacity + EPS < needed, len(l.carried), -l.free_capacity, l.k),
        )

    def adjacency(self, needed: float = 0.0) -> dict[Node, list[LayerLink]]:
        """One link per ordered node pair, chosen among parallel links.

        Links that can take ``needed`` are preferred, then the fewest carried
        entities, then the most spare capacity. Neighbours are sorted by node.
        """
        cached = self._adj.get(needed)
        if cached is not None:
            return cached
        bundles: dict[tuple[Node, Node], list[LayerLink]] = {}
        for link in self.links:
            bundles.setdefault((link.src, link.dst), []).append(link)
        adj: dict[Node, list[LayerLink]] = {n: [] for n in self.nodes}
        for (i, _j), bundle in sorted(bundles.items()):
            adj[i].append(bundle[0] if len(bundle) == 1 else self.best_link(bundle, needed))
        self._adj[needed] = adj
        return adj


@dataclass
class AuxGraph:
    nodes: tuple[Node, ...]
    weights: dict[tuple[Node, Node], int]
    big_m: int

    def degree(self, node: Node) -> int:
        return sum(1 for (i, j) in self.weights if i == node or j == node)

    def neighbors(self, node: Node) -> list[tuple[Node, int]]:
        return sorted((j, w) for (i, j), w in self.weights.items() if i == node)


class MultiLayerNet:
    """Mutable network state. All mutations go through methods so that cached
    layer views can be invalidated."""

    def __init__(self, nodes: Iterable[Node], n_slots: int, modulation: ModulationTable = TABLE_I):
        self.nodes: tuple[Node, ...] = tuple(sorted(nodes))
        self.n_slots = n_slots
        self.modulation = modulation
        self.fibers: dict[tuple[Node, Node], FiberLink] = {}
        self.fiber_by_id: list[FiberLink] = []
        self.lightpaths: dict[int, Lightpath] = {}
        self.requests: dict[int, ServiceRequest] = {}
        self._next_lp = 0
        self._version = {ELECTRIC: 0, OPTICAL: 0}
        self._views: dict[str, tuple[int, LayerView]] = {}

    # -- construction -----------------------------------------------------
    def add_fiber(self, u: Node, v: Node, length: float) -> FiberLink:
        if u == v:
            raise TopologyError(f"self-loop fiber at node {u}")
        if u not in self.nodes or v not in self.nodes:
            raise TopologyError(f"fiber {u}->{v} references unknown node")
        if length <= 0:
            raise TopologyError(f"fiber {u}->{v} has non-positive length {length}")
        if (u, v) in self.fibers:
            raise TopologyError(f"duplicate fiber {u}->{v}")
        fiber = FiberLink(len(self.fiber_by_id), u, v, float(length))
        self.fibers[(u, v)] = fiber
        self.fiber_by_id.append(fiber)
        self._touch()
        return fiber

    @property
    def full_mask(self) -> int:
        return (1 << self.n_slots) - 1

    def _touch(self, optical: bool = True) -> None:
        self._version[ELECTRIC] += 1
        if optical:
            self._version[OPTICAL] += 1

    # -- lookups ----------------------------------------------------------
    def fiber_path(self, nodes: tuple[Node, ...] | list[Node]) -> list[FiberLink]:
        try:
            return [self.fibers[(a, b)] for a, b in zip(nodes, nodes[1:])]
        except KeyError as exc:
            raise ValueError(f"no fiber {exc.args[0]} on route {tuple(nodes)}") from None

    def path_length(self, nodes: tuple[Node, ...] | list[Node]) -> float:
        return sum(f.length for f in self.fiber_path(nodes))

    def check_node(self, node: Node) -> None:
        if node not in self._node_set:
            raise ValueError(f"unknown node {node!r}")

    @property
    def _node_set(self) -> frozenset[Node]:
        return frozenset(self.nodes)

    # -- lightpaths -------------------------------------------------------
    def add_lightpath(self, nodes: tuple[Node, ...] | list[Node], xi_l: int, xi_r: int, level: int) -> Lightpath:
        nodes = tuple(nodes)
        fibers = self.fiber_path(nodes)
        if len(set(nodes)) != len(nodes):
            raise ValueError(f"lightpath route {nodes} repeats a node")
        if not 1 <= xi_l <= xi_r <= self.n_slots:
            raise ValueError(f"slot span [{xi_l}, {xi_r}] outside 1..{self.n_slots}")
        length = sum(f.length for f in fibers)
        if length > self.modulation.reach(level) + EPS:
            raise ValueError(f"{length} km exceeds reach of level {level}")
        mask = span_mask(xi_l, xi_r)
        for f in fibers:
            if f.spectrum & mask:
                raise ValueError(f"slots [{xi_l}, {xi_r}] busy on fiber {f.src}->{f.dst}")
        lp = Lightpath(
            self._next_lp, nodes, tuple(f.id for f in fibers), xi_l, xi_r, level, length,
            self.modulation.rate_per_slot(level),
        )
        self._next_lp += 1
        for f in fibers:
            f.spectrum |= mask
            f.lightpaths.add(lp.id)
        self.lightpaths[lp.id] = lp
        self._touch()
        return lp

    def remove_lightpath(self, lp_id: int) -> None:
        lp = self.lightpaths.pop(lp_id)
        if lp.reserved:
            self.lightpaths[lp_id] = lp
            raise ValueError(f"lightpath {lp_id} still carries requests {sorted(lp.reserved)}")
        for fid in lp.fibers:
            f = self.fiber_by_id[fid]
            f.spectrum &= ~lp.mask
            f.lightpaths.discard(lp_id)
        self._touch()

    def reshape_lightpath(self, lp_id: int, xi_l: int, xi_r: int, level: int) -> Lightpath:
        """Move a lightpath to a sub-span of its current span at a new level."""
        lp = self.lightpaths[lp_id]
        if not lp.xi_l <= xi_l <= xi_r <= lp.xi_r:
            raise ValueError("reshaped span must lie inside the current span")
        freed = lp.mask & ~span_mask(xi_l, xi_r)
        for fid in lp.fibers:
            self.fiber_by_id[fid].spectrum &= ~freed
        lp.xi_l, lp.xi_r, lp.level = xi_l, xi_r, level
        lp.rate_per_slot = self.modulation.rate_per_slot(level)
        self._touch()
        return lp

    # -- requests ---------------------------------------------------------
    def attach_request(self, request: ServiceRequest, route: list[int], rate: float) -> None:
        for lp_id in route:
            lp = self.lightpaths[lp_id]
            if request.id in lp.reserved:
                raise ValueError(f"request {request.id} already on lightpath {lp_id}")
            lp.reserved[request.id] = rate
        request.route = list(route)
        request.current_rate = rate
        self.requests[request.id] = request
        self._touch(optical=False)

    def set_request_rate(self, req_id: int, rate: float) -> None:
        request = self.requests[req_id]
        for lp_id in request.route:
            self.lightpaths[lp_id].reserved[req_id] = rate
        request.current_rate = rate
        self._touch(optical=False)

    def detach_request(self, req_id: int) -> list[int]:
        """Release a request; returns ids of lightpaths left with no traffic."""
        request = self.requests.pop(req_id)
        emptied = []
        for lp_id in request.route:
            lp = self.lightpaths[lp_id]
            del lp.reserved[req_id]
            if not lp.reserved:
                emptied.append(lp_id)
        self._touch(optical=False)
        return emptied

    def request_nodes(self, request: ServiceRequest) -> tuple[Node, ...]:
        nodes = [request.s]
        for lp_id in request.route:
            nodes.extend(self.lightpaths[lp_id].nodes[1:])
        return tuple(nodes)

    # -- views ------------------------------------------------------------
    def layer_view(self, layer: str) -> LayerView:
        cached = self._views.get(layer)
        if cached is not None and cached[0] == self._version.get(layer):
            return cached[1]
        if layer == ELECTRIC:
            view = self._electric_view()
        elif layer == OPTICAL:
            view = self._optical_view()
        else:
            raise ValueError(f"unknown layer {layer!r}")
        self._views[layer] = (self._version[layer], view)
        return view

    def _electric_view(self) -> LayerView:
        links = []
        counts: dict[tuple[Node, Node], int] = {}
        for lp_id in sorted(self.lightpaths):
            lp = self.lightpaths[lp_id]
            k = counts.get((lp.src, lp.dst), 0)
            counts[(lp.src, lp.dst)] = k + 1
            links.append(LayerLink(lp.src, lp.dst, k, frozenset(lp.reserved), lp.spare, lp.id))
        upper = tuple(
            UpperEntity(rid, self.request_nodes(self.requests[rid])) for rid in sorted(self.requests)
        )
        return LayerView(ELECTRIC, self.nodes, tuple(links), upper)

    def _optical_view(self) -> LayerView:
        links = tuple(
            LayerLink(
                f.src, f.dst, 0, frozenset(f.lightpaths),
                float(self.n_slots - f.spectrum.bit_count()), f.id,
            )
            for f in self.fiber_by_id
        )
        upper = tuple(
            UpperEntity(lp.id, lp.nodes) for lp in (self.lightpaths[i] for i in sorted(self.lightpaths))
        )
        return LayerView(OPTICAL, self.nodes, links, upper)

    # -- auditing ---------------------------------------------------------
    def audit(self) -> list[str]:
        """Full rescan of the cross-layer invariants; returns violations."""
        problems = []
        expected = [0] * len(self.fiber_by_id)
        for lp in self.lightpaths.values():
            for fid in lp.fibers:
                if expected[fid] & lp.mask:
                    problems.append(f"lightpath {lp.id} overlaps on fiber {fid}")
                expected[fid] |= lp.mask
                if lp.id not in self.fiber_by_id[fid].lightpaths:
                    problems.append(f"fiber {fid} does not list lightpath {lp.id}")
            if lp.length > self.modulation.reach(lp.level) + EPS:
                problems.append(f"lightpath {lp.id} violates reach")
            if lp.load > lp.capacity + 1e-6:
                problems.append(f"lightpath {lp.id} overloaded {lp.load} > {lp.capacity}")
            for rid in lp.reserved:
                if rid not in self.requests:
                    problems.append(f"lightpath {lp.id} reserves unknown request {rid}")
        for f in self.fiber_by_id:
            if f.spectrum != expected[f.id]:
                problems.append(f"fiber {f.id} mask {f.spectrum:b} != union {expected[f.id]:b}")
            if f.lightpaths - set(self.lightpaths):
                problems.append(f"fiber {f.id} lists stale lightpaths")
        for req in self.requests.values():
            nodes = self.request_nodes(req)
            if nodes[-1] != req.d:
                problems.append(f"request {req.id} route does not end at {req.d}")
            for lp_id in req.route:
                lp = self.lightpaths.get(lp_id)
                if lp is None or abs(lp.reserved.get(req.id, -1.0) - req.current_rate) > EPS:
                    problems.append(f"request {req.id} reservation mismatch on lightpath {lp_id}")
        return problems


# ---------------------------------------------------------------------------
# Topology files
# ---------------------------------------------------------------------------


def load_topology(text: str, modulation: ModulationTable = TABLE_I) -> MultiLayerNet:
    """Parse ``nodes <N> slots <B>`` followed by ``link <u> <v> <km>`` lines.

    Each link line creates both fiber directions. ``#`` starts a comment.
    """
    net = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if net is None:
                if len(parts) != 4 or parts[0] != "nodes" or parts[2] != "slots":
                    raise TopologyError("expected header 'nodes <N> slots <B>'")
                n, b = int(parts[1]), int(parts[3])
                if n < 1 or b < 1:
                    raise TopologyError("node and slot counts must be positive")
                net = MultiLayerNet(range(n), b, modulation)
            else:
                if len(parts) != 4 or parts[0] != "link":
                    raise TopologyError("expected 'link <u> <v> <length_km>'")
                u, v, length = int(parts[1]), int(parts[2]), float(parts[3])
                net.add_fiber(u, v, length)
                net.add_fiber(v, u, length)
        except (TopologyError, ValueError) as exc:
            raise TopologyError(f"line {lineno}: {exc}") from None
    if net is None:
        raise TopologyError("empty topology description")
    return net


def usnet_text() -> str:
    return resources.files("degradesim.data").joinpath("usnet.txt").read_text()


def load_usnet(n_slots: int | None = None) -> MultiLayerNet:
    text = usnet_text()
    if n_slots is not None:
        lines = text.splitlines()
        for i, line in enumerate(lines):
            if line.startswith("nodes"):
                parts = line.split()
                lines[i] = f"nodes {parts[1]} slots {n_slots}"
                break
        text = "\n".join(lines)
    return load_topology(text)


# ---------------------------------------------------------------------------
# Auxiliary graphs
# ---------------------------------------------------------------------------


def default_big_m(net_or_view: MultiLayerNet | LayerView, n_slots: int | None = None) -> int:
    n = len(net_or_view.nodes)
    b = n_slots if n_slots is not None else getattr(net_or_view, "n_slots", n)
    return n * max(b, 1) + 1


def _as_view(net: MultiLayerNet | LayerView, layer: str) -> LayerView:
    if isinstance(net, LayerView):
        if net.layer != layer:
            raise ValueError(f"view is for layer {net.layer!r}, not {layer!r}")
        return net
    return net.layer_view(layer)


def aux_graph_from_view(view: LayerView, big_m: int, needed: float = 0.0) -> AuxGraph:
    if big_m <= len(view.nodes):
        raise ValueError("M must exceed the node count")
    weights: dict[tuple[Node, Node], int] = {}
    for ent in view.upper:
        weights[(ent.src, ent.dst)] = big_m
    for link in view.links:
        if link.free_capacity > EPS and link.free_capacity + EPS >= needed:
            key = (link.src, link.dst)
            w = weights.get(key, 0)
            if w % big_m == 0:
                weights[key] = w + 1
    return AuxGraph(view.nodes, weights, big_m)


def build_aux_graph(
    net: MultiLayerNet | LayerView, layer: str, big_m: int | None = None, needed: float = 0.0
) -> AuxGraph:
    """Weighted upper-layer graph for routing on ``layer``.

    Every upper-layer entity (active request when routing on the electric
    layer, lightpath when routing on the optical layer) adds ``big_m`` to
    its endpoint pair; a direct lower-layer link with free capacity adds 1.
    """
    view = _as_view(net, layer)
    if big_m is None:
        big_m = default_big_m(net)
    return aux_graph_from_view(view, big_m, needed)


def bypass_substitutes(view: LayerView, endpoint: Node) -> set[Node]:
    found: set[Node] = set()
    for ent in view.upper:
        if endpoint in ent.nodes[1:-1]:
            found.add(ent.src)
            found.add(ent.dst)
    return found


def replace_isolated_endpoint(
    net: MultiLayerNet | LayerView, layer: str, endpoint: Node, aux: AuxGraph | None = None
) -> set[Node]:
    """Endpoints of upper-layer entities that pass through ``endpoint``
    without terminating there. ``endpoint`` must be isolated in the
    auxiliary graph."""
    view = _as_view(net, layer)
    if aux is None:
        aux = build_aux_graph(view, layer, default_big_m(net))
    if aux.degree(endpoint) != 0:
        raise ValueError(f"node {endpoint} is not isolated in the upper layer")
    return bypass_substitutes(view, endpoint)
