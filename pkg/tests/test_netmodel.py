import pytest

from degradesim.netmodel import (
    ELECTRIC,
    OPTICAL,
    TopologyError,
    build_aux_graph,
    default_big_m,
    load_topology,
    load_usnet,
    replace_isolated_endpoint,
)
from degradesim.electric import ServiceRequest

from .conftest import synthetic_view


def test_minimal_topology():
    net = load_topology("nodes 2 slots 10\nlink 0 1 100\n")
    assert net.nodes == (0, 1)
    assert set(net.fibers) == {(0, 1), (1, 0)}
    assert net.fibers[(0, 1)].length == 100
    assert net.fibers[(0, 1)].spectrum == 0
    assert net.n_slots == 10


def test_usnet_counts():
    net = load_usnet()
    assert len(net.nodes) == 24
    assert len(net.fibers) == 86
    assert net.n_slots == 300
    assert load_usnet(60).n_slots == 60


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("nodes 2 slots 10\nlink 0 0 5\n", "self-loop"),
        ("nodes 2 slots 10\nlink 0 1 -3\n", "non-positive"),
        ("nodes 2 slots 10\nlink 0 1 0\n", "non-positive"),
        ("nodes 2 slots 10\nlink 0 1 5\nlink 1 0 7\n", "duplicate"),
        ("nodes 2 slots 10\nlink 0 1\n", "line 2"),
        ("link 0 1 5\n", "line 1"),
        ("nodes 2 slots 10\nlink 0 5 5\n", "unknown node"),
        ("", "empty"),
    ],
)
def test_topology_rejections(text, fragment):
    with pytest.raises(TopologyError, match=fragment):
        load_topology(text)


def test_comments_and_blank_lines():
    net = load_topology("# header\n\nnodes 3 slots 4  # trailing\nlink 0 1 10\n\nlink 1 2 20\n")
    assert len(net.fibers) == 4


def test_aux_graph_resource_link_only():
    net = load_topology("nodes 2 slots 10\nlink 0 1 100\n")
    aux = build_aux_graph(net, OPTICAL)
    assert aux.weights[(0, 1)] == 1
    assert aux.weights[(1, 0)] == 1


# Five-node electric layer: a=0 b=1 c=2 d=3 e=4.
A, B, C, D, E = range(5)
FIVE_NODE_EDGES = [(A, B), (B, C), (A, E), (E, C), (A, C), (C, D)]


def five_node_view(free_ac=50.0):
    requests = {1: [A, B, C], 2: [A, E, C]}
    free = {(A, E): 0.0, (E, C): 0.0, (A, C): free_ac}
    return synthetic_view(5, FIVE_NODE_EDGES, requests, free)


def test_aux_graph_request_plus_resource():
    view = five_node_view()
    m = default_big_m(view)
    aux = build_aux_graph(view, ELECTRIC, m)
    assert aux.weights[(A, C)] == m + 1
    assert aux.weights[(A, B)] == 1


def test_aux_graph_request_without_resource():
    view = synthetic_view(5, FIVE_NODE_EDGES, {7: [A, E]}, {(A, E): 0.0})
    m = default_big_m(view)
    aux = build_aux_graph(view, ELECTRIC, m)
    assert aux.weights[(A, E)] == m


def test_aux_graph_weight_decomposition():
    view = five_node_view()
    m = default_big_m(view)
    aux = build_aux_graph(view, ELECTRIC, m)
    for w in aux.weights.values():
        assert w % m in (0, 1) and w // m in (0, 1) and w > 0


def test_aux_graph_requires_large_m():
    with pytest.raises(ValueError):
        build_aux_graph(five_node_view(), ELECTRIC, 3)


def test_aux_graph_pure():
    view = five_node_view()
    assert build_aux_graph(view, ELECTRIC, 99) == build_aux_graph(view, ELECTRIC, 99)


def test_replace_isolated_endpoint_five_nodes():
    assert replace_isolated_endpoint(five_node_view(), ELECTRIC, E) == {A, C}


def test_replace_isolated_endpoint_not_bypassed():
    view = synthetic_view(3, [(0, 1)], {}, {(0, 1): 10.0})
    assert replace_isolated_endpoint(view, ELECTRIC, 2) == set()


def test_replace_isolated_endpoint_two_bypasses():
    x, e, y, u, v = range(5)
    edges = [(x, e), (e, y), (u, e), (e, v)]
    view = synthetic_view(5, edges, {1: [x, e, y], 2: [u, e, v]}, {k: 0.0 for k in edges})
    assert replace_isolated_endpoint(view, ELECTRIC, e) == {x, y, u, v}


def test_replace_requires_isolation():
    with pytest.raises(ValueError, match="not isolated"):
        replace_isolated_endpoint(five_node_view(), ELECTRIC, A)


def test_spectrum_consistency_after_operations(line_net):
    lp = line_net.add_lightpath((0, 1, 2), 1, 4, 2)
    lp2 = line_net.add_lightpath((1, 2), 5, 6, 2)
    assert line_net.fibers[(1, 2)].spectrum == 0b111111
    line_net.reshape_lightpath(lp.id, 1, 2, 4)
    assert line_net.fibers[(0, 1)].spectrum == 0b11
    assert line_net.fibers[(1, 2)].spectrum == 0b110011
    assert line_net.audit() == []
    line_net.remove_lightpath(lp2.id)
    assert line_net.fibers[(1, 2)].spectrum == 0b11
    assert line_net.audit() == []


def test_overlap_rejected(line_net):
    line_net.add_lightpath((0, 1), 3, 5, 2)
    with pytest.raises(ValueError, match="busy"):
        line_net.add_lightpath((0, 1, 2), 5, 6, 2)


def test_request_attach_and_views(line_net):
    lp = line_net.add_lightpath((0, 1, 2), 1, 12 - 2, 2)
    r = ServiceRequest(id=3, s=0, d=2, bw=10, t=0, tau=1, eta=1, rho=1)
    line_net.attach_request(r, [lp.id], 10.0)
    view = line_net.layer_view(ELECTRIC)
    assert view.links[0].carried == frozenset({3})
    assert view.links[0].free_capacity == pytest.approx(lp.capacity - 10)
    assert view.upper[0].nodes == (0, 1, 2)
    opt = line_net.layer_view(OPTICAL)
    assert {l.carried for l in opt.links if l.carried} == {frozenset({lp.id})}
    with pytest.raises(ValueError, match="still carries"):
        line_net.remove_lightpath(lp.id)
    assert line_net.detach_request(3) == [lp.id]
