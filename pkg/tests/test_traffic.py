import io

import pytest

from degradesim.netmodel import load_usnet
from degradesim.traffic import TRACE_COLUMNS, WorkloadConfig, generate, read_trace, write_trace


@pytest.fixture(scope="module")
def usnet():
    return load_usnet()


def fields(r):
    return (r.id, r.s, r.d, r.bw, r.t, r.tau, r.eta, r.rho, r.tolerance)


def test_same_seed_same_stream(usnet):
    cfg = WorkloadConfig.for_load(30, n_requests=500, seed=4)
    assert [fields(r) for r in generate(cfg, usnet)] == [fields(r) for r in generate(cfg, usnet)]


def test_different_seed_different_stream(usnet):
    a = [r.bw for r in generate(WorkloadConfig.for_load(30, n_requests=50, seed=1), usnet)]
    b = [r.bw for r in generate(WorkloadConfig.for_load(30, n_requests=50, seed=2), usnet)]
    assert a != b


def test_fields_in_range(usnet):
    prev = 0.0
    for r in generate(WorkloadConfig.for_load(30, n_requests=5000, seed=3), usnet):
        assert r.s != r.d and r.s in usnet.nodes and r.d in usnet.nodes
        assert 5 <= r.bw <= 150 and 0.25 <= r.tolerance <= 1.0 and 1 <= r.rho <= 5
        assert r.eta >= 0 and r.t >= prev
        # the tolerance floor exactly meets the deadline
        assert r.bw * r.tolerance * (r.tau + r.eta) == pytest.approx(r.bw * r.tau)
        prev = r.t


def test_sample_means(usnet):
    reqs = list(generate(WorkloadConfig(arrival_rate=300, mu=10, n_requests=100_000, seed=11), usnet))
    mean_bw = sum(r.bw for r in reqs) / len(reqs)
    assert abs(mean_bw - 77.5) <= 1.0
    # offered Erlang per node = (arrivals per hour per node) * mean holding time
    span = reqs[-1].t
    per_node_rate = len(reqs) / span / len(usnet.nodes)
    mean_hold = sum(r.tau for r in reqs) / len(reqs)
    assert per_node_rate * mean_hold == pytest.approx(30, rel=0.02)
    counts = [sum(1 for r in reqs if r.rho == p) for p in range(1, 6)]
    assert max(counts) / min(counts) < 1.05


def test_discrete_bandwidth_grid(usnet):
    cfg = WorkloadConfig.for_load(30, n_requests=2000, bw_step=5.0)
    bws = {r.bw for r in generate(cfg, usnet)}
    assert bws <= {5.0 + 5 * k for k in range(30)}
    assert 5.0 in bws and 150.0 in bws


def test_duration_bound(usnet):
    reqs = list(generate(WorkloadConfig.for_load(30, n_requests=None, duration=0.1), usnet))
    assert reqs and all(r.t <= 0.1 for r in reqs)


@pytest.mark.parametrize("kw", [dict(arrival_rate=0, mu=1), dict(arrival_rate=1, mu=1, tolerance_range=(0, 1)),
                                dict(arrival_rate=1, mu=1, n_requests=None)])
def test_invalid_config(kw):
    with pytest.raises(ValueError):
        WorkloadConfig(**kw)


def test_trace_round_trip(usnet):
    reqs = list(generate(WorkloadConfig.for_load(30, n_requests=200, seed=5), usnet))
    buf = io.StringIO()
    write_trace(reqs, buf)
    text = buf.getvalue()
    assert text.splitlines()[0] == ",".join(TRACE_COLUMNS)
    assert [fields(r) for r in read_trace(text)] == [fields(r) for r in reqs]


def test_trace_missing_column():
    with pytest.raises(ValueError, match="missing"):
        read_trace("arrival_time,s,d\n0.1,0,1\n")
