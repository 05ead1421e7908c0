import pytest

from degradesim.metrics import MetricsAccumulator, bbp, carried_volume, instantaneous_series


def test_nothing_offered_is_zero():
    acc = MetricsAccumulator()
    assert bbp(acc) == 0.0 and bbp(acc, 3) == 0.0
    assert instantaneous_series(acc) == []


def test_bbp_ratio():
    acc = MetricsAccumulator()
    for i in range(10):
        acc.record_arrival(0.01 * i, 10.0, 1 + i % 5, blocked=(i == 0))
    assert bbp(acc) == pytest.approx(0.1)
    assert bbp(acc, 1) == pytest.approx(0.5)
    assert bbp(acc, 5) == 0.0


def test_aggregate_is_weighted_mean_of_classes():
    acc = MetricsAccumulator()
    data = [(5, 1, True), (50, 1, False), (20, 3, True), (100, 5, False), (80, 5, True)]
    for i, (bw, p, blk) in enumerate(data):
        acc.record_arrival(i * 0.1, bw, p, blk)
    weighted = sum(acc.offered[p] * bbp(acc, p) for p in acc.offered) / acc.total_offered
    assert bbp(acc) == pytest.approx(weighted)
    assert acc.total_blocked <= acc.total_offered


def test_warmup_arrivals_not_counted():
    acc = MetricsAccumulator()
    acc.record_arrival(0.0, 10, 1, blocked=True, counted=False)
    acc.record_arrival(0.0, 10, 1, blocked=False)
    assert bbp(acc) == 0.0
    assert instantaneous_series(acc, 0.05)[0][2] == pytest.approx(0.5)


def test_constant_request_over_three_windows():
    acc = MetricsAccumulator(window=0.05)
    acc.record_rate_change(0.0, 10.0)
    acc.record_rate_change(0.15, -10.0)
    series = instantaneous_series(acc, 0.15)
    assert [round(x, 9) for x in (s[1] for s in series)] == [10.0, 10.0, 10.0]
    assert [s[0] for s in series] == pytest.approx([0.0, 0.05, 0.1])


def test_mid_window_degradation_is_time_weighted():
    acc = MetricsAccumulator(window=0.05)
    acc.record_rate_change(0.0, 10.0)
    acc.record_rate_change(0.02, -5.0)
    series = instantaneous_series(acc, 0.05)
    assert series[0][1] == pytest.approx((10 * 0.02 + 5 * 0.03) / 0.05)


def test_idle_network_all_zero():
    acc = MetricsAccumulator()
    acc.record_arrival(0.12, 10, 2, blocked=True)
    series = instantaneous_series(acc)
    assert all(s[1] == 0.0 for s in series)
    assert series[-1][2] == 1.0


def test_series_integral_matches_carried_volume():
    acc = MetricsAccumulator(window=0.05)
    changes = [(0.0, 40), (0.013, 25), (0.07, -10), (0.1, 7.5), (0.31, -40), (0.4, -22.5)]
    for t, d in changes:
        acc.record_rate_change(t, d)
    series = instantaneous_series(acc, 0.5)
    total = sum(s[1] * acc.window for s in series)
    assert total == pytest.approx(carried_volume(acc, 0.5), rel=1e-9)


def test_window_must_be_positive():
    with pytest.raises(ValueError):
        MetricsAccumulator(window=0)
