import json

import numpy as np
import pytest

from osvardl.ardl import ModelData
from osvardl.diagnostics import acf, default_max_lag
from osvardl.selection import SelectionError, autocorr_present, select_orders, selected_fit
from osvardl.simulate import simulate_ardl

TRUE = dict(alpha=0.2, beta=[0.5, 0.2], gamma=[1.0, 0.5], phi=[0.3, -0.2], rho=[0.2, 0.1], noise=1.0)


@pytest.fixture(scope="module")
def ardl2111():
    return simulate_ardl(2000, seed=7, **TRUE)


def ar1(n, phi, seed):
    rng = np.random.default_rng(seed)
    x = np.zeros(n)
    e = rng.normal(size=n)
    for t in range(1, n):
        x[t] = phi * x[t - 1] + e[t]
    return x


def test_autocorr_present_cases():
    assert not autocorr_present(np.random.default_rng(2).normal(size=500))
    assert autocorr_present(ar1(500, 0.9, 0))
    assert not autocorr_present(np.full(50, 1.5))
    with pytest.raises(ValueError):
        autocorr_present(np.arange(7.0))


def test_autocorr_present_uses_default_lag_window():
    # A spike at lag L + 1 lies outside the window and must not count.
    n = 1000
    L = default_max_lag(n)
    rng = np.random.default_rng(0)
    e = rng.normal(size=n + L + 1)
    x = e[L + 1 :] + 0.8 * e[: n]
    r = acf(x, L + 1).values
    assert abs(r[L]) > acf(x, L + 1).band
    assert autocorr_present(x) == bool(np.any(np.abs(r[:L]) > acf(x, L).band))


@pytest.mark.parametrize("rule", ["current", "lower"])
def test_selection_on_ardl2111(ardl2111, rule):
    orders, trace = select_orders(ardl2111, p_max=30, stop_rule=rule)
    assert orders.p1 >= 2
    fit = selected_fit(trace)
    res = acf(fit.residuals)
    assert res.max_lag == default_max_lag(fit.nobs)
    assert not res.exceeds_band
    path = trace.path()
    assert path[0] == trace.step1_orders and path[-1] == orders
    for a, b in zip(path, path[1:]):
        assert all(x >= y for x, y in zip(a.as_tuple(), b.as_tuple()))
        assert a.p1 == b.p1


def test_single_accepted_candidate(ardl2111):
    _, trace = select_orders(ardl2111)
    assert sum(c.accepted for c in trace.candidates) == 1
    assert trace.accepted().orders == trace.final


def test_step1_is_uniform_and_first_pass(ardl2111):
    _, trace = select_orders(ardl2111)
    step1 = [c for c in trace.candidates if c.step == 1]
    assert [c.orders.p1 for c in step1] == list(range(1, len(step1) + 1))
    assert all(c.orders.as_tuple() == (c.orders.p1,) * 4 for c in step1)
    assert all(c.autocorr_detected for c in step1[:-1]) and not step1[-1].autocorr_detected


def test_current_rule_never_drops_significant_top_lag(ardl2111):
    _, trace = select_orders(ardl2111, stop_rule="current")
    by_orders = {c.orders: c for c in trace.candidates}
    path = trace.path()
    for a, b in zip(path, path[1:]):
        lowered = [reg for reg, pa, pb in zip(("eco", "adv", "art"), a.as_tuple()[1:], b.as_tuple()[1:])
                   if pa != pb]
        assert not any(by_orders[a].top_lag_sig[r] for r in lowered)


def test_p1_fixed_after_step1():
    rng = np.random.default_rng(1)
    data = ModelData(*(rng.normal(size=600) for _ in range(4)))
    orders, trace = select_orders(data, transform="identity")
    assert orders.p1 == trace.step1_orders.p1


def test_band_rule_false_positive_rate_on_white_noise():
    # With about 27 lags tested at 5% each, white noise trips the rule in most draws.
    hits = [autocorr_present(np.random.default_rng(s).normal(size=600)) for s in range(200)]
    assert 0.5 < np.mean(hits) < 0.9


def test_deterministic(ardl2111):
    a = select_orders(ardl2111)[1].to_jsonl()
    b = select_orders(ardl2111)[1].to_jsonl()
    assert a == b


def test_trace_jsonl(ardl2111, tmp_path):
    _, trace = select_orders(ardl2111)
    path = tmp_path / "trace.jsonl"
    trace.write_jsonl(path)
    lines = [json.loads(line) for line in path.read_text().splitlines()]
    assert len(lines) == len(trace.candidates)
    assert {"orders", "step", "autocorr_detected", "decision", "accepted"} <= set(lines[0])
    assert sum(line["accepted"] for line in lines) == 1


def test_failure_reports_trace():
    y = ar1(400, 0.0, 3)
    # An MA(3) response cannot be whitened by a single AR lag.
    e = np.random.default_rng(3).normal(size=403)
    y = e[3:] + 0.9 * e[2:-1] + 0.9 * e[1:-2] + 0.9 * e[:-3]
    rng = np.random.default_rng(4)
    data = ModelData(y, *(rng.normal(size=400) for _ in range(3)))
    with pytest.raises(SelectionError) as info:
        select_orders(data, transform="identity", p_max=1)
    assert len(info.value.trace.candidates) == 1


@pytest.mark.parametrize("seed", range(10))
def test_short_series_fail_cleanly(seed):
    rng = np.random.default_rng(seed)
    data = ModelData(*(rng.normal(size=25) for _ in range(4)))
    try:
        orders, _ = select_orders(data, transform="identity", p_max=30)
    except SelectionError as exc:
        assert exc.trace.candidates
    else:
        assert orders.n_params < 25


def test_invalid_arguments(ardl2111):
    with pytest.raises(ValueError):
        select_orders(ardl2111, p_max=0)
    with pytest.raises(ValueError):
        select_orders(ardl2111, stop_rule="other")
