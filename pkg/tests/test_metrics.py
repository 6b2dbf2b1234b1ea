import pytest
from hypothesis import given
from hypothesis import strategies as st

from bscsim.adapt import make_policy
from bscsim.engine import run_session
from bscsim.errors import MisuseError
from bscsim.metrics import FIELDS, SessionMetrics, aggregate, rate_statistics, session_metrics
from bscsim.network import SyntheticTraceConfig, generate_synthetic

from conftest import K, make_manifest


def test_constant_sequence():
    assert rate_statistics([1000 * K] * 10) == (1000 * K, 0.0, 0)


def test_three_values():
    mean, var, switches = rate_statistics([140, 140, 250])
    assert switches == 1
    assert mean == pytest.approx(176.6667, abs=1e-4)
    assert var == pytest.approx(2688.889, abs=1e-3)


def test_empty_sequence():
    assert rate_statistics([]) == (0.0, 0.0, 0)


@given(st.lists(st.integers(1, 3000), min_size=1, max_size=50), st.integers(2, 1000))
def test_switches_scale_invariant(rates, c):
    assert rate_statistics(rates)[2] == rate_statistics([r * c for r in rates])[2]


def test_kbps_view():
    m = SessionMetrics(1_500_000.0, 4e10, 3, 1, 0.5, 2.0)
    d = m.to_dict()
    assert d["average_quality_kbps"] == 1500.0
    assert d["quality_variance_kbps2"] == 40000.0
    assert set(FIELDS) <= set(d)


def test_aggregate():
    a = SessionMetrics(1000.0, 0.0, 2, 0, 0.5, 0.0)
    b = SessionMetrics(2000.0, 10.0, 4, 1, 1.5, 3.0)
    assert aggregate([a]).mean == a
    rep = aggregate([a, b], seeds=(1, 2), label="x")
    assert rep.mean.interruption_count == 0.5
    assert rep.mean.average_quality == 1500.0
    assert rep.count == 2 and rep.to_dict()["seeds"] == [1, 2]
    with pytest.raises(MisuseError):
        aggregate([])


@given(st.lists(st.tuples(st.floats(0, 3e6), st.integers(0, 100)), min_size=1, max_size=20))
def test_aggregate_within_range(rows):
    runs = [SessionMetrics(q, 0.0, s, 0, 0.0, 0.0) for q, s in rows]
    mean = aggregate(runs).mean
    qs = [q for q, _ in rows]
    assert min(qs) - 1e-6 <= mean.average_quality <= max(qs) + 1e-6


def test_session_metrics_bases():
    m = make_manifest(n=80, phi=4)
    tr = generate_synthetic(SyntheticTraceConfig(state_levels=(0.1, 0.5), oscillation_amplitude=0.3, rng_seed=9))
    res = run_session(m, tr, make_policy("tb-bsc", m.ladder))
    req = session_metrics(res, "requested")
    ren = session_metrics(res, "rendered")
    assert req == res.metrics
    assert ren.average_quality <= req.average_quality
    assert req.startup_delay == res.blocks[0].end
    assert req.interruption_count == len(res.player.stall_events)
    with pytest.raises(ValueError):
        session_metrics(res, "perceived")


def test_bb_bsc_smoother_than_tb_bsc():
    from bscsim.scenario import build_trace, load_config

    cfg = load_config("hsdpa")
    tb = bb = 0
    for seed in range(10):
        tr = build_trace(cfg, seed)
        m = cfg.manifest
        bb += run_session(m, tr, make_policy("bb-bsc", m.ladder)).metrics.switch_count
        tb += run_session(m, tr, make_policy("tb-bsc", m.ladder)).metrics.switch_count
    assert 5 * bb < tb
