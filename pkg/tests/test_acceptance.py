"""Release acceptance suite: one test per criterion, each with its runtime bound.

Every test records a PASS/FAIL line that is printed in the pytest
terminal summary (and to stdout when run with ``-s``).
"""

import contextlib
import csv
import dataclasses
import json
import time

import jsonschema
import numpy as np

from bscsim.adapt import AdaptationContext, PolicyParams, ThroughputEstimator, make_policy, tb_svc
from bscsim.cli import SUMMARY_SCHEMA, TIMELINE_COLUMNS, main
from bscsim.core import DEFAULT_LADDER_KBPS, BitrateLadder, Manifest, plan_block
from bscsim.engine import run_session
from bscsim.metrics import aggregate
from bscsim.network import CapacityTrace, SyntheticTraceConfig, download_time, generate_synthetic, load_trace
from bscsim.scenario import PRESETS, build_trace, load_config

from conftest import ACCEPTANCE
from invariants import check_invariants
from oracles import ALL_ORACLES, BRANCHES

LADDER = BitrateLadder.from_kbps(DEFAULT_LADDER_KBPS)


@contextlib.contextmanager
def criterion(number, bound):
    """Time the block, enforce the runtime bound and log the outcome."""
    info = {}
    t0 = time.perf_counter()
    try:
        yield info
        elapsed = time.perf_counter() - t0
        assert elapsed < bound, f"runtime {elapsed:.2f} s exceeds {bound} s"
    except BaseException as exc:
        elapsed = time.perf_counter() - t0
        line = (number, False, f"{info.get('detail', '')} [{elapsed:.2f} s] {type(exc).__name__}: {exc}".strip())
        ACCEPTANCE.append(line)
        print(f"criterion {number}: FAIL {line[2]}")
        raise
    line = (number, True, f"{info.get('detail', '')} [{elapsed:.2f} s < {bound} s]")
    ACCEPTANCE.append(line)
    print(f"criterion {number}: PASS {line[2]}")


def test_c01_branch_oracles():
    with criterion(1, 1.0) as info:
        seen = {}
        for o in ALL_ORACLES:
            got, label = o.run()
            assert label == o.branch, (o, label)
            assert got == o.expected, (o, got)
            seen.setdefault(o.rule, set()).add(label)
        assert seen == BRANCHES
        n = sum(len(v) for v in BRANCHES.values())
        info["detail"] = f"{len(ALL_ORACLES)} oracles, {n}/{n} branches of the three rules"


def test_c02_size_identity():
    with criterion(2, 1.0) as info:
        rng = np.random.default_rng(2)
        rates = LADDER.rates
        manifests = {}
        for _ in range(10_000):
            L = float(rng.choice([0.5, 1.0, 2.0, 3.0, 4.0, 10.0]))
            phi = int(rng.integers(2, 12))
            m = manifests.setdefault((L, phi), Manifest(200, L, phi, LADDER))
            a, b = sorted(int(x) for x in rng.choice(rates, 2))
            prev_low, enh = a, b
            low = int(rng.choice(rates))
            k = int(rng.integers(phi, 200 - phi + 2))
            p = plan_block(m, k, prev_low, low, enh)
            assert p.size_low + p.size_enh == (enh - prev_low + low) * L
            assert p.size == p.block_rate * L
        info["detail"] = "10000 random plans"


def brute_force_download(times_ms, bws, start_ms, size):
    """Left-Riemann accumulation on a 1 ms grid; breakpoints sit on the grid."""
    last = bws[-1]
    horizon = max(times_ms[-1], start_ms) + int(np.ceil(size / last * 1000)) + 2
    grid = np.arange(start_ms, horizon)
    idx = np.searchsorted(np.asarray(times_ms), grid, side="right") - 1
    bits = np.asarray(bws, dtype=float)[idx] * 1e-3
    cum = np.cumsum(bits)
    i = int(np.searchsorted(cum, size - 1e-6))
    return (i + 1) * 1e-3


def test_c03_download_time_oracle():
    with criterion(3, 10.0) as info:
        rng = np.random.default_rng(3)
        worst = 0.0
        for _ in range(1000):
            pieces = int(rng.integers(1, 6))
            gaps = rng.integers(100, 8000, size=pieces - 1)
            times_ms = [0] + list(np.cumsum(gaps).astype(int))
            bws = [int(x) for x in rng.integers(0, 5_000_000, size=pieces)]
            if rng.random() < 0.3 and pieces > 1:
                bws[int(rng.integers(0, pieces - 1))] = 0
            bws[-1] = max(bws[-1], 100_000)
            trace = CapacityTrace(tuple(t / 1000 for t in times_ms), tuple(bws))
            start_ms = int(rng.integers(0, times_ms[-1] + 3000))
            size = int(rng.integers(0, 20_000_000))
            got = download_time(trace, start_ms / 1000, size)
            ref = brute_force_download(times_ms, bws, start_ms, size) if size > 0 else 0.0
            worst = max(worst, abs(got - ref))
            assert abs(got - ref) <= 2e-3, (times_ms, bws, start_ms, size, got, ref)
        info["detail"] = f"1000 traces, worst gap {worst * 1e3:.3f} ms"


def random_trace(seed):
    rng = np.random.default_rng(seed)
    n_levels = int(rng.integers(1, 5))
    cfg = SyntheticTraceConfig(
        state_levels=tuple(float(x) for x in rng.uniform(0.03, 1.0, n_levels)),
        mean_state_holding_time=float(rng.uniform(5, 60)),
        oscillation_amplitude=float(rng.uniform(0, 0.45)),
        oscillation_period=float(rng.uniform(1, 6)),
        rng_seed=seed,
        duration=600.0,
        sample_interval=0.5,
    )
    return generate_synthetic(cfg)


def test_c04_svc_degeneracy():
    # Pinning the enhancement to the lower layer turns TB-BSC into the single
    # layer rule. Real sessions of the two policies download different block
    # sizes and so see different throughput; the comparison therefore feeds
    # both rules the same decision inputs, taken from each engine run.
    with criterion(4, 10.0) as info:
        pinned = PolicyParams(pin_enhancement=True)
        compared = 0
        arms = set()
        for seed in range(100):
            tr = random_trace(seed)
            phi = 2 + seed % 9
            m = Manifest(60, 2.0, phi, LADDER)
            mode = "instant" if seed % 2 else "smoothed"
            svc = run_session(m, tr, make_policy("tb-svc", LADDER), ThroughputEstimator(mode))
            hist = tuple(b.decision for b in svc.blocks)
            bsc = make_policy("tb-bsc", LADDER, pinned)
            replay = []
            for b in svc.blocks[phi - 1:]:
                ctx = AdaptationContext(b.index, b.buffer, b.estimate, hist[: b.index - 1], m)
                d = bsc.decide(ctx)
                arms.add(ctx.buffer <= m.offset_seconds)
                replay.append(d.rate_low)
            assert replay == [d.rate_low for d in hist[phi - 1:]], seed
            compared += len(replay)

            # closed loop: inside its own session the pinned policy still picks
            # every lower layer exactly as the single-layer rule would
            run = run_session(m, tr, make_policy("tb-bsc", LADDER, pinned), ThroughputEstimator(mode))
            decs = tuple(b.decision for b in run.blocks)
            for b in run.blocks[phi - 1:]:
                ctx = AdaptationContext(b.index, b.buffer, b.estimate, decs[: b.index - 1], m)
                assert b.decision.rate_low == tb_svc(ctx).rate_low
                assert b.decision.rate_enh == max(b.decision.rate_low, ctx.segment_low)
        assert arms == {True, False}
        info["detail"] = f"100 traces, {compared} steady-state decisions identical"


def test_c05_scenario1_ordering():
    with criterion(5, 30.0) as info:
        cfg = load_config("scenario1")
        m = cfg.manifest
        wins = 0
        bsc_runs, svc_runs = [], []
        for seed in range(100):
            tr = build_trace(cfg, seed)
            est = cfg.estimator()
            bsc = run_session(m, tr, make_policy("tb-bsc", m.ladder), est).metrics
            svc = run_session(m, tr, make_policy("tb-svc", m.ladder), est).metrics
            wins += bsc.average_quality > svc.average_quality
            bsc_runs.append(bsc)
            svc_runs.append(svc)
        stalls = sum(r.interruption_count for r in bsc_runs + svc_runs)
        qb = aggregate(bsc_runs).mean.average_quality / 1e3
        qs = aggregate(svc_runs).mean.average_quality / 1e3
        info["detail"] = f"TB-BSC > TB-SVC on {wins}/100 seeds ({qb:.0f} vs {qs:.0f} Kbps), {stalls} stalls"
        assert wins >= 95
        assert stalls == 0


def hsdpa_means(policy, offset=None, seeds=range(100)):
    cfg = load_config("hsdpa")
    m = cfg.manifest if offset is None else dataclasses.replace(cfg.manifest, offset=offset)
    runs = []
    for seed in seeds:
        pol = make_policy(policy, m.ladder, cfg.params)
        runs.append(run_session(m, build_trace(cfg, seed), pol, cfg.estimator()).metrics)
    return aggregate(runs).mean


def test_c06_buffer_based_smoothness():
    with criterion(6, 60.0) as info:
        means = {p: hsdpa_means(p) for p in ("bb-bsc", "bba-0", "bba-1", "tb-bsc")}
        sw = {p: round(v.switch_count, 2) for p, v in means.items()}
        q = {p: round(v.average_quality / 1e3, 1) for p, v in means.items()}
        info["detail"] = f"switches {sw}; quality BB-BSC {q['bb-bsc']} vs BBA-1 {q['bba-1']} Kbps"
        assert sw["bb-bsc"] < sw["bba-0"] < sw["bba-1"] < sw["tb-bsc"]
        assert means["bb-bsc"].average_quality >= means["bba-1"].average_quality


def test_c07_offset_monotonicity():
    with criterion(7, 60.0) as info:
        means = [hsdpa_means("bb-bsc", phi) for phi in (2, 4, 10)]
        sw = [round(v.switch_count, 2) for v in means]
        q = [round(v.average_quality / 1e3, 1) for v in means]
        info["detail"] = f"phi 2/4/10: switches {sw}, quality {q} Kbps"
        assert means[0].switch_count > means[1].switch_count > means[2].switch_count
        assert means[0].average_quality <= means[1].average_quality <= means[2].average_quality


POLICIES = ("tb-bsc", "bb-bsc", "tb-svc", "bba-0", "bba-1")


def test_c08_engine_invariants():
    with criterion(8, 60.0) as info:
        rng = np.random.default_rng(8)
        stalls = 0
        for i in range(1000):
            seed = int(rng.integers(0, 2**63))
            cfg = SyntheticTraceConfig(
                state_levels=tuple(float(x) for x in rng.uniform(0.02, 1.0, int(rng.integers(1, 5)))),
                mean_state_holding_time=float(rng.uniform(3, 60)),
                oscillation_amplitude=float(rng.uniform(0, 0.45)),
                rng_seed=seed,
                duration=400.0,
            )
            tr = generate_synthetic(cfg)
            phi = int(rng.integers(2, 11))
            n = int(rng.integers(1, 60))
            m = Manifest(n, 2.0, phi, LADDER)
            name = POLICIES[i % len(POLICIES)]
            est = ThroughputEstimator("instant" if rng.random() < 0.5 else "smoothed")
            a = run_session(m, tr, make_policy(name, LADDER), est)
            b = run_session(m, generate_synthetic(cfg), make_policy(name, LADDER), est)
            assert a == b
            check_invariants(a, tr)
            stalls += len(a.player.stall_events)
        info["detail"] = f"1000 sessions, {stalls} stalls checked"


def test_c09_bootstrap_growth():
    with criterion(9, 1.0) as info:
        L = 2.0
        sessions = 0
        for seed in range(10):
            tr = random_trace(1000 + seed)
            for name in ("tb-bsc", "bb-bsc"):
                m = Manifest(40, L, 4, LADDER)
                res = run_session(m, tr, make_policy(name, LADDER))
                for b in res.blocks[:3]:
                    assert b.content_added == 2 * L
                b3 = res.blocks[2]
                assert b3.playable_after - b3.playable_before >= 4 * L
                sessions += 1
        info["detail"] = f"{sessions} sessions: +2L per bootstrap block, +{4 * L:.0f} s at block 3"


def test_c10_cli_round_trips(tmp_path):
    with criterion(10, 10.0) as info:
        gen = tmp_path / "gen.toml"
        gen.write_text("state_levels = [0.2, 0.6]\noscillation_amplitude = 0.3\nrng_seed = 7\nduration = 120.0\n")
        out = tmp_path / "t.csv"
        assert main(["gen-trace", str(gen), str(out)]) == 0
        expected = generate_synthetic(
            SyntheticTraceConfig(state_levels=(0.2, 0.6), oscillation_amplitude=0.3, rng_seed=7, duration=120.0)
        )
        assert load_trace(out) == expected
        for name in PRESETS:
            d = tmp_path / name
            assert main(["run", name, "--out", str(d)]) == 0
            summary = json.loads((d / "summary.json").read_text())
            jsonschema.validate(summary, SUMMARY_SCHEMA)
            with open(d / "timeline.csv") as f:
                reader = csv.reader(f)
                assert tuple(next(reader)) == TIMELINE_COLUMNS
                rows = sum(1 for _ in reader)
            cfg = load_config(name)
            assert rows == cfg.manifest.segment_count * len(cfg.seeds)
        info["detail"] = f"gen-trace identity; {len(PRESETS)} presets schema-valid"
