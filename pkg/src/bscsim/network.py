"""Capacity traces: synthetic generation, CSV ingestion and integration.

Traces are zero-order-hold: the bandwidth of sample ``i`` applies on
``[t_i, t_{i+1})`` and the last sample's bandwidth holds forever.
"""

from __future__ import annotations

import bisect
import math
import os
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .errors import ConfigError, NeverCompletesError, TraceParseError, TraceValidationError

CSV_HEADER = "time_s,bandwidth_bps"


@dataclass(frozen=True)
class CapacityTrace:
    times: Tuple[float, ...]
    bandwidths: Tuple[float, ...]

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        bws = tuple(float(b) for b in self.bandwidths)
        if not times:
            raise TraceValidationError("trace has no samples")
        if len(times) != len(bws):
            raise TraceValidationError("times and bandwidths differ in length")
        if times[0] != 0.0:
            raise TraceValidationError(f"trace must start at t=0, starts at {times[0]}")
        t = np.asarray(times)
        bad = np.flatnonzero(~(np.diff(t) > 0))
        if bad.size:
            i = int(bad[0]) + 1
            raise TraceValidationError(
                f"timestamps not strictly increasing at sample {i} ({times[i - 1]} -> {times[i]})"
            )
        b = np.asarray(bws)
        bad = np.flatnonzero(~((b >= 0) & np.isfinite(b)))
        if bad.size:
            i = int(bad[0])
            raise TraceValidationError(f"bandwidth at sample {i} is invalid: {bws[i]}")
        if b.max() <= 0:
            raise TraceValidationError("trace bandwidth is zero everywhere")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "bandwidths", bws)

    @classmethod
    def constant(cls, bandwidth: float) -> "CapacityTrace":
        return cls((0.0,), (bandwidth,))

    @classmethod
    def from_pairs(cls, pairs: Sequence[Tuple[float, float]]) -> "CapacityTrace":
        return cls(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs))

    def __len__(self):
        return len(self.times)

    def _piece(self, t: float) -> int:
        return max(bisect.bisect_right(self.times, t) - 1, 0)

    def bandwidth_at(self, t: float) -> float:
        return self.bandwidths[self._piece(t)]

    def mean_bandwidth(self, start: float, end: float) -> float:
        return integrate(self, start, end) / (end - start)


def integrate(trace: CapacityTrace, start: float, end: float) -> float:
    """Bits deliverable over ``[start, end]``."""
    if end <= start:
        return 0.0
    times, bws = trace.times, trace.bandwidths
    i = trace._piece(start)
    total = 0.0
    t = start
    while t < end:
        seg_end = times[i + 1] if i + 1 < len(times) else math.inf
        upto = min(seg_end, end)
        total += bws[i] * (upto - t)
        t = upto
        i += 1
    return total


def download_time(trace: CapacityTrace, start: float, size: float) -> float:
    """Smallest duration over which the trace delivers ``size`` bits from ``start``."""
    if size < 0 or start < 0:
        raise ValueError("size and start must be non-negative")
    if size == 0:
        return 0.0
    times, bws = trace.times, trace.bandwidths
    i = trace._piece(start)
    remaining = float(size)
    t = start
    while True:
        bw = bws[i]
        last = i + 1 == len(times)
        seg_end = math.inf if last else times[i + 1]
        if bw > 0:
            room = bw * (seg_end - t)
            if room >= remaining:
                return (t + remaining / bw) - start
            remaining -= room
        elif last:
            raise NeverCompletesError(
                f"bandwidth is zero from t={t:g} onward; {remaining:.0f} bits never arrive"
            )
        t = seg_end
        i += 1


def measured_throughput(start: float, end: float, size: float) -> float:
    if not end > start:
        raise ValueError(f"empty measurement interval [{start}, {end}]")
    return size / (end - start)


@dataclass(frozen=True)
class SyntheticTraceConfig:
    """Background-traffic model: exponential state holding plus a TCP sawtooth.

    The bandwidth in a state with level ``f`` climbs linearly from
    ``f * link * (1 - amplitude)`` to ``f * link`` once per
    ``oscillation_period`` and then drops back, so it never exceeds the
    state cap. States are held for exponentially distributed times and the
    next state is drawn uniformly from the other levels.
    """

    link_capacity: float = 5_000_000
    state_levels: Tuple[float, ...] = (0.5,)
    mean_state_holding_time: float = 30.0
    oscillation_amplitude: float = 0.0
    oscillation_period: float = 4.0
    rng_seed: int = 0
    duration: float = 600.0
    sample_interval: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "state_levels", tuple(float(x) for x in self.state_levels))
        if not self.duration > 0:
            raise ConfigError(f"duration must be positive, got {self.duration}")
        if not self.link_capacity > 0:
            raise ConfigError("link_capacity must be positive")
        if not self.state_levels:
            raise ConfigError("state_levels must not be empty")
        for lvl in self.state_levels:
            if not 0 < lvl <= 1:
                raise ConfigError(f"state level {lvl} outside (0, 1]")
        if not 0 <= self.oscillation_amplitude < 0.5:
            raise ConfigError("oscillation_amplitude must lie in [0, 0.5)")
        if not self.sample_interval > 0:
            raise ConfigError("sample_interval must be positive")
        if not self.oscillation_period > 0:
            raise ConfigError("oscillation_period must be positive")
        if not self.mean_state_holding_time > 0:
            raise ConfigError("mean_state_holding_time must be positive")


def generate_synthetic(config: SyntheticTraceConfig) -> CapacityTrace:
    rng = np.random.default_rng(config.rng_seed)
    levels = config.state_levels
    n = max(int(math.ceil(config.duration / config.sample_interval)), 1)
    t = np.arange(n) * config.sample_interval
    t_last = float(t[-1])

    state = int(rng.integers(len(levels)))
    states = [state]
    changes = []
    next_change = math.inf
    if len(levels) > 1:
        next_change = float(rng.exponential(config.mean_state_holding_time))
    phase = float(rng.uniform(0.0, config.oscillation_period))
    if len(levels) > 1:
        while next_change <= t_last:
            # uniform over the other levels
            j = int(rng.integers(len(levels) - 1))
            state = j if j < state else j + 1
            states.append(state)
            changes.append(next_change)
            next_change += float(rng.exponential(config.mean_state_holding_time))

    idx = np.searchsorted(np.asarray(changes, dtype=float), t, side="right")
    cap = np.asarray(levels)[np.asarray(states)[idx]] * config.link_capacity
    amp = config.oscillation_amplitude
    if amp > 0:
        frac = ((t + phase) % config.oscillation_period) / config.oscillation_period
        bw = cap * (1.0 - amp + amp * frac)
    else:
        bw = cap
    return CapacityTrace(tuple(t.tolist()), tuple(np.round(bw).tolist()))


def _format_number(x: float) -> str:
    if x.is_integer() and abs(x) < 2**53:
        return str(int(x))
    return repr(x)


def write_trace(trace: CapacityTrace, path) -> None:
    with open(path, "w", newline="") as f:
        f.write(f"# {CSV_HEADER}\n")
        for t, b in zip(trace.times, trace.bandwidths):
            f.write(f"{_format_number(t)},{_format_number(b)}\n")


def parse_trace(text: str) -> CapacityTrace:
    times = []
    bws = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.replace(" ", "") == CSV_HEADER and not times:
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 2:
            raise TraceParseError(f"expected 2 columns, got {len(parts)}: {raw!r}", lineno)
        try:
            t = float(parts[0])
            b = float(parts[1])
        except ValueError:
            raise TraceParseError(f"non-numeric field in {raw!r}", lineno) from None
        if not (math.isfinite(t) and math.isfinite(b)):
            raise TraceParseError(f"non-finite field in {raw!r}", lineno)
        if b < 0:
            raise TraceValidationError(f"line {lineno}: negative bandwidth {b}")
        if times and not t > times[-1]:
            raise TraceValidationError(f"line {lineno}: timestamp {t} not after {times[-1]}")
        times.append(t)
        bws.append(b)
    if not times:
        raise TraceParseError("trace file contains no samples")
    return CapacityTrace(tuple(times), tuple(bws))


def load_trace(path, fmt: str = "csv") -> CapacityTrace:
    if fmt != "csv":
        raise ConfigError(f"unsupported trace format {fmt!r}")
    with open(os.fspath(path)) as f:
        return parse_trace(f.read())
