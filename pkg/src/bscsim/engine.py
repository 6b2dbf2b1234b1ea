"""Session simulation: sequential block downloads against a capacity trace.

The player buffer counts seconds of *contiguous* playable content. Lower
layers that arrive ahead of a gap are banked and join the buffer once the
gap closes, which is what produces the jump at the end of the bootstrap
phase. Enhancement layers never add playout time; they only decide whether
a segment is rendered at its enhanced rate.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import TYPE_CHECKING, List, NamedTuple, Optional, Tuple

from .adapt import AdaptationContext, AdaptationDecision, Policy, ThroughputEstimator
from .core import Manifest, plan_block, plan_bootstrap
from .errors import MisuseError, NeverCompletesError, SessionAbortError
from .network import CapacityTrace, download_time, measured_throughput

if TYPE_CHECKING:  # metrics imports this module
    from .metrics import SessionMetrics

STARTUP = "startup"
PLAYING = "playing"
STALLED = "stalled"
FINISHED = "finished"


class StallEvent(NamedTuple):
    start: float
    duration: float
    block: Optional[int] = None  # block in flight when the buffer ran dry


@dataclass(frozen=True)
class PlayerState:
    """Playback clock and buffer.

    ``delivered`` is the contiguous playable content (s) received so far;
    the buffer is ``delivered - playhead``. ``anchors`` records every
    (wall clock, playhead) pair at which playback started or resumed.
    """

    content_total: float
    wall_clock: float = 0.0
    playhead: float = 0.0
    delivered: float = 0.0
    phase: str = STARTUP
    startup_delay: Optional[float] = None
    stall_events: Tuple[StallEvent, ...] = ()
    anchors: Tuple[Tuple[float, float], ...] = ()
    finish_time: Optional[float] = None

    @property
    def buffer(self) -> float:
        return self.delivered - self.playhead

    @property
    def total_stall_time(self) -> float:
        return sum(e.duration for e in self.stall_events)


def advance_to(state: PlayerState, time: float, in_flight: Optional[int] = None) -> PlayerState:
    """Move the wall clock to ``time``, draining the buffer while playing."""
    if time < state.wall_clock:
        raise MisuseError(f"time regression: {time} < {state.wall_clock}")
    elapsed = time - state.wall_clock
    if state.phase == PLAYING:
        if state.buffer >= elapsed:
            return dataclasses.replace(state, wall_clock=time, playhead=state.playhead + elapsed)
        dry_at = state.wall_clock + state.buffer
        if state.delivered >= state.content_total:
            return dataclasses.replace(
                state, wall_clock=time, playhead=state.delivered, phase=FINISHED, finish_time=dry_at
            )
        stall = StallEvent(dry_at, time - dry_at, in_flight)
        return dataclasses.replace(
            state,
            wall_clock=time,
            playhead=state.delivered,
            phase=STALLED,
            stall_events=state.stall_events + (stall,),
        )
    if state.phase == STALLED:
        last = state.stall_events[-1]
        events = state.stall_events[:-1] + (last._replace(duration=time - last.start),)
        return dataclasses.replace(state, wall_clock=time, stall_events=events)
    return dataclasses.replace(state, wall_clock=time)


def deliver(state: PlayerState, seconds: float, resume_threshold: float) -> PlayerState:
    """Add playable content at the current wall clock; start or resume playback."""
    if seconds <= 0:
        return state
    state = dataclasses.replace(state, delivered=state.delivered + seconds)
    now = state.wall_clock
    if state.phase == STARTUP:
        return dataclasses.replace(
            state, phase=PLAYING, startup_delay=now, anchors=state.anchors + ((now, state.playhead),)
        )
    complete = state.delivered >= state.content_total
    if state.phase == STALLED and (state.buffer >= resume_threshold or complete):
        return dataclasses.replace(state, phase=PLAYING, anchors=state.anchors + ((now, state.playhead),))
    return state


@dataclass(frozen=True)
class BlockRecord:
    """One downloaded block and the context its decision was made in."""

    index: int
    kind: str  # "bootstrap", "steady" or "segment" (single-layer baselines)
    decision: AdaptationDecision
    prev_low: Optional[int]
    size_low: int
    size_enh: int
    start: float
    end: float
    buffer: float
    estimate: Optional[float]
    throughput: Optional[float]
    content_added: float  # playable + banked seconds this block brought in
    playable_before: float
    playable_after: float

    @property
    def size(self) -> int:
        return self.size_low + self.size_enh


@dataclass(frozen=True)
class SegmentEntry:
    index: int
    lower_rate: int
    enhanced_rate: int
    lower_arrival: float
    enhancement_arrival: Optional[float]
    playout_deadline: float
    decision_time: float
    buffer_at_decision: float

    @property
    def requested_rate(self) -> int:
        return self.enhanced_rate

    @property
    def rendered_rate(self) -> int:
        if self.enhanced_rate == self.lower_rate:
            return self.lower_rate
        if self.enhancement_arrival is not None and self.enhancement_arrival <= self.playout_deadline:
            return self.enhanced_rate
        return self.lower_rate


@dataclass(frozen=True)
class SegmentLedger:
    entries: Tuple[SegmentEntry, ...]

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    def rates(self, basis: str = "requested") -> List[int]:
        if basis == "requested":
            return [e.requested_rate for e in self.entries]
        if basis == "rendered":
            return [e.rendered_rate for e in self.entries]
        raise ValueError(f"unknown basis {basis!r}")


@dataclass(frozen=True)
class SimulationResult:
    manifest: Manifest
    policy: str
    layered: bool
    blocks: Tuple[BlockRecord, ...]
    ledger: SegmentLedger
    player: PlayerState
    metrics: "SessionMetrics"

    @property
    def decisions(self) -> List[AdaptationDecision]:
        return [b.decision for b in self.blocks]

    @property
    def throughputs(self) -> List[Optional[float]]:
        return [b.throughput for b in self.blocks]

    @property
    def total_bits(self) -> int:
        return sum(b.size for b in self.blocks)

    @property
    def download_end(self) -> float:
        return self.blocks[-1].end if self.blocks else 0.0


def _deadline(anchors, content_pos: float) -> float:
    wall, head = anchors[0]
    for a_wall, a_head in anchors:
        if a_head <= content_pos:
            wall, head = a_wall, a_head
        else:
            break
    return wall + (content_pos - head)


def run_session(
    manifest: Manifest,
    trace: CapacityTrace,
    policy: Policy,
    estimator: Optional[ThroughputEstimator] = None,
    resume_threshold: Optional[float] = None,
) -> SimulationResult:
    """Simulate one streaming session from the first request to the last frame.

    Parameters
    ----------
    resume_threshold : float, optional
        Buffered seconds needed to leave a stall; defaults to one segment.
    """
    from .metrics import session_metrics

    policy.reset()
    n = manifest.segment_count
    L = manifest.segment_duration
    phi = manifest.offset
    if resume_threshold is None:
        resume_threshold = L
    est = estimator if estimator is not None else ThroughputEstimator()

    state = PlayerState(content_total=n * L)
    history: List[AdaptationDecision] = []
    blocks: List[BlockRecord] = []
    low_rate = [0] * (n + 1)
    enh_rate = [0] * (n + 1)
    low_arrival: List[Optional[float]] = [None] * (n + 1)
    enh_arrival: List[Optional[float]] = [None] * (n + 1)
    decided_at = [0.0] * (n + 1)
    buffer_at = [0.0] * (n + 1)
    next_gap = 1  # first segment not yet contiguous-playable
    t = 0.0

    for k in range(1, n + 1):
        buf = state.buffer
        estimate = est.estimate if policy.uses_estimator else None
        ctx = AdaptationContext(k, buf, estimate, tuple(history), manifest)
        d = policy.decide(ctx)

        arrivals = []  # (segment, lower-or-whole rate, enhanced rate or None)
        if not policy.layered:
            kind, prev_low = "segment", None
            size_low, size_enh = manifest.bits(d.rate_low), 0
            arrivals.append((k, d.rate_low, d.rate_low))
        elif k < phi:
            kind, prev_low = "bootstrap", None
            plan = plan_bootstrap(manifest, k, d.rate_enh)
            if d.rate_low != plan.rate_low_ahead:
                raise MisuseError(f"bootstrap block {k} must send its lower layer at R_min")
            size_low, size_enh = plan.size_low, plan.size_full
            arrivals.append((k, d.rate_enh, d.rate_enh))
            if plan.low_segment is not None:
                arrivals.append((plan.low_segment, plan.rate_low_ahead, None))
        else:
            kind = "steady"
            prev_low = ctx.segment_low
            plan = plan_block(manifest, k, prev_low, d.rate_low, d.rate_enh)
            size_low, size_enh = plan.size_low, plan.size_enh
            if plan.low_segment is not None:
                arrivals.append((plan.low_segment, d.rate_low, None))
        size = size_low + size_enh

        try:
            dt = download_time(trace, t, size)
        except NeverCompletesError as exc:
            raise SessionAbortError(f"session aborted at block {k}: {exc}", block=k, time=t) from exc
        end = t + dt
        state = advance_to(state, end, in_flight=k)

        content = 0.0
        for seg, r, full in arrivals:
            low_rate[seg] = r
            low_arrival[seg] = end
            content += L
            if full is not None:
                enh_rate[seg] = full
                enh_arrival[seg] = end
                decided_at[seg] = t
                buffer_at[seg] = buf
        if kind == "steady":
            enh_rate[k] = d.rate_enh
            enh_arrival[k] = end if size_enh > 0 else None
            decided_at[k] = t
            buffer_at[k] = buf

        playable_before = state.delivered
        gained = 0
        while next_gap <= n and low_arrival[next_gap] is not None:
            next_gap += 1
            gained += 1
        state = deliver(state, gained * L, resume_threshold)

        sample = None
        if size > 0 and dt > 0:
            sample = measured_throughput(t, end, size)
            est = est.update(sample)

        blocks.append(
            BlockRecord(
                k, kind, d, prev_low, size_low, size_enh, t, end, buf, estimate, sample,
                content, playable_before, state.delivered,
            )
        )
        history.append(d)
        t = end

    if state.phase == PLAYING:
        state = advance_to(state, t + state.buffer)
        state = dataclasses.replace(state, phase=FINISHED, finish_time=state.wall_clock)

    entries = []
    for seg in range(1, n + 1):
        entries.append(
            SegmentEntry(
                seg,
                low_rate[seg],
                enh_rate[seg],
                low_arrival[seg],
                enh_arrival[seg],
                _deadline(state.anchors, (seg - 1) * L),
                decided_at[seg],
                buffer_at[seg],
            )
        )
    ledger = SegmentLedger(tuple(entries))
    result = SimulationResult(manifest, policy.name, policy.layered, tuple(blocks), ledger, state, None)
    return dataclasses.replace(result, metrics=session_metrics(result))
