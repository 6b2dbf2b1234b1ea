"""Throughput estimation and bitrate selection policies.

The decision functions are pure: each takes an :class:`AdaptationContext`
and returns a rate or an :class:`AdaptationDecision`. The ``*_explain``
variants also return the label of the branch that fired, which the tests
use to assert branch coverage. Policy objects wrap the functions and hold
the little state that is not recoverable from the decision history (the
pinned top-layer target of the buffer-based BSC scheme).

A decision's ``rate_low`` is the lower layer carried by block ``k``
(segment ``k + offset - 1``) and ``rate_enh`` the cumulative target of
segment ``k``. In bootstrap blocks ``rate_enh`` is the whole-segment rate
and ``rate_low`` the minimum-rate lower layer sent ahead. Single-layer
baselines set both to the segment rate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

from .core import BitrateLadder, Manifest
from .errors import ConfigError, MisuseError

INSTANT = "instant"
SMOOTHED = "smoothed"


@dataclass(frozen=True)
class ThroughputEstimator:
    mode: str = SMOOTHED
    weight: float = 0.2
    estimate: Optional[float] = None

    def __post_init__(self):
        if self.mode not in (INSTANT, SMOOTHED):
            raise ConfigError(f"unknown estimator mode {self.mode!r}")
        if not 0 < self.weight <= 1:
            raise ConfigError("smoothing weight must lie in (0, 1]")

    def update(self, sample: float) -> "ThroughputEstimator":
        if sample < 0:
            raise ValueError("throughput sample must be non-negative")
        if self.mode == INSTANT or self.estimate is None:
            value = float(sample)
        else:
            value = self.weight * sample + (1.0 - self.weight) * self.estimate
        return ThroughputEstimator(self.mode, self.weight, value)


def estimate_update(est: ThroughputEstimator, sample: float) -> ThroughputEstimator:
    return est.update(sample)


@dataclass(frozen=True)
class AdjustmentFunction:
    """Piecewise-linear map from buffer level (s) to a target bitrate.

    Flat at ``R_min`` up to the reservoir, flat at ``R_max`` from
    ``reservoir + cushion`` on, linear in between.
    """

    reservoir: float
    cushion: float
    ladder: BitrateLadder

    def __post_init__(self):
        if not self.reservoir > 0 or not self.cushion > 0:
            raise ConfigError("reservoir and cushion must be positive")

    def __call__(self, buffer: float) -> float:
        lo, hi = self.ladder.r_min, self.ladder.r_max
        if buffer <= self.reservoir:
            return float(lo)
        if buffer >= self.reservoir + self.cushion:
            return float(hi)
        return lo + (buffer - self.reservoir) / self.cushion * (hi - lo)


@dataclass(frozen=True)
class AdaptationDecision:
    rate_low: int
    rate_enh: int


@dataclass(frozen=True)
class AdaptationContext:
    """Everything a policy may look at before block ``k`` is requested."""

    k: int
    buffer: float
    estimate: Optional[float]
    history: Tuple[AdaptationDecision, ...]
    manifest: Manifest

    def __post_init__(self):
        if len(self.history) != self.k - 1:
            raise MisuseError(f"block {self.k} needs {self.k - 1} past decisions, got {len(self.history)}")
        if self.buffer < 0:
            raise MisuseError("buffer occupancy cannot be negative")

    @property
    def ladder(self) -> BitrateLadder:
        return self.manifest.ladder

    def low(self, i: int) -> int:
        """Lower-layer rate chosen in block ``i`` (1-based)."""
        if not 1 <= i <= len(self.history):
            raise MisuseError(f"no decision recorded for block {i}")
        return self.history[i - 1].rate_low

    @property
    def prev(self) -> Optional[AdaptationDecision]:
        return self.history[-1] if self.history else None

    @property
    def segment_low(self) -> int:
        """Lower-layer rate of segment ``k``, i.e. ``R_{k-offset+1,B}``."""
        return self.low(self.k - self.manifest.offset + 1)


def _need_estimate(ctx: AdaptationContext) -> float:
    if ctx.estimate is None:
        raise MisuseError(f"block {ctx.k} needs a throughput estimate")
    return ctx.estimate


def tb_bsc_bootstrap(ctx: AdaptationContext) -> AdaptationDecision:
    """Whole-segment rate for blocks ``1 .. offset-1``.

    The lower layer sent ahead is always ``R_min``; the whole segment gets
    the highest rate that fits next to it in the estimate, but never more
    than one rung above the previous segment.
    """
    phi = ctx.manifest.offset
    if not 1 <= ctx.k <= phi - 1:
        raise MisuseError(f"block {ctx.k} is not a bootstrap block for offset {phi}")
    ladder = ctx.ladder
    r_min = ladder.r_min
    if ctx.k == 1:
        return AdaptationDecision(r_min, r_min)
    fit = None
    if ctx.estimate is not None:
        fit = ladder.floor(ctx.estimate - r_min)
    full = min(fit if fit is not None else r_min, ladder.step_up(ctx.prev.rate_enh))
    return AdaptationDecision(r_min, full)


def _tb_lower(ladder: BitrateLadder, est: float, prev_low: int) -> Tuple[int, str]:
    if est <= ladder.r_min:
        return ladder.r_min, "min"
    if est < prev_low:
        return ladder.floor(est), "down"
    if prev_low < ladder.r_max:
        return min(ladder.step_up(prev_low), ladder.floor(est)), "up"
    return ladder.r_max, "max"


def tb_bsc_explain(ctx: AdaptationContext) -> Tuple[AdaptationDecision, str]:
    phi = ctx.manifest.offset
    if ctx.k < phi:
        raise MisuseError(f"block {ctx.k} is a bootstrap block; use tb_bsc_bootstrap")
    ladder = ctx.ladder
    est = _need_estimate(ctx)
    seg_low = ctx.segment_low
    prev = ctx.prev
    low, arm = _tb_lower(ladder, est, prev.rate_low)
    if ctx.buffer <= ctx.manifest.offset_seconds:
        return AdaptationDecision(low, seg_low), "buffer/" + arm
    if arm == "min":
        enh = seg_low
    elif arm == "down":
        enh = max(seg_low, ladder.ceil(est))
    elif arm == "up":
        enh = max(seg_low, ladder.step_up(prev.rate_enh))
    else:
        enh = ladder.r_max
    return AdaptationDecision(low, enh), "rich/" + arm


def tb_bsc(ctx: AdaptationContext) -> AdaptationDecision:
    return tb_bsc_explain(ctx)[0]


def tb_svc(ctx: AdaptationContext) -> AdaptationDecision:
    ladder = ctx.ladder
    if ctx.k == 1:
        return AdaptationDecision(ladder.r_min, ladder.r_min)
    rate, _ = _tb_lower(ladder, _need_estimate(ctx), ctx.prev.rate_low)
    return AdaptationDecision(rate, rate)


def buffer_select(F: AdjustmentFunction, prev: int, buffer: float) -> Tuple[int, str]:
    """The lower-layer rule: move only when F leaves the band around ``prev``."""
    ladder = F.ladder
    up = ladder.step_up(prev)
    down = ladder.step_down(prev)
    if buffer <= F.reservoir:
        return ladder.r_min, "reservoir"
    if buffer >= F.reservoir + F.cushion:
        return ladder.r_max, "cushion"
    target = F(buffer)
    if target >= up:
        r = ladder.below(target)
        return (r if r is not None else ladder.r_min), "up"
    if target <= down:
        r = ladder.above(target)
        return (r if r is not None else ladder.r_max), "down"
    return prev, "hold"


def bb_lower_explain(ctx: AdaptationContext, F1: AdjustmentFunction) -> Tuple[int, str]:
    prev = ctx.prev.rate_low if ctx.prev is not None else ctx.ladder.r_min
    return buffer_select(F1, prev, ctx.buffer)


def bb_lower(ctx: AdaptationContext, F1: AdjustmentFunction) -> int:
    return bb_lower_explain(ctx, F1)[0]


def is_top_invocation(k: int, offset: int) -> bool:
    return (k - 1) % (offset - 1) == 0


def bb_top_explain(ctx: AdaptationContext, F2: AdjustmentFunction) -> Tuple[int, str]:
    """Top-layer target for the group of ``offset-1`` blocks starting at ``k``.

    Off the group boundaries the previous block's target is returned. Until
    ``2*offset-2`` blocks exist the averaging window is undefined and no
    enhancement is requested.
    """
    phi = ctx.manifest.offset
    k = ctx.k
    if k < phi:
        raise MisuseError(f"block {k} is a bootstrap block")
    if not is_top_invocation(k, phi):
        return ctx.prev.rate_enh, "between"
    if len(ctx.history) < 2 * phi - 2:
        return ctx.segment_low, "warmup"

    ladder = ctx.ladder
    prev_enh = ctx.prev.rate_enh
    up = ladder.step_up(prev_enh)
    down = ladder.step_down(prev_enh)
    window = [ctx.low(i) for i in range(k - 2 * phi + 2, k - phi + 1)]
    avg_up = sum(r + max(0, up - r) for r in window) / (phi - 1)
    avg_down = sum(r + max(0, down - r) for r in window) / (phi - 1)

    if ctx.buffer <= F2.reservoir:
        return ctx.segment_low, "reservoir"
    if ctx.buffer >= F2.reservoir + F2.cushion:
        return ladder.r_max, "cushion"
    target = F2(ctx.buffer)
    if target >= avg_up:
        r = ladder.below(target)
        return (r if r is not None else ladder.r_min), "up"
    if target <= avg_down:
        r = ladder.above(target)
        return (r if r is not None else ladder.r_max), "down"
    return prev_enh, "hold"


def bb_top(ctx: AdaptationContext, F2: AdjustmentFunction) -> int:
    return bb_top_explain(ctx, F2)[0]


def bba1(ctx: AdaptationContext, F: AdjustmentFunction) -> AdaptationDecision:
    rate = bb_lower(ctx, F)
    return AdaptationDecision(rate, rate)


def bba0(ctx: AdaptationContext, b1: float, b2: float, b3: float) -> AdaptationDecision:
    if not b1 < b2 < b3:
        raise ConfigError(f"BBA-0 thresholds must increase, got {b1}, {b2}, {b3}")
    ladder = ctx.ladder
    prev = ctx.prev.rate_low if ctx.prev is not None else ladder.r_min
    buf = ctx.buffer
    if buf < b1:
        rate = ladder.r_min
    elif buf < b2:
        rate = ladder.step_down(prev)
    elif buf < b3:
        rate = prev
    else:
        rate = ladder.step_up(prev)
        if ctx.estimate is not None and rate > ctx.estimate:
            rate = prev
    return AdaptationDecision(rate, rate)


@dataclass(frozen=True)
class PolicyParams:
    """Tunables shared by the policy registry. Buffer values are seconds."""

    reservoir: float = 20.0
    cushion_low: float = 70.0
    cushion_top: float = 50.0
    bba0_thresholds: Tuple[float, float, float] = (20.0, 45.0, 70.0)
    pin_enhancement: bool = False


class Policy:
    """Base class. ``layered`` policies download BSC blocks; others whole segments."""

    name = "policy"
    layered = True
    uses_estimator = True

    def reset(self) -> None:
        pass

    def decide(self, ctx: AdaptationContext) -> AdaptationDecision:
        raise NotImplementedError


class TbBscPolicy(Policy):
    name = "tb-bsc"

    def __init__(self, pin_enhancement: bool = False):
        # pin_enhancement requests the lower-layer rate for both layers
        self.pin_enhancement = pin_enhancement

    def decide(self, ctx):
        if ctx.k < ctx.manifest.offset:
            return tb_bsc_bootstrap(ctx)
        d = tb_bsc(ctx)
        if self.pin_enhancement:
            d = AdaptationDecision(d.rate_low, max(d.rate_low, ctx.segment_low))
        return d


class BbBscPolicy(Policy):
    name = "bb-bsc"
    uses_estimator = False

    def __init__(self, f_low: AdjustmentFunction, f_top: AdjustmentFunction):
        self.f_low = f_low
        self.f_top = f_top
        self.reset()

    def reset(self):
        self.top_target: Optional[int] = None
        self.targets = []

    def decide(self, ctx):
        phi = ctx.manifest.offset
        r_min = ctx.ladder.r_min
        if ctx.k < phi:
            prev = ctx.prev.rate_enh if ctx.prev is not None else r_min
            full, _ = buffer_select(self.f_low, prev, ctx.buffer)
            return AdaptationDecision(r_min, full)
        low = bb_lower(ctx, self.f_low)
        if is_top_invocation(ctx.k, phi):
            target, branch = bb_top_explain(ctx, self.f_top)
            self.top_target = None if branch in ("warmup", "reservoir") else target
            self.targets.append((ctx.k, self.top_target))
        seg_low = ctx.segment_low
        enh = seg_low if self.top_target is None else max(self.top_target, seg_low)
        return AdaptationDecision(low, enh)


class TbSvcPolicy(Policy):
    name = "tb-svc"
    layered = False

    def decide(self, ctx):
        return tb_svc(ctx)


class Bba1Policy(Policy):
    name = "bba-1"
    layered = False
    uses_estimator = False

    def __init__(self, f: AdjustmentFunction):
        self.f = f

    def decide(self, ctx):
        return bba1(ctx, self.f)


class Bba0Policy(Policy):
    name = "bba-0"
    layered = False

    def __init__(self, b1: float, b2: float, b3: float):
        if not b1 < b2 < b3:
            raise ConfigError(f"BBA-0 thresholds must increase, got {b1}, {b2}, {b3}")
        self.thresholds = (b1, b2, b3)

    def decide(self, ctx):
        return bba0(ctx, *self.thresholds)


POLICY_NAMES = ("tb-bsc", "bb-bsc", "tb-svc", "bba-0", "bba-1")


def make_policy(name: str, ladder: BitrateLadder, params: Optional[PolicyParams] = None) -> Policy:
    p = params or PolicyParams()
    if name == "tb-bsc":
        return TbBscPolicy(p.pin_enhancement)
    if name == "tb-svc":
        return TbSvcPolicy()
    if name == "bb-bsc":
        return BbBscPolicy(
            AdjustmentFunction(p.reservoir, p.cushion_low, ladder),
            AdjustmentFunction(p.reservoir, p.cushion_top, ladder),
        )
    if name == "bba-1":
        return Bba1Policy(AdjustmentFunction(p.reservoir, p.cushion_low, ladder))
    if name == "bba-0":
        return Bba0Policy(*p.bba0_thresholds)
    raise ConfigError(f"unknown policy {name!r}; expected one of {', '.join(POLICY_NAMES)}")
