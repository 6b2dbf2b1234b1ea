"""Bitrate ladder, manifest and block size accounting.

Bitrates are integer bits per second and sizes are integer bits. Block
indices are 1-based: block ``k`` carries the enhancement layers of segment
``k`` and the lower layer of segment ``k + offset - 1``.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

from .errors import ConfigError, InconsistentPlanError, InvalidRateError, MisuseError

#: Ladder used throughout the experiments, in Kbps.
DEFAULT_LADDER_KBPS = (140, 250, 420, 760, 1000, 1500, 2100, 2900)


@dataclass(frozen=True)
class BitrateLadder:
    """Strictly increasing set of representation bitrates (bits/s)."""

    rates: Tuple[int, ...]

    def __post_init__(self):
        rates = tuple(self.rates)
        if len(rates) < 2:
            raise ConfigError("ladder needs at least two rates")
        for r in rates:
            if isinstance(r, bool) or not isinstance(r, int):
                raise ConfigError(f"ladder rates must be integers in bits/s, got {r!r}")
            if r <= 0:
                raise ConfigError(f"ladder rates must be positive, got {r}")
        for a, b in zip(rates, rates[1:]):
            if b <= a:
                raise ConfigError(f"ladder must be strictly increasing ({a} then {b})")
        object.__setattr__(self, "rates", rates)

    @classmethod
    def from_kbps(cls, kbps: Sequence[int]) -> "BitrateLadder":
        return cls(tuple(int(k) * 1000 for k in kbps))

    @property
    def r_min(self) -> int:
        return self.rates[0]

    @property
    def r_max(self) -> int:
        return self.rates[-1]

    def __len__(self):
        return len(self.rates)

    def __iter__(self):
        return iter(self.rates)

    def __contains__(self, rate):
        i = bisect.bisect_left(self.rates, rate)
        return i < len(self.rates) and self.rates[i] == rate

    def index(self, rate: int) -> int:
        i = bisect.bisect_left(self.rates, rate)
        if i == len(self.rates) or self.rates[i] != rate:
            raise InvalidRateError(f"{rate} bps is not a ladder rate")
        return i

    def floor(self, throughput: float) -> Optional[int]:
        """Highest rate not above ``throughput``; None below the ladder."""
        i = bisect.bisect_right(self.rates, throughput)
        return self.rates[i - 1] if i else None

    def ceil(self, throughput: float) -> Optional[int]:
        """Lowest rate not below ``throughput``; None above the ladder."""
        i = bisect.bisect_left(self.rates, throughput)
        return self.rates[i] if i < len(self.rates) else None

    def below(self, value: float) -> Optional[int]:
        """Highest rate strictly below ``value``."""
        i = bisect.bisect_left(self.rates, value)
        return self.rates[i - 1] if i else None

    def above(self, value: float) -> Optional[int]:
        """Lowest rate strictly above ``value``."""
        i = bisect.bisect_right(self.rates, value)
        return self.rates[i] if i < len(self.rates) else None

    def step_up(self, rate: int) -> int:
        """Next rung up; the top rung saturates."""
        i = self.index(rate)
        return self.rates[min(i + 1, len(self.rates) - 1)]

    def step_down(self, rate: int) -> int:
        """Next rung down; the bottom rung saturates."""
        i = self.index(rate)
        return self.rates[max(i - 1, 0)]


@dataclass(frozen=True)
class Manifest:
    """Session description: the config-level equivalent of an MPD.

    Parameters
    ----------
    segment_count : int
        Number of segments ``N`` in the video.
    segment_duration : float
        Seconds of content per segment ``L``.
    offset : int
        Shift, in blocks, between a segment's lower layer and its
        enhancement layers. Must be at least 2.
    ladder : BitrateLadder
    fps : float
        Display rate; informational only.
    """

    segment_count: int
    segment_duration: float
    offset: int
    ladder: BitrateLadder
    fps: float = 25.0

    def __post_init__(self):
        if isinstance(self.offset, bool) or not isinstance(self.offset, int) or self.offset < 2:
            raise ConfigError(f"offset must be an integer >= 2, got {self.offset!r}")
        if isinstance(self.segment_count, bool) or not isinstance(self.segment_count, int):
            raise ConfigError("segment_count must be an integer")
        if self.segment_count < 1:
            raise ConfigError("segment_count must be >= 1")
        if not self.segment_duration > 0:
            raise ConfigError("segment_duration must be positive")
        if not self.fps > 0:
            raise ConfigError("fps must be positive")
        if not isinstance(self.ladder, BitrateLadder):
            raise ConfigError("ladder must be a BitrateLadder")

    @property
    def offset_seconds(self) -> float:
        return self.offset * self.segment_duration

    @property
    def duration(self) -> float:
        return self.segment_count * self.segment_duration

    @property
    def frames_per_segment(self) -> float:
        return self.fps * self.segment_duration

    def bits(self, rate: int) -> int:
        return round(rate * self.segment_duration)

    def lower_segment_of(self, k: int) -> Optional[int]:
        """Segment whose lower layer block ``k`` carries, or None past the tail."""
        seg = k + self.offset - 1
        return seg if seg <= self.segment_count else None


@dataclass(frozen=True)
class BlockPlan:
    """Sizes and rates of a steady-state block (``k >= offset``).

    ``prev_low`` is the lower-layer rate of segment ``k`` (chosen in block
    ``k - offset + 1``); ``rate_enh`` is the cumulative target of segment
    ``k``. ``low_segment`` is None for tail blocks that carry no lower layer.
    """

    index: int
    rate_low: int
    rate_enh: int
    prev_low: int
    size_low: int
    size_enh: int
    low_segment: Optional[int] = None

    @property
    def size(self) -> int:
        return self.size_low + self.size_enh

    @property
    def block_rate(self) -> int:
        return self.rate_enh - self.prev_low + self.rate_low

    @property
    def has_enhancement(self) -> bool:
        return self.rate_enh != self.prev_low


@dataclass(frozen=True)
class BootstrapBlockPlan:
    """Block ``k < offset``: whole segment ``k`` plus a minimum-rate lower layer ahead."""

    index: int
    rate_full: int
    rate_low_ahead: int
    size_full: int
    size_low: int
    low_segment: Optional[int] = None

    @property
    def size(self) -> int:
        return self.size_full + self.size_low


def block_sizes(manifest: Manifest, prev_low: int, rate_low: int, rate_enh: int) -> Tuple[int, int]:
    """Return ``(lower_bits, enhancement_bits)`` for a steady-state block."""
    ladder = manifest.ladder
    for r in (prev_low, rate_low, rate_enh):
        ladder.index(r)
    if rate_enh < prev_low:
        raise InconsistentPlanError(
            f"enhancement target {rate_enh} below lower layer {prev_low}"
        )
    return manifest.bits(rate_low), manifest.bits(rate_enh - prev_low)


def plan_block(manifest: Manifest, k: int, prev_low: int, rate_low: int, rate_enh: int) -> BlockPlan:
    size_low, size_enh = block_sizes(manifest, prev_low, rate_low, rate_enh)
    low_segment = manifest.lower_segment_of(k)
    if low_segment is None:
        size_low = 0
    return BlockPlan(k, rate_low, rate_enh, prev_low, size_low, size_enh, low_segment)


def plan_bootstrap(manifest: Manifest, k: int, rate_full: int) -> BootstrapBlockPlan:
    if not 1 <= k <= manifest.offset - 1:
        raise MisuseError(f"block {k} is not a bootstrap block")
    manifest.ladder.index(rate_full)
    r_min = manifest.ladder.r_min
    low_segment = manifest.lower_segment_of(k)
    size_low = manifest.bits(r_min) if low_segment is not None else 0
    return BootstrapBlockPlan(k, rate_full, r_min, manifest.bits(rate_full), size_low, low_segment)
