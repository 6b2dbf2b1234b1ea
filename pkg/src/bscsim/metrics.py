"""QoE statistics for one session and means over repeated runs."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import TYPE_CHECKING, Dict, Optional, Sequence

from .errors import MisuseError

if TYPE_CHECKING:
    from .engine import SimulationResult

REQUESTED = "requested"
RENDERED = "rendered"


@dataclass(frozen=True)
class SessionMetrics:
    average_quality: float  # bits/s
    quality_variance: float  # (bits/s)^2, population variance
    switch_count: float
    interruption_count: float
    startup_delay: float
    total_stall_time: float

    def to_dict(self) -> Dict[str, float]:
        d = dataclasses.asdict(self)
        # Kbps-scaled copies; the raw fields stay in bits/s
        d["average_quality_kbps"] = self.average_quality / 1e3
        d["quality_variance_kbps2"] = self.quality_variance / 1e6
        return d


FIELDS = tuple(f.name for f in dataclasses.fields(SessionMetrics))


def rate_statistics(rates: Sequence[float]):
    """Return ``(mean, population variance, switch count)`` of a rate sequence."""
    n = len(rates)
    if n == 0:
        return 0.0, 0.0, 0
    mean = sum(rates) / n
    var = sum((r - mean) ** 2 for r in rates) / n
    switches = sum(1 for a, b in zip(rates, rates[1:]) if a != b)
    return mean, var, switches


def session_metrics(result: "SimulationResult", basis: str = REQUESTED) -> SessionMetrics:
    rates = result.ledger.rates(basis)
    mean, var, switches = rate_statistics(rates)
    player = result.player
    return SessionMetrics(
        average_quality=mean,
        quality_variance=var,
        switch_count=switches,
        interruption_count=len(player.stall_events),
        startup_delay=player.startup_delay or 0.0,
        total_stall_time=player.total_stall_time,
    )


@dataclass(frozen=True)
class AggregateReport:
    mean: SessionMetrics
    count: int
    seeds: tuple = ()
    label: Optional[str] = None

    def to_dict(self):
        return {"label": self.label, "runs": self.count, "seeds": list(self.seeds), "mean": self.mean.to_dict()}


def aggregate(runs: Sequence[SessionMetrics], seeds=(), label=None) -> AggregateReport:
    if not runs:
        raise MisuseError("cannot aggregate an empty list of runs")
    m = len(runs)
    means = {f: sum(getattr(r, f) for r in runs) / m for f in FIELDS}
    return AggregateReport(SessionMetrics(**means), m, tuple(seeds), label)
