"""Scenario files: loading, validation and single-run execution.

A scenario is a TOML or JSON document with four tables::

    [manifest]          segments, segment_duration, offset, ladder_kbps, fps
    [network]           trace = "file.csv"  or  [network.synthetic] ...
    [policy]            name, estimator, smoothing_weight, reservoir,
                        cushion_low, cushion_top, bba0_thresholds,
                        pin_enhancement
    [run]               seeds | seed_count, basis, output_dir,
                        resume_threshold

Unknown keys are rejected. Errors carry the line of the offending key
when it can be located in the source text.
"""

from __future__ import annotations

import dataclasses
import json
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .adapt import INSTANT, POLICY_NAMES, SMOOTHED, PolicyParams, ThroughputEstimator, make_policy
from .core import DEFAULT_LADDER_KBPS, BitrateLadder, Manifest
from .engine import SimulationResult, run_session
from .errors import BscError, ConfigError
from .network import CapacityTrace, SyntheticTraceConfig, generate_synthetic, load_trace

PRESETS = ("scenario1", "scenario2", "scenario3", "hsdpa")

_SECTIONS = {
    "manifest": {"segments", "segment_duration", "offset", "ladder_kbps", "fps"},
    "network": {"trace", "synthetic"},
    "policy": {
        "name", "estimator", "smoothing_weight", "reservoir", "cushion_low",
        "cushion_top", "bba0_thresholds", "pin_enhancement",
    },
    "run": {"seeds", "seed_count", "basis", "output_dir", "resume_threshold"},
}
_TOP = {"name", "description"} | set(_SECTIONS)
SYNTHETIC_KEYS = {f.name for f in dataclasses.fields(SyntheticTraceConfig)}


class ConfigFileError(ConfigError):
    def __init__(self, message, source=None, line=None):
        self.source = source
        self.line = line
        where = source or "<config>"
        if line is not None:
            where = f"{where}:{line}"
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    manifest: Manifest
    policy: str
    params: PolicyParams
    estimator_mode: str = SMOOTHED
    smoothing_weight: float = 0.2
    synthetic: Optional[SyntheticTraceConfig] = None
    trace_path: Optional[Path] = None
    seeds: Tuple[int, ...] = (0,)
    basis: str = "requested"
    output_dir: Path = Path("out")
    resume_threshold: Optional[float] = None
    source: Optional[str] = None

    def estimator(self) -> ThroughputEstimator:
        return ThroughputEstimator(self.estimator_mode, self.smoothing_weight)

    def echo(self) -> Dict[str, Any]:
        """Normalized, JSON-ready view of the configuration."""
        m = self.manifest
        net: Dict[str, Any]
        if self.synthetic is not None:
            net = {"synthetic": {k: v for k, v in dataclasses.asdict(self.synthetic).items() if k != "rng_seed"}}
            net["synthetic"]["state_levels"] = list(self.synthetic.state_levels)
        else:
            net = {"trace": str(self.trace_path)}
        return {
            "name": self.name,
            "manifest": {
                "segments": m.segment_count,
                "segment_duration": m.segment_duration,
                "offset": m.offset,
                "ladder_kbps": [r / 1000 for r in m.ladder.rates],
                "fps": m.fps,
            },
            "network": net,
            "policy": {
                "name": self.policy,
                "estimator": self.estimator_mode,
                "smoothing_weight": self.smoothing_weight,
                "reservoir": self.params.reservoir,
                "cushion_low": self.params.cushion_low,
                "cushion_top": self.params.cushion_top,
                "bba0_thresholds": list(self.params.bba0_thresholds),
                "pin_enhancement": self.params.pin_enhancement,
            },
            "run": {
                "seeds": list(self.seeds),
                "basis": self.basis,
                "output_dir": str(self.output_dir),
                "resume_threshold": self.resume_threshold,
            },
        }


def locate_key(text: Optional[str], key: str, section: Optional[str] = None) -> Optional[int]:
    """1-based line of ``key`` (or a ``[key]`` header), preferring ``section``."""
    if not text:
        return None
    pat = re.compile(rf'^\s*(?:\[\s*{re.escape(key)}\s*\]|"?{re.escape(key)}"?\s*[=:])')
    header = re.compile(r"^\s*\[\s*([^\]]+?)\s*\]")
    first = None
    current = ""
    for i, line in enumerate(text.splitlines(), start=1):
        h = header.match(line)
        if h:
            current = h.group(1)
        if pat.search(line):
            if section is None or current == section:
                return i
            if first is None:
                first = i
    return first


class _Checker:
    def __init__(self, text, source):
        self.text = text
        self.source = source
        self.section = None

    def fail(self, message, key=None):
        line = locate_key(self.text, key, self.section) if key else None
        raise ConfigFileError(message, self.source, line)

    def keys(self, table, allowed, where):
        if not isinstance(table, dict):
            self.fail(f"[{where}] must be a table", where.split(".")[-1])
        for k in table:
            if k not in allowed:
                self.fail(f"unknown key {k!r} in [{where}]", k)

    def number(self, table, key, default, where, integer=False):
        v = table.get(key, default)
        ok = isinstance(v, int) if integer else isinstance(v, (int, float))
        if isinstance(v, bool) or not ok:
            kind = "an integer" if integer else "a number"
            self.fail(f"{where}.{key} must be {kind}, got {v!r}", key)
        return v


def parse_config(data: Dict[str, Any], text: Optional[str] = None, source: Optional[str] = None,
                 base_dir: Optional[Path] = None) -> ScenarioConfig:
    c = _Checker(text, source)
    if not isinstance(data, dict):
        c.fail("config root must be a table")
    c.section = ""
    c.keys(data, _TOP, "root")

    c.section = "manifest"
    man = data.get("manifest", {})
    c.keys(man, _SECTIONS["manifest"], "manifest")
    ladder_kbps = man.get("ladder_kbps", list(DEFAULT_LADDER_KBPS))
    if not isinstance(ladder_kbps, list) or not all(
        isinstance(x, (int, float)) and not isinstance(x, bool) for x in ladder_kbps
    ):
        c.fail("manifest.ladder_kbps must be a list of numbers", "ladder_kbps")
    if len(set(ladder_kbps)) != len(ladder_kbps):
        c.fail("manifest.ladder_kbps contains duplicate rates", "ladder_kbps")
    try:
        ladder = BitrateLadder(tuple(round(x * 1000) for x in ladder_kbps))
        manifest = Manifest(
            segment_count=c.number(man, "segments", 175, "manifest", integer=True),
            segment_duration=float(c.number(man, "segment_duration", 2.0, "manifest")),
            offset=c.number(man, "offset", 4, "manifest", integer=True),
            ladder=ladder,
            fps=float(c.number(man, "fps", 25.0, "manifest")),
        )
    except ConfigFileError:
        raise
    except ConfigError as exc:
        c.fail(str(exc), "manifest")

    c.section = "network"
    net = data.get("network")
    if net is None:
        c.fail("missing [network] table")
    c.keys(net, _SECTIONS["network"], "network")
    has_trace, has_syn = "trace" in net, "synthetic" in net
    if has_trace == has_syn:
        c.fail("[network] needs exactly one of 'trace' or 'synthetic'", "network")
    synthetic = trace_path = None
    if has_syn:
        c.section = "network.synthetic"
        syn = net["synthetic"]
        c.keys(syn, SYNTHETIC_KEYS - {"rng_seed"}, "network.synthetic")
        try:
            synthetic = SyntheticTraceConfig(**syn)
        except (ConfigError, TypeError) as exc:
            # point at the offending field when the message names one
            key = next((k for k in syn if k in str(exc)), "network.synthetic")
            c.fail(str(exc), key)
    else:
        if not isinstance(net["trace"], str):
            c.fail("network.trace must be a path string", "trace")
        trace_path = Path(net["trace"])
        if not trace_path.is_absolute() and base_dir is not None:
            trace_path = base_dir / trace_path

    c.section = "policy"
    pol = data.get("policy", {})
    c.keys(pol, _SECTIONS["policy"], "policy")
    name = pol.get("name", "tb-bsc")
    if name not in POLICY_NAMES:
        c.fail(f"unknown policy {name!r}; expected one of {', '.join(POLICY_NAMES)}", "name")
    mode = pol.get("estimator", SMOOTHED)
    if mode not in (INSTANT, SMOOTHED):
        c.fail(f"policy.estimator must be 'instant' or 'smoothed', got {mode!r}", "estimator")
    weight = c.number(pol, "smoothing_weight", 0.2, "policy")
    if not 0 < weight <= 1:
        c.fail("policy.smoothing_weight must lie in (0, 1]", "smoothing_weight")
    thresholds = pol.get("bba0_thresholds", [20.0, 45.0, 70.0])
    if (not isinstance(thresholds, list) or len(thresholds) != 3
            or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in thresholds)):
        c.fail("policy.bba0_thresholds must be three numbers", "bba0_thresholds")
    if not thresholds[0] < thresholds[1] < thresholds[2]:
        c.fail("policy.bba0_thresholds must be strictly increasing", "bba0_thresholds")
    pin = pol.get("pin_enhancement", False)
    if not isinstance(pin, bool):
        c.fail("policy.pin_enhancement must be a boolean", "pin_enhancement")
    params = PolicyParams(
        reservoir=float(c.number(pol, "reservoir", 20.0, "policy")),
        cushion_low=float(c.number(pol, "cushion_low", 70.0, "policy")),
        cushion_top=float(c.number(pol, "cushion_top", 50.0, "policy")),
        bba0_thresholds=tuple(float(x) for x in thresholds),
        pin_enhancement=pin,
    )
    for key in ("reservoir", "cushion_low", "cushion_top"):
        if not getattr(params, key) > 0:
            c.fail(f"policy.{key} must be positive", key)

    c.section = "run"
    run = data.get("run", {})
    c.keys(run, _SECTIONS["run"], "run")
    if "seeds" in run and "seed_count" in run:
        c.fail("[run] takes 'seeds' or 'seed_count', not both", "seed_count")
    if "seed_count" in run:
        n = c.number(run, "seed_count", 1, "run", integer=True)
        if n < 1:
            c.fail("run.seed_count must be >= 1", "seed_count")
        seeds = tuple(range(n))
    else:
        seeds = run.get("seeds", [0])
        if (not isinstance(seeds, list) or not seeds
                or not all(isinstance(s, int) and not isinstance(s, bool) for s in seeds)):
            c.fail("run.seeds must be a non-empty list of integers", "seeds")
        seeds = tuple(seeds)
    basis = run.get("basis", "requested")
    if basis not in ("requested", "rendered"):
        c.fail(f"run.basis must be 'requested' or 'rendered', got {basis!r}", "basis")
    resume = run.get("resume_threshold")
    if resume is not None:
        resume = float(c.number(run, "resume_threshold", None, "run"))
        if not resume > 0:
            c.fail("run.resume_threshold must be positive", "resume_threshold")
    out = run.get("output_dir", "out")
    if not isinstance(out, str):
        c.fail("run.output_dir must be a string", "output_dir")

    c.section = ""
    scen_name = data.get("name", Path(source).stem if source else "scenario")
    return ScenarioConfig(
        name=str(scen_name),
        manifest=manifest,
        policy=name,
        params=params,
        estimator_mode=mode,
        smoothing_weight=float(weight),
        synthetic=synthetic,
        trace_path=trace_path,
        seeds=seeds,
        basis=basis,
        output_dir=Path(out),
        resume_threshold=resume,
        source=source,
    )


def read_document(path: Path):
    """Parse a TOML or JSON file; returns ``(data, text)``."""
    text = path.read_text()
    try:
        if path.suffix.lower() == ".json":
            return json.loads(text), text
        return tomllib.loads(text), text
    except json.JSONDecodeError as exc:
        raise ConfigFileError(exc.msg, str(path), exc.lineno) from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigFileError(str(exc), str(path)) from None


def preset_dir() -> Path:
    return Path(str(resources.files("bscsim") / "presets"))


def resolve(path_or_preset) -> Path:
    p = Path(path_or_preset)
    if p.exists():
        return p
    bundled = preset_dir() / f"{path_or_preset}.toml"
    if str(path_or_preset) in PRESETS or (p.name == str(path_or_preset) and bundled.exists()):
        return bundled
    raise ConfigFileError(f"no such config file or preset: {path_or_preset}", str(path_or_preset))


def load_config(path_or_preset) -> ScenarioConfig:
    path = resolve(path_or_preset)
    data, text = read_document(path)
    return parse_config(data, text, str(path), path.parent)


def build_trace(cfg: ScenarioConfig, seed: int) -> CapacityTrace:
    if cfg.synthetic is not None:
        return generate_synthetic(dataclasses.replace(cfg.synthetic, rng_seed=seed))
    return load_trace(cfg.trace_path)


def run_scenario(cfg: ScenarioConfig, seed: int, trace: Optional[CapacityTrace] = None) -> SimulationResult:
    if trace is None:
        trace = build_trace(cfg, seed)
    policy = make_policy(cfg.policy, cfg.manifest.ladder, cfg.params)
    return run_session(cfg.manifest, trace, policy, cfg.estimator(), cfg.resume_threshold)


SWEEPABLE = ("phi", "policy", "c1", "c2", "seeds")


def override(cfg: ScenarioConfig, param: str, value) -> ScenarioConfig:
    """Copy of ``cfg`` with one sweepable parameter replaced."""
    try:
        if param == "phi":
            return dataclasses.replace(cfg, manifest=dataclasses.replace(cfg.manifest, offset=int(value)))
        if param == "policy":
            if value not in POLICY_NAMES:
                raise ConfigError(f"unknown policy {value!r}")
            return dataclasses.replace(cfg, policy=value)
        if param == "c1":
            return dataclasses.replace(cfg, params=dataclasses.replace(cfg.params, cushion_low=float(value)))
        if param == "c2":
            return dataclasses.replace(cfg, params=dataclasses.replace(cfg.params, cushion_top=float(value)))
        if param == "seeds":
            n = int(value)
            if n < 1:
                raise ConfigError("seed count must be >= 1")
            return dataclasses.replace(cfg, seeds=tuple(range(n)))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, BscError):
            raise
        raise ConfigError(f"bad value {value!r} for {param}: {exc}") from None
    raise ConfigError(f"parameter {param!r} is not sweepable; choose from {', '.join(SWEEPABLE)}")
