"""Campaign configuration: one YAML document per campaign.

Schema (all sections optional except ``design``)::

    seed: 1
    design:
      generator: aes | toy | bus       # or
      netlist: path/to/design.net      # with protocol: aes | toy | bus
      library: path/to/cells.lib       # optional, default bundled library
      sboxes_per_cycle: 4              # aes
      bit_selector: 0                  # toy
      decoy_only: false                # toy
      clear_register: false            # bus
    stimuli:
      source: random | nonspecific | file
      n: 1024
      key_policy: fixed | random
      path: vectors.jsonl              # source: file
      n_per_group: 512                 # source: nonspecific
      bias: {round: 6, bytes: [0, 1], value: 0}
    simulation: {clock_period: 10240, reset_cycles: 1, num_cycles: 20, window_cycles: [12, 20]}
    frames: {frames_per_cycle: 64}
    test:
      kind: specific | nonspecific
      target: {intermediate: sbox_out, round: 1, byte_index: 0, model: hamming_weight}
      confidence: 0.99
      threshold: null                  # overrides confidence
    verify: {enabled: false, byte_index: 0, step: 16, random_sets: 10}
    report: {top: 1000}
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

PROTOCOLS = ("aes", "toy", "bus")


class ConfigError(ValueError):
    """Invalid or incomplete configuration; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


@dataclass
class DesignConfig:
    generator: str | None = None
    netlist: str | None = None
    library: str | None = None
    protocol: str | None = None
    sboxes_per_cycle: int = 4
    bit_selector: int = 0
    decoy_only: bool = False
    clear_register: bool = False

    @property
    def kind(self) -> str:
        return self.generator or self.protocol or "aes"


@dataclass
class StimuliConfig:
    source: str = "random"
    n: int = 1024
    key_policy: str | None = None
    path: str | None = None
    n_per_group: int = 512
    bias: dict = field(default_factory=dict)


@dataclass
class SimulationConfig:
    clock_period: int = 10240
    reset_cycles: int = 1
    num_cycles: int | None = None
    window_cycles: list[int] | None = None


@dataclass
class FramesConfig:
    frames_per_cycle: int = 64


@dataclass
class TestConfig:
    kind: str = "specific"
    target: dict = field(default_factory=dict)
    confidence: float = 0.99
    threshold: float | None = None


@dataclass
class VerifyConfig:
    enabled: bool = False
    byte_index: int = 0
    step: int = 16
    random_sets: int = 10


@dataclass
class ReportConfig:
    top: int = 1000


@dataclass
class CampaignConfig:
    design: DesignConfig
    stimuli: StimuliConfig = field(default_factory=StimuliConfig)
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    frames: FramesConfig = field(default_factory=FramesConfig)
    test: TestConfig = field(default_factory=TestConfig)
    verify: VerifyConfig = field(default_factory=VerifyConfig)
    report: ReportConfig = field(default_factory=ReportConfig)
    seed: int = 0
    base_dir: str = "."

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("base_dir")
        return d

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else Path(self.base_dir) / p


_SECTIONS = {
    "design": DesignConfig, "stimuli": StimuliConfig, "simulation": SimulationConfig,
    "frames": FramesConfig, "test": TestConfig, "verify": VerifyConfig, "report": ReportConfig,
}


def _section(name: str, cls, raw: Any):
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(name, "must be a mapping")
    known = {f.name for f in dataclasses.fields(cls)}
    for k in raw:
        if k not in known:
            raise ConfigError(f"{name}.{k}", "unknown key")
    return cls(**raw)


def config_from_dict(raw: dict, base_dir: str = ".") -> CampaignConfig:
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a mapping")
    for k in raw:
        if k not in _SECTIONS and k != "seed":
            raise ConfigError(k, "unknown key")
    if "design" not in raw:
        raise ConfigError("design", "missing section")
    parts = {name: _section(name, cls, raw.get(name)) for name, cls in _SECTIONS.items()}
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed", "must be a non-negative integer")
    cfg = CampaignConfig(seed=seed, base_dir=base_dir, **parts)
    check_config(cfg)
    return cfg


def load_config(path: str | Path) -> CampaignConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError("--config", f"file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as e:
        raise ConfigError("--config", f"invalid YAML: {e}") from None
    return config_from_dict(raw or {}, str(path.parent))


def check_config(cfg: CampaignConfig) -> None:
    d = cfg.design
    if d.generator is None and d.netlist is None:
        raise ConfigError("design", "needs a generator or a netlist path")
    if d.generator is not None and d.generator not in PROTOCOLS:
        raise ConfigError("design.generator", f"must be one of {', '.join(PROTOCOLS)}")
    if d.netlist is not None:
        if d.generator is not None:
            raise ConfigError("design.netlist", "give either a generator or a netlist, not both")
        if d.protocol not in PROTOCOLS:
            raise ConfigError("design.protocol", f"netlist files need a protocol ({', '.join(PROTOCOLS)})")
        if not cfg.resolve(d.netlist).is_file():
            raise ConfigError("design.netlist", f"file not found: {d.netlist}")
    if d.library is not None and not cfg.resolve(d.library).is_file():
        raise ConfigError("design.library", f"file not found: {d.library}")
    if d.sboxes_per_cycle not in (4, 16):
        raise ConfigError("design.sboxes_per_cycle", "must be 4 or 16")
    s = cfg.stimuli
    if s.source not in ("random", "nonspecific", "file"):
        raise ConfigError("stimuli.source", "must be random, nonspecific or file")
    if s.source == "file" and (s.path is None or not cfg.resolve(s.path).is_file()):
        raise ConfigError("stimuli.path", f"file not found: {s.path}")
    if s.key_policy not in (None, "fixed", "random"):
        raise ConfigError("stimuli.key_policy", "must be fixed or random")
    if s.n < 1 or s.n_per_group < 1:
        raise ConfigError("stimuli.n", "vector counts must be >= 1")
    for k in s.bias:
        if k not in ("round", "bytes", "value"):
            raise ConfigError(f"stimuli.bias.{k}", "unknown key")
    if cfg.test.kind not in ("specific", "nonspecific"):
        raise ConfigError("test.kind", "must be specific or nonspecific")
    if (cfg.test.kind == "nonspecific") != (s.source == "nonspecific") and s.source != "file":
        raise ConfigError("test.kind", "non-specific tests need stimuli.source: nonspecific")
    if not 0.0 < cfg.test.confidence < 1.0:
        raise ConfigError("test.confidence", "must be in (0, 1)")
    if cfg.frames.frames_per_cycle < 1:
        raise ConfigError("frames.frames_per_cycle", "must be >= 1")
    w = cfg.simulation.window_cycles
    if w is not None and (len(w) != 2 or not 0 <= w[0] < w[1]):
        raise ConfigError("simulation.window_cycles", "must be an increasing [start, end] pair")
