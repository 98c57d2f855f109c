"""INI-style configuration files and the built-in presets.

A config file has up to four sections, each a plain ``key = value`` list::

    [adi]
    k = 5
    l = 100
    iterations = 2000

    [network]
    body_layer_sizes = 256, 128
    learning_rate = 1e-4

    [search]
    exploration_c = 4.0
    time_limit = 60s

    [bench]
    cubes = 100
    depths = 5, 7

Missing keys fall back to the dataclass defaults.  Unknown keys are an error.
"""

from __future__ import annotations

import configparser
import dataclasses
import re
from dataclasses import dataclass, field
from pathlib import Path

from .adi import AdiConfig
from .mcts import SearchConfig
from .network import NetworkConfig


@dataclass
class BenchConfig:
    cubes: int = 100
    depths: list[int] = field(default_factory=lambda: [5, 7])
    variants: list[str] = field(default_factory=lambda: ["mcts", "naive-mcts", "greedy"])
    greedy_scramble_depths: list[int] = field(default_factory=lambda: [3])
    greedy_move_limit: int = 10
    oracle_table_depth: int = 5
    oracle_cap: int = 8
    seed: int = 1234


@dataclass
class Config:
    adi: AdiConfig = field(default_factory=AdiConfig)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    search: SearchConfig = field(default_factory=SearchConfig)
    bench: BenchConfig = field(default_factory=BenchConfig)


_DURATION = re.compile(r"^\s*([0-9.]+)\s*(ms|s|m|min|h)?\s*$")
_UNITS = {None: 1.0, "ms": 1e-3, "s": 1.0, "m": 60.0, "min": 60.0, "h": 3600.0}


def parse_duration(text: str | float | None) -> float | None:
    """'90', '90s', '2m', '1h' -> seconds.  'none' means no limit."""
    if text is None or isinstance(text, (int, float)):
        return None if text is None else float(text)
    if text.strip().lower() in ("none", "inf", ""):
        return None
    m = _DURATION.match(text)
    if not m:
        raise ValueError(f"cannot parse duration {text!r}")
    return float(m.group(1)) * _UNITS[m.group(2)]


def _convert(value: str, current, name: str):
    if name == "time_limit":
        return parse_duration(value)
    if name == "max_simulations":
        return None if value.strip().lower() == "none" else int(value)
    if isinstance(current, bool):
        if value.strip().lower() in ("1", "true", "yes", "on"):
            return True
        if value.strip().lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{name}: expected a boolean, got {value!r}")
    if isinstance(current, list):
        items = [v.strip() for v in value.split(",") if v.strip()]
        if current and isinstance(current[0], str):
            return items
        return [int(v) for v in items]
    if isinstance(current, int):
        return int(value)
    if isinstance(current, float):
        return float(value)
    return value


def _fill(obj, section: configparser.SectionProxy):
    known = {f.name for f in dataclasses.fields(obj)}
    for key, value in section.items():
        if key not in known:
            raise ValueError(f"[{section.name}] unknown key {key!r}")
        setattr(obj, key, _convert(value, getattr(obj, key), key))


def parse_config(text: str) -> Config:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.read_string(text)
    cfg = Config()
    for name in parser.sections():
        if not hasattr(cfg, name):
            raise ValueError(f"unknown config section [{name}]")
        _fill(getattr(cfg, name), parser[name])
    cfg.adi.validate()
    cfg.network.validate()
    cfg.search.validate()
    return cfg


def load_config(path_or_preset: str | Path | None) -> Config:
    """Read a config file, or a preset name ('desk', 'paper')."""
    if path_or_preset is None:
        return Config()
    if str(path_or_preset) in PRESETS:
        return parse_config(PRESETS[str(path_or_preset)])
    return parse_config(Path(path_or_preset).read_text())


def dump_config(cfg: Config) -> str:
    lines = []
    for section in ("adi", "network", "search", "bench"):
        lines.append(f"[{section}]")
        for f in dataclasses.fields(getattr(cfg, section)):
            v = getattr(getattr(cfg, section), f.name)
            if isinstance(v, list):
                v = ", ".join(str(x) for x in v)
            lines.append(f"{f.name} = {v}")
        lines.append("")
    return "\n".join(lines)


DESK = """
[adi]
k = 5
l = 100
iterations = 2000
batch_size = 10
checkpoint_interval = 500
seed = 0

[network]
body_layer_sizes = 256, 128
value_head_sizes = 64
policy_head_sizes = 64
learning_rate = 1e-4
rmsprop_decay = 0.9
rmsprop_epsilon = 1e-8

[search]
exploration_c = 4.0
virtual_loss_nu = 1.0
time_limit = 60s
worker_count = 1

[bench]
cubes = 100
depths = 5, 7
"""

PAPER = """
[adi]
k = 30
l = 10000
iterations = 2000000
batch_size = 10000
checkpoint_interval = 1000
seed = 0

[network]
body_layer_sizes = 4096, 2048
value_head_sizes = 512
policy_head_sizes = 512

[search]
exploration_c = 4.0
virtual_loss_nu = 1.0
time_limit = 60m
worker_count = 32

[bench]
cubes = 640
depths = 1000
variants = mcts, naive-mcts, greedy
"""

PRESETS = {"desk": DESK, "paper": PAPER}
