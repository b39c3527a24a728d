"""Experiment configuration: dataclasses plus TOML/JSON loading.

File layout (TOML shown; JSON uses the same nesting)::

    seed = 1
    horizon_us = 2000000
    drain_us = 500000

    [topology]
    m = 3
    n = 4
    inter_dc_us = [[0, 35000, 70000], [35000, 0, 40000], [70000, 40000, 0]]

    [clocks]
    skew_us = 50000

    [protocol]
    name = "okapi"
    heartbeat_us = 1000

    [workload]
    mode = "tx-put"
    p = 2

    [partition]
    dc = 2
    at_us = 1000000

Unknown sections or fields and ill-typed values are reported together, each
with the file line it came from when it can be located.
"""

from __future__ import annotations

import dataclasses
import json
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from ..server import ServerParams
from ..simnet import Topology
from .workload import WorkloadSpec

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

PROTOCOLS = ("okapi", "gentlerain", "cure")
LOG_LEVELS = ("off", "ops", "full")


@dataclass
class ClockSpec:
    # offsets drawn uniformly from [-skew_us, skew_us] per server
    skew_us: int = 0
    # rates drawn uniformly from [1 - drift_ppm/1e6, 1 + drift_ppm/1e6]
    drift_ppm: float = 0.0
    # explicit offsets by server name ("p0@dc1"); override the random draw
    offsets: dict = field(default_factory=dict)

    def validate(self) -> list[str]:
        errs = []
        if self.skew_us < 0:
            errs.append("clocks.skew_us: must be non-negative")
        if not 0 <= self.drift_ppm < 1e6:
            errs.append("clocks.drift_ppm: must be in [0, 1e6)")
        for name, off in self.offsets.items():
            if not isinstance(off, int):
                errs.append(f"clocks.offsets.{name}: must be an integer")
        return errs


@dataclass
class PartitionSpec:
    dc: int
    at_us: int
    heal_us: Optional[int] = None

    def validate(self, m: int) -> list[str]:
        errs = []
        if not 0 <= self.dc < m:
            errs.append(f"partition.dc: must be in [0, {m})")
        if self.at_us < 0:
            errs.append("partition.at_us: must be non-negative")
        if self.heal_us is not None and self.heal_us <= self.at_us:
            errs.append("partition.heal_us: must be after at_us")
        return errs


@dataclass
class ExperimentConfig:
    protocol: str = "okapi"
    seed: int = 0
    horizon_us: int = 5_000_000
    drain_us: int = 500_000
    topology: Topology = field(default_factory=Topology)
    clocks: ClockSpec = field(default_factory=ClockSpec)
    params: ServerParams = field(default_factory=ServerParams)
    workload: WorkloadSpec = field(default_factory=WorkloadSpec)
    partition: Optional[PartitionSpec] = None
    keep_trace: bool = True
    log_level: str = "ops"

    def validate(self) -> list[str]:
        errs = []
        if self.protocol not in PROTOCOLS:
            errs.append(f"protocol.name: expected one of {', '.join(PROTOCOLS)}")
        if self.horizon_us < 0:
            errs.append("horizon_us: must be non-negative")
        if self.drain_us < 0:
            errs.append("drain_us: must be non-negative")
        if self.log_level not in LOG_LEVELS:
            errs.append(f"log_level: expected one of {', '.join(LOG_LEVELS)}")
        errs += self.topology.validate()
        errs += self.clocks.validate()
        errs += self.params.validate()
        errs += self.workload.validate(self.topology.n)
        if self.partition is not None:
            errs += self.partition.validate(self.topology.m)
        return errs

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = {
            "seed": self.seed,
            "horizon_us": self.horizon_us,
            "drain_us": self.drain_us,
            "keep_trace": self.keep_trace,
            "log_level": self.log_level,
            "topology": dataclasses.asdict(self.topology),
            "clocks": dataclasses.asdict(self.clocks),
            "protocol": {"name": self.protocol, **dataclasses.asdict(self.params)},
            "workload": dataclasses.asdict(self.workload),
        }
        if self.partition is not None:
            d["partition"] = dataclasses.asdict(self.partition)
        return d


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.errors))


_SECTIONS = {
    "topology": Topology,
    "clocks": ClockSpec,
    "protocol": ServerParams,
    "workload": WorkloadSpec,
    "partition": PartitionSpec,
}
_TOP = {"seed": int, "horizon_us": int, "drain_us": int, "keep_trace": bool, "log_level": str}


def _type_ok(value, annotation) -> bool:
    ann = str(annotation)
    if "Optional" in ann and value is None:
        return True
    if ann.startswith("int") or ann.endswith("int]"):
        return isinstance(value, int) and not isinstance(value, bool)
    if ann.startswith("float"):
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if ann.startswith("str"):
        return isinstance(value, str)
    if ann.startswith("bool"):
        return isinstance(value, bool)
    if ann.startswith("list"):
        return isinstance(value, list)
    if ann.startswith("dict"):
        return isinstance(value, dict)
    return True


def _locator(text: Optional[str]):
    """Map (section, key) to a 1-based line number in ``text`` if found."""
    if not text:
        return lambda section, key: None
    lines = text.splitlines()

    def find(section, key):
        start = 0
        if section:
            hdr = re.compile(r"^\s*\[\s*" + re.escape(section) + r"\s*\]")
            js = re.compile(r'^\s*"' + re.escape(section) + r'"\s*:')
            for i, line in enumerate(lines):
                if hdr.match(line) or js.match(line):
                    start = i
                    break
        if key is None:
            return start + 1 if section else None
        pat = re.compile(r'^\s*"?' + re.escape(key) + r'"?\s*[=:]')
        for i in range(start, len(lines)):
            if pat.match(lines[i]):
                return i + 1
        return None

    return find


def config_from_dict(data: dict, text: Optional[str] = None, source: str = "<config>") -> ExperimentConfig:
    where = _locator(text)
    errors: list[str] = []

    def err(section, key, msg):
        path = f"{section}.{key}" if section and key else (section or key)
        line = where(section, key)
        prefix = f"{source}:{line}: " if line else f"{source}: "
        errors.append(f"{prefix}{path}: {msg}")

    top: dict = {}
    sections: dict = {}
    protocol = "okapi"
    for key, value in data.items():
        if key in _SECTIONS:
            if not isinstance(value, dict):
                err(None, key, "expected a table")
                continue
            sections[key] = value
        elif key in _TOP:
            if not _type_ok(value, _TOP[key].__name__):
                err(None, key, f"expected {_TOP[key].__name__}, got {type(value).__name__}")
            else:
                top[key] = value
        else:
            err(None, key, "unknown setting")

    built = {}
    for name, cls in _SECTIONS.items():
        raw = dict(sections.get(name, {}))
        if name == "protocol":
            protocol = raw.pop("name", "okapi")
            if not isinstance(protocol, str):
                err("protocol", "name", "expected str")
                protocol = "okapi"
        if name == "partition" and name not in sections:
            continue
        fields = {f.name: f for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, value in raw.items():
            if key not in fields:
                err(name, key, "unknown field")
            elif not _type_ok(value, fields[key].type):
                err(name, key, f"expected {fields[key].type}, got {type(value).__name__}")
            else:
                kwargs[key] = value
        try:
            built[name] = cls(**kwargs)
        except TypeError as exc:
            err(name, None, str(exc))
    if errors:
        raise ConfigError(errors)

    cfg = ExperimentConfig(
        protocol=protocol,
        topology=built["topology"],
        clocks=built["clocks"],
        params=built["protocol"],
        workload=built["workload"],
        partition=built.get("partition"),
        **top,
    )
    for msg in cfg.validate():
        path = msg.split(":", 1)[0]
        section, _, key = path.partition(".")
        if not key:
            section, key = None, section
        key = key.split("[", 1)[0].split("/", 1)[0].split(".", 1)[0]
        line = where(section, key)
        errors.append(f"{source}:{line}: {msg}" if line else f"{source}: {msg}")
    if errors:
        raise ConfigError(errors)
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    text = path.read_text()
    try:
        if path.suffix == ".json":
            data = json.loads(text)
        else:
            data = tomllib.loads(text)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError([f"{path}: {exc}"]) from None
    if not isinstance(data, dict):
        raise ConfigError([f"{path}: top level must be a table"])
    return config_from_dict(data, text, str(path))
