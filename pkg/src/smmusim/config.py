"""YAML run configuration with a strict schema.

Every key is optional. Unknown keys anywhere in the document are an error.
``SIM_SEED`` in the environment replaces the file's seed.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Optional

import jsonschema
import yaml

from .experiments import (
    DEFAULT_PAYLOADS,
    FPGA_FREQUENCIES_MHZ,
    Calibration,
    Scenario,
    default_calibration,
)
from .simcore import ns
from .tlb import Replacement, TlbConfig
from .traffic import Jitter

SEED_ENV = "SIM_SEED"


class ConfigError(ValueError):
    pass


def _obj(props: dict, **extra) -> dict:
    return {"type": "object", "additionalProperties": False, "properties": props, **extra}


_NUM = {"type": "number", "minimum": 0}
_POS_INT = {"type": "integer", "minimum": 1}
_TLB = _obj(
    {
        "depth": _POS_INT,
        "associativity": {"type": ["integer", "null"], "minimum": 1},
        "replacement": {"enum": [r.value for r in Replacement]},
        "index": {"enum": ["modulo", "stream_xor"]},
    }
)

SCHEMA: dict = _obj(
    {
        "scenarios": {"type": "array", "items": {"enum": [s.value for s in Scenario]}, "minItems": 1},
        "frequencies_mhz": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
        "smmu_enabled": {"type": "array", "items": {"type": "boolean"}, "minItems": 1},
        "payloads": {"type": "array", "items": {"type": "integer", "minimum": 16, "maximum": 4096}, "minItems": 1},
        "iterations": _POS_INT,
        "warmup": {"type": "integer", "minimum": 0},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "duration_us": {"type": "number", "exclusiveMinimum": 0},
        "n_max": _POS_INT,
        "jobs": _POS_INT,
        "out_dir": {"type": "string"},
        "calibration": _obj(
            {
                "latencies_ns": _obj(
                    {
                        "t_micro_hit": _NUM,
                        "t_macro_hit": _NUM,
                        "t_ptw": _NUM,
                        "t_ptw_partial": _NUM,
                        "tbu_service": _NUM,
                        "tcu_service": _NUM,
                    }
                ),
                "port_sync_cycles": {"type": "integer", "minimum": 0},
                "ptw_slots": _POS_INT,
                "in_order_responses": {"type": "boolean"},
                "micro_tlb": _TLB,
                "macro_tlb": _TLB,
                "memory": _obj(
                    {
                        "service_time_per_beat_ns": _NUM,
                        "jitter": {"enum": [j.value for j in Jitter]},
                        "jitter_cycles": {"type": "integer", "minimum": 0},
                        "jitter_probability": {"type": "number", "minimum": 0, "maximum": 1},
                    }
                ),
                "bench_pages": _POS_INT,
                "bench_base_cycles": {"type": "integer", "minimum": 2},
                "interference": _obj(
                    {
                        "clock_mhz": {"type": "number", "exclusiveMinimum": 0},
                        "channels": _POS_INT,
                        "base_cycles": {"type": "integer", "minimum": 2},
                        "payload": {"type": "integer", "minimum": 16, "maximum": 4096},
                    }
                ),
            }
        ),
    }
)


@dataclass
class RunConfig:
    scenarios: list[Scenario] = field(default_factory=lambda: list(Scenario))
    frequencies_mhz: list[float] = field(default_factory=lambda: list(FPGA_FREQUENCIES_MHZ))
    smmu_enabled: list[bool] = field(default_factory=lambda: [False, True])
    payloads: list[int] = field(default_factory=lambda: list(DEFAULT_PAYLOADS))
    iterations: int = 10_000
    warmup: int = 3
    seed: int = 0
    duration_us: float = 500.0
    n_max: int = 160
    jobs: int = 1
    out_dir: str = "results"
    calibration: Calibration = field(default_factory=default_calibration)


def _apply_tlb(cfg: TlbConfig, raw: dict) -> TlbConfig:
    kw = dict(raw)
    if "replacement" in kw:
        kw["replacement"] = Replacement(kw["replacement"])
    return replace(cfg, **kw)


def _apply_calibration(cal: Calibration, raw: dict) -> Calibration:
    smmu = cal.smmu
    lat = smmu.latencies
    if "latencies_ns" in raw:
        lat = replace(lat, **{k: ns(v) for k, v in raw["latencies_ns"].items()})
    if "port_sync_cycles" in raw:
        lat = replace(lat, port_sync_cycles=raw["port_sync_cycles"])
    smmu = replace(smmu, latencies=lat)
    for key in ("ptw_slots", "in_order_responses"):
        if key in raw:
            smmu = replace(smmu, **{key: raw[key]})
    if "micro_tlb" in raw:
        smmu = replace(smmu, tbus=tuple((i, _apply_tlb(c, raw["micro_tlb"])) for i, c in smmu.tbus))
    if "macro_tlb" in raw:
        smmu = replace(smmu, tcu=_apply_tlb(smmu.tcu, raw["macro_tlb"]))
    mem = cal.memory
    for key, value in raw.get("memory", {}).items():
        if key == "service_time_per_beat_ns":
            mem = replace(mem, service_time_per_beat=ns(value))
        elif key == "jitter":
            mem = replace(mem, jitter=Jitter(value))
        else:
            mem = replace(mem, **{key: value})
    cal = replace(cal, smmu=smmu, memory=mem)
    for key in ("bench_pages", "bench_base_cycles"):
        if key in raw:
            cal = replace(cal, **{key: raw[key]})
    names = {"clock_mhz": "interf_clock_mhz", "channels": "interf_channels",
             "base_cycles": "interf_base_cycles", "payload": "interf_payload"}
    for key, value in raw.get("interference", {}).items():
        cal = replace(cal, **{names[key]: value})
    return cal


def parse_config(raw: Optional[dict[str, Any]], env: Optional[dict[str, str]] = None) -> RunConfig:
    raw = raw or {}
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from None
    cfg = RunConfig()
    for key in ("iterations", "warmup", "seed", "duration_us", "n_max", "jobs", "out_dir"):
        if key in raw:
            setattr(cfg, key, raw[key])
    if "scenarios" in raw:
        cfg.scenarios = [Scenario(s) for s in raw["scenarios"]]
    for key in ("frequencies_mhz", "smmu_enabled", "payloads"):
        if key in raw:
            setattr(cfg, key, list(raw[key]))
    try:
        cfg.calibration = _apply_calibration(cfg.calibration, raw.get("calibration", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"calibration: {exc}") from None
    env = os.environ if env is None else env
    if env.get(SEED_ENV):
        try:
            cfg.seed = int(env[SEED_ENV])
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {env[SEED_ENV]!r}") from None
    return cfg


def load_config(path: Optional[str | Path] = None, env: Optional[dict[str, str]] = None) -> RunConfig:
    if path is None:
        return parse_config({}, env)
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML ({exc})") from None
    if raw is not None and not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return parse_config(raw, env)
