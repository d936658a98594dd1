"""Experiment configuration: an INI file whose every key is also a CLI flag.

Keys are unique across sections so ``--create_listing_lag 3`` needs no
section prefix.
"""

from __future__ import annotations

import argparse
import configparser
from dataclasses import dataclass
from importlib import resources
from typing import Any, Callable, Optional

from objlab.engine import FaultPlan
from objlab.errors import ConfigError
from objlab.harness.catalog import SCENARIOS, Scenario, Workload, WorkloadKind, get_scenario, make_workload
from objlab.harness.pricing import PricingModel
from objlab.harness.report import FORMATS
from objlab.stocator import ReadOption
from objlab.store import ConsistencyPolicy


def _bool(text: str) -> bool:
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_int(text: str) -> Optional[int]:
    text = str(text).strip()
    return None if text in ("", "none") else int(text)


def _names(text: str) -> list[str]:
    return [s.strip() for s in str(text).split(",") if s.strip()]


@dataclass(frozen=True)
class Key:
    section: str
    parse: Callable[[str], Any]
    default: str
    help: str


KEYS: dict[str, Key] = {
    "create_listing_lag": Key("store", int, "0", "ticks before a new object appears in listings"),
    "delete_listing_lag": Key("store", int, "0", "ticks before a deleted object leaves listings"),
    "read_after_write_strong": Key("store", _bool, "true", "GET/HEAD see new objects immediately"),
    "scenarios": Key("scenario", _names, ",".join(SCENARIOS), "comma-separated scenario names"),
    "read_option": Key("scenario", ReadOption, "listing", "rename-free dataset read: listing or manifest"),
    "workloads": Key("workload", _names, "single-task", "comma-separated workload kinds"),
    "parts": Key("workload", int, "8", "parts per workload (ignored by the fixed example programs)"),
    "size": Key("workload", int, "1048576", "bytes per part"),
    "read_delay": Key("workload", int, "0", "ticks between job end and the consumer read"),
    "repeats": Key("workload", int, "1", "runs per matrix cell"),
    "seed": Key("workload", int, "0", "seed for part bodies and random fault plans"),
    "plan": Key("faults", str, "", "explicit outcomes, e.g. 2/0=slow:20,2/1=fail-before-close"),
    "random_faults": Key("faults", _bool, "false", "draw a random fail-stop plan from the seed"),
    "speculation_threshold": Key("faults", _opt_int, "none", "ticks before a speculative attempt"),
    "max_failures": Key("faults", int, "4", "failed attempts before a task fails the job"),
    "max_speculative": Key("faults", int, "2", "speculative attempts per task"),
    "class_a": Key("pricing", float, "1.0", "price of PUT, COPY and GET-container"),
    "class_b": Key("pricing", float, "1.0", "price of GET, HEAD and DELETE"),
    "format": Key("output", str, "table", "report format: table, csv or jsonl"),
    "trace": Key("output", str, "", "also write store events as JSONL to this path"),
}


@dataclass
class ExperimentConfig:
    policy: ConsistencyPolicy
    scenarios: list[Scenario]
    workloads: list[Workload]
    repeats: int
    seed: int
    pricing: PricingModel
    format: str
    trace: str


def read_ini(text: str) -> dict[str, str]:
    parser = configparser.ConfigParser(interpolation=None)
    parser.read_string(text)
    raw = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            spec = KEYS.get(key)
            if spec is None or spec.section != section:
                raise ConfigError(f"unknown key [{section}] {key}")
            raw[key] = value
    return raw


def shipped_config(name: str) -> str:
    return resources.files("objlab").joinpath("data", name).read_text()


def add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="INI file; flags below override its keys")
    for key, spec in KEYS.items():
        parser.add_argument(f"--{key}", default=None, help=f"{spec.help} [{spec.section}]")


def build_config(raw: dict[str, str]) -> ExperimentConfig:
    values = {}
    for key, spec in KEYS.items():
        try:
            values[key] = spec.parse(raw.get(key, spec.default))
        except ValueError as e:
            raise ConfigError(f"{key}: {e}") from None
    if values["format"] not in FORMATS:
        raise ConfigError(f"format must be one of {', '.join(FORMATS)}")

    try:
        policy = ConsistencyPolicy(values["create_listing_lag"], values["delete_listing_lag"],
                                   values["read_after_write_strong"])
    except ValueError as e:
        raise ConfigError(str(e)) from None
    scenarios = [get_scenario(n, values["read_option"]) for n in values["scenarios"]]
    if not scenarios:
        raise ConfigError("no scenarios selected")

    workloads = []
    for kind in values["workloads"]:
        try:
            kind = WorkloadKind(kind)
        except ValueError:
            known = ", ".join(k.value for k in WorkloadKind)
            raise ConfigError(f"unknown workload {kind!r}; known: {known}") from None
        kw = dict(consistency=policy, read_delay=values["read_delay"])
        faults = _faults(values, kind)
        if faults is not None:
            kw["faults"] = faults
        workloads.append(make_workload(kind, values["parts"], values["size"], **kw))
    if not workloads:
        raise ConfigError("no workloads selected")

    try:
        pricing = PricingModel(values["class_a"], values["class_b"])
    except ValueError as e:
        raise ConfigError(str(e)) from None
    return ExperimentConfig(policy, scenarios, workloads, values["repeats"], values["seed"],
                            pricing, values["format"], values["trace"])


def _faults(values: dict, kind: WorkloadKind) -> Optional[FaultPlan]:
    """None keeps the workload's own default plan."""
    knobs = dict(
        speculation_threshold=values["speculation_threshold"],
        max_failures=values["max_failures"],
        max_speculative=values["max_speculative"],
    )
    if values["random_faults"]:
        n = 1 if kind is WorkloadKind.SINGLE_TASK else 3 if kind is WorkloadKind.THREE_TASK else values["parts"]
        base = FaultPlan.random(values["seed"], n)
        if values["speculation_threshold"] is None:
            knobs["speculation_threshold"] = base.speculation_threshold
        return FaultPlan(base.outcomes, seed=values["seed"], **knobs)
    if values["plan"]:
        return FaultPlan(FaultPlan.parse_outcomes(values["plan"]), seed=values["seed"], **knobs)
    return None


def load_config(args: argparse.Namespace, base: str = "") -> ExperimentConfig:
    """``base`` is INI text used when no ``--config`` file is given."""
    raw = read_ini(base) if base else {}
    if getattr(args, "config", None):
        with open(args.config) as fp:
            raw = read_ini(fp.read())
    for key in KEYS:
        value = getattr(args, key, None)
        if value is not None:
            raw[key] = value
    return build_config(raw)
