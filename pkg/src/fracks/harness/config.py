"""Scenario configuration: strict JSON schema, defaults and sweep expansion."""

from __future__ import annotations

import copy
import json
import math
import os
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Optional

import jsonschema

from ..errors import ConfigurationError, InputError
from ..evolve import DtPolicy, SimConfig
from ..flows import FlowKind, FlowSpec
from ..torus import read_snapshot

OUTPUT_ROOT_ENV = "FRACKS_OUTPUT_ROOT"
SWEEP_AXES = ("A", "alpha", "beta", "n", "mass")


def load_schema() -> dict:
    return json.loads(resources.files(__package__).joinpath("schema.json").read_text())


def _fill_defaults(doc, schema):
    if not isinstance(doc, dict) or "properties" not in schema:
        return doc
    for key, sub in schema["properties"].items():
        if key not in doc and "default" in sub:
            doc[key] = copy.deepcopy(sub["default"])
        if key in doc:
            doc[key] = _fill_defaults(doc[key], sub)
    return doc


def _key_path(err: jsonschema.ValidationError) -> str:
    path = ".".join(str(p) for p in err.absolute_path)
    if err.validator == "additionalProperties":
        extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
        path = ".".join(filter(None, [path, extra[0] if extra else ""]))
    elif err.validator == "required":
        missing = [k for k in err.validator_value if k not in err.instance]
        path = ".".join(filter(None, [path, missing[0] if missing else ""]))
    return path or "<root>"


def validate_document(doc: dict) -> dict:
    """Schema-check and default-fill a parsed config document."""
    schema = load_schema()
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise ConfigurationError(err.message, key=_key_path(err))
    return _fill_defaults(copy.deepcopy(doc), schema)


def _p_value(v):
    return math.inf if v == "inf" else float(v)


def sim_config_from(doc: dict, base_dir: Path = Path(".")) -> SimConfig:
    f = doc["flow"]
    stream = None
    if f.get("stream_snapshot"):
        stream, _ = read_snapshot(base_dir / f["stream_snapshot"])
    flow = FlowSpec(FlowKind(f["kind"]), float(f["amplitude"]), f["profile"], float(f["switch_period"]), stream)
    dt = doc["dt"]
    initial = dict(doc["initial"])
    if initial.get("kind") == "snapshot" and "path" in initial:
        initial["path"] = str(base_dir / initial["path"])
    return SimConfig(
        d=doc["d"], n=doc["n"], alpha=float(doc["alpha"]), beta=float(doc["beta"]), flow=flow,
        initial=initial, t_end=float(doc["t_end"]),
        dt=DtPolicy(dt["policy"], dt["dt"], float(dt["c_adv"]), float(dt["c_max"])),
        scheme=doc["scheme"], diag_every=int(doc["diag_every"]),
        blowup_threshold=float(doc["blowup_threshold"]), blowup_tail_fraction=float(doc["blowup_tail_fraction"]),
        positivity_tol=None if doc["positivity_tol"] is None else float(doc["positivity_tol"]),
        p_list=tuple(_p_value(p) for p in doc["p_list"]), dichotomy_p=float(doc["dichotomy_p"]),
        drift=bool(doc["drift"]), seed=int(doc["seed"]))


@dataclass
class Child:
    """One point of a sweep."""

    label: str
    value: Optional[float]
    config: SimConfig


@dataclass
class Scenario:
    name: str
    base: SimConfig
    sweep: Optional[dict]
    outputs: Path
    snapshot_times: list
    expect: str = "completed"
    workers: Optional[int] = None
    report: dict = field(default_factory=dict)
    document: dict = field(default_factory=dict)

    def children(self) -> list[Child]:
        if not self.sweep:
            return [Child(self.name, None, self.base)]
        axis = self.sweep["axis"]
        return [Child(f"{axis}_{v:g}", v, _apply(self.base, axis, v)) for v in self.sweep["values"]]


def _apply(cfg: SimConfig, axis: str, value: float) -> SimConfig:
    key = f"sweep.values[{axis}={value:g}]"
    try:
        if axis == "A":
            return replace(cfg, flow=cfg.flow.with_amplitude(value))
        if axis == "alpha":
            return replace(cfg, alpha=float(value))
        if axis == "beta":
            return replace(cfg, beta=float(value))
        if axis == "n":
            if value != int(value):
                raise ConfigurationError("grid size must be an integer", key=key)
            return replace(cfg, n=int(value))
        if "mass" not in cfg.initial:
            raise ConfigurationError("mass sweep needs bump-type initial data", key="sweep.axis")
        return replace(cfg, initial={**cfg.initial, "mass": float(value)})
    except ConfigurationError as exc:
        if exc.key and exc.key.startswith("sweep"):
            raise
        raise ConfigurationError(str(exc), key=key) from exc


def resolve_output(path: str) -> Path:
    p = Path(path)
    if p.is_absolute():
        return p
    root = os.environ.get(OUTPUT_ROOT_ENV)
    return (Path(root) if root else Path.cwd()) / p


def scenario_from_document(doc: dict, base_dir: Path = Path(".")) -> Scenario:
    doc = validate_document(doc)
    base = sim_config_from(doc, base_dir)
    scen = Scenario(name=doc["name"], base=base, sweep=doc["sweep"], outputs=resolve_output(doc["outputs"]),
                    snapshot_times=[float(t) for t in doc["snapshot_times"]], expect=doc["expect"],
                    workers=doc["workers"], report=doc["report"], document=doc)
    scen.children()  # range-check every sweep point up front
    if any(t > base.t_end for t in scen.snapshot_times):
        raise ConfigurationError("snapshot times must not exceed t_end", key="snapshot_times")
    return scen


def parse_config(path) -> Scenario:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"config file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"invalid JSON: {exc}", key=str(path)) from exc
    return scenario_from_document(doc, path.parent)
