"""Config and scenario (de)serialization.

Everything on disk is JSON: one document can carry a full simulation config,
a muscle description, a scenario script, or a run file combining a scenario
with config tweaks. Validation failures carry the offending field path so a
bad file points at its own problem.

Run file layout (all sections optional except the scenario):

    {
      "scenario": "kick" | {scenario document},
      "config":   {config document},
      "overrides": {"adaptation.K_adapt": 0.01}
    }

A bare scenario document (has "name" and "duration" at top level) is also
accepted directly.
"""

from __future__ import annotations

import dataclasses
import json
from typing import Any, Dict, Optional, Tuple

import numpy as np

from .balance import AdaptationConfig, YawGain
from .muscle import MuscleConfig, default_muscle_config
from .plant import ArmModel, Disturbance, PlantParams
from .riccati import LqrWeights
from .runner import SimConfig
from .scenarios import DeskParams, Envelope, ScenarioSpec, TimedArmPose, TimedCommand

__all__ = [
    "config_from_dict",
    "config_to_dict",
    "default_config_dict",
    "muscle_config_from_dict",
    "muscle_config_to_dict",
    "load_muscle_config",
    "scenario_from_dict",
    "scenario_to_dict",
    "load_run_file",
    "parse_override",
]


def _build(cls, doc: Dict[str, Any], path: str):
    """Instantiate a dataclass from a dict with path-prefixed errors."""
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: expected an object")
    names = [f.name for f in dataclasses.fields(cls)]
    kwargs = {}
    for key, value in doc.items():
        if key not in names:
            raise ValueError(f"{path}.{key}: unknown field")
        if isinstance(value, list):
            value = tuple(tuple(v) if isinstance(v, list) else v for v in value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (ValueError, TypeError) as err:
        raise ValueError(f"{path}: {err}") from err


_SECTIONS = {
    "plant": PlantParams,
    "arm": ArmModel,
    "weights": LqrWeights,
    "yaw": YawGain,
    "adaptation": AdaptationConfig,
}


def config_from_dict(doc: Dict[str, Any]) -> SimConfig:
    """Build a SimConfig from its JSON document form."""
    if not isinstance(doc, dict):
        raise ValueError("config: expected an object")
    kwargs: Dict[str, Any] = {}
    scalar_names = {f.name for f in dataclasses.fields(SimConfig)} - set(_SECTIONS) - {"muscle"}
    for key, value in doc.items():
        if key in _SECTIONS:
            kwargs[key] = _build(_SECTIONS[key], value, key)
        elif key == "muscle":
            kwargs[key] = muscle_config_from_dict(value, path="muscle")
        elif key in scalar_names:
            kwargs[key] = value
        else:
            raise ValueError(f"{key}: unknown config field")
    try:
        return SimConfig(**kwargs)
    except (ValueError, TypeError) as err:
        raise ValueError(str(err)) from err


def config_to_dict(cfg: SimConfig) -> Dict[str, Any]:
    doc: Dict[str, Any] = {}
    for name, cls in _SECTIONS.items():
        section = getattr(cfg, name)
        doc[name] = {f.name: _plain(getattr(section, f.name)) for f in dataclasses.fields(cls)}
    doc["muscle"] = muscle_config_to_dict(cfg.muscle)
    for f in dataclasses.fields(SimConfig):
        if f.name not in doc:
            doc[f.name] = _plain(getattr(cfg, f.name))
    return doc


def _plain(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, tuple):
        return [_plain(x) for x in v]
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


def default_config_dict() -> Dict[str, Any]:
    return config_to_dict(SimConfig())


def muscle_config_from_dict(doc: Dict[str, Any], path: str = "muscle") -> MuscleConfig:
    """Muscle description: G matrix, objective weights, tension bounds,
    rest lengths, elastic constants, joint gains. Scalars broadcast."""
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: expected an object")
    return _build(MuscleConfig, doc, path)


def muscle_config_to_dict(cfg: MuscleConfig) -> Dict[str, Any]:
    return {
        "G": cfg.G.tolist(),
        "W": cfg.W.tolist(),
        "T_min": cfg.T_min.tolist(),
        "T_max": cfg.T_max.tolist(),
        "l0": cfg.l0.tolist(),
        "k_e": cfg.k_e.tolist(),
        "K_j": cfg.K_j.tolist(),
    }


def load_muscle_config(path) -> MuscleConfig:
    with open(path, "r") as fh:
        doc = json.load(fh)
    return muscle_config_from_dict(doc, path=str(path))


def scenario_from_dict(doc: Dict[str, Any]) -> ScenarioSpec:
    if not isinstance(doc, dict):
        raise ValueError("scenario: expected an object")
    known = {f.name for f in dataclasses.fields(ScenarioSpec)}
    kwargs: Dict[str, Any] = {}
    for key, value in doc.items():
        if key not in known:
            raise ValueError(f"scenario.{key}: unknown field")
        kwargs[key] = value
    for name, cls in (("commands", TimedCommand), ("arm_poses", TimedArmPose),
                      ("disturbances", Disturbance), ("envelopes", Envelope)):
        if name in kwargs:
            kwargs[name] = tuple(
                _build(cls, item, f"scenario.{name}[{i}]")
                for i, item in enumerate(kwargs[name]))
    if kwargs.get("desk") is not None:
        kwargs["desk"] = _build(DeskParams, kwargs["desk"], "scenario.desk")
    if "output_channels" in kwargs:
        kwargs["output_channels"] = tuple(kwargs["output_channels"])
    try:
        return ScenarioSpec(**kwargs)
    except (ValueError, TypeError) as err:
        raise ValueError(f"scenario: {err}") from err


def _dataclass_doc(obj, skip_defaults: bool = True) -> Dict[str, Any]:
    doc = {}
    for f in dataclasses.fields(obj):
        v = getattr(obj, f.name)
        if skip_defaults and v is None:
            continue
        doc[f.name] = _plain(v)
    return doc


def scenario_to_dict(spec: ScenarioSpec) -> Dict[str, Any]:
    doc: Dict[str, Any] = {
        "name": spec.name,
        "duration": spec.duration,
        "description": spec.description,
    }
    if spec.commands:
        doc["commands"] = [_dataclass_doc(c) for c in spec.commands]
    if spec.arm_poses:
        doc["arm_poses"] = [_dataclass_doc(a) for a in spec.arm_poses]
    if spec.disturbances:
        doc["disturbances"] = [_dataclass_doc(d, skip_defaults=False) for d in spec.disturbances]
    if spec.envelopes:
        doc["envelopes"] = [_dataclass_doc(e) for e in spec.envelopes]
    if spec.desk is not None:
        doc["desk"] = _dataclass_doc(spec.desk)
    if spec.overrides:
        doc["overrides"] = dict(spec.overrides)
    if spec.output_channels:
        doc["output_channels"] = list(spec.output_channels)
    return doc


def load_run_file(path) -> Tuple[ScenarioSpec, Optional[Dict[str, Any]], Dict[str, Any]]:
    """Read a run file; returns (scenario, config document or None, overrides).

    The scenario entry may be a builtin name or an inline document.
    """
    with open(path, "r") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: expected a JSON object")
    if "scenario" in doc:
        scen = doc["scenario"]
        config_doc = doc.get("config")
        overrides = doc.get("overrides", {})
        extra = set(doc) - {"scenario", "config", "overrides"}
        if extra:
            raise ValueError(f"{path}: unknown top-level keys {sorted(extra)}")
    elif "name" in doc and "duration" in doc:
        scen, config_doc, overrides = doc, None, {}
    else:
        raise ValueError(f"{path}: neither a run file nor a scenario document")
    if isinstance(scen, str):
        from .scenarios import scenario_by_name
        spec = scenario_by_name(scen)
    else:
        spec = scenario_from_dict(scen)
    if not isinstance(overrides, dict):
        raise ValueError(f"{path}: overrides must be an object")
    return spec, config_doc, overrides


def parse_override(text: str) -> Tuple[str, Any]:
    """CLI override "path=value"; the value parses as JSON when possible."""
    if "=" not in text:
        raise ValueError(f"override {text!r}: expected key=value")
    key, raw = text.split("=", 1)
    key = key.strip()
    if not key:
        raise ValueError(f"override {text!r}: empty key")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value
