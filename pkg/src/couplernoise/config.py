"""Run configuration documents.

A configuration is a JSON object with these sections (all optional except
where a command needs them)::

    {
      "device":   {DeviceParams fields},
      "noise":    {NoiseModel fields, fluctuators as {"lambda", "gamma", ...}},
      "sequence": {SequenceSpec fields, "pulse": {GatePulse fields}},
      "engine":   {"mode": "mc" | "lindblad" | "averaged", "n_traj", "seed",
                   "shots", "workers", "profile", "substeps"},
      "scan":     {"parameter": "sequence.pulse.g_max", "values": [...]},
      "fit":      {"kind": "cpmg_family" | "g_scaling" | "ramsey_gaussian",
                   "curves": [paths], "model": {FitModel fields}}
    }

Every unit is us, 1/us or rad/us.  Unknown keys are rejected so that typos
do not silently fall back to defaults.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field

from .device import DeviceParams
from .fitting import FitModel
from .noise import NoiseModel
from .sequences import SequenceSpec

__all__ = ["ConfigError", "EngineOptions", "RunConfig", "load_config", "set_path"]

ENGINE_MODES = ("mc", "lindblad", "averaged")
FIT_KINDS = ("cpmg_family", "g_scaling", "ramsey_gaussian")


class ConfigError(ValueError):
    """Schema violation; ``where`` names the offending field or line."""

    def __init__(self, message: str, where: str = ""):
        super().__init__(f"{where}: {message}" if where else message)
        self.where = where


@dataclass(frozen=True)
class EngineOptions:
    mode: str = "mc"
    n_traj: int = 10_000
    seed: int = 0
    shots: int | None = None
    workers: int = 1
    profile: str = "pulse"
    substeps: int = 40

    def __post_init__(self):
        if self.mode not in ENGINE_MODES:
            raise ConfigError(f"mode must be one of {ENGINE_MODES}, got {self.mode!r}", "engine.mode")
        if self.n_traj < 1:
            raise ConfigError("n_traj must be >= 1", "engine.n_traj")
        if self.seed < 0:
            raise ConfigError("seed must be >= 0", "engine.seed")
        if self.shots is not None and self.shots < 1:
            raise ConfigError("shots must be >= 1", "engine.shots")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1", "engine.workers")
        if self.profile not in ("pulse", "constant"):
            raise ConfigError("profile must be 'pulse' or 'constant'", "engine.profile")
        if self.substeps < 1:
            raise ConfigError("substeps must be >= 1", "engine.substeps")

    def to_dict(self) -> dict:
        return {"mode": self.mode, "n_traj": self.n_traj, "seed": self.seed, "shots": self.shots,
                "workers": self.workers, "profile": self.profile, "substeps": self.substeps}


@dataclass(frozen=True)
class RunConfig:
    device: DeviceParams = field(default_factory=DeviceParams)
    noise: NoiseModel = field(default_factory=NoiseModel)
    sequence: SequenceSpec = field(default_factory=SequenceSpec)
    engine: EngineOptions = field(default_factory=EngineOptions)
    scan: dict | None = None
    fit: dict | None = None

    def to_dict(self) -> dict:
        d = {"device": self.device.to_dict(), "noise": self.noise.to_dict(),
             "sequence": self.sequence.to_dict(), "engine": self.engine.to_dict()}
        if self.scan is not None:
            d["scan"] = copy.deepcopy(self.scan)
        if self.fit is not None:
            d["fit"] = copy.deepcopy(self.fit)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError("configuration must be a JSON object")
        unknown = set(d) - {"device", "noise", "sequence", "engine", "scan", "fit", "command"}
        if unknown:
            raise ConfigError(f"unknown section(s) {sorted(unknown)}")
        kw = {}
        for key, parser in (("device", DeviceParams.from_dict), ("noise", NoiseModel.from_dict),
                            ("sequence", SequenceSpec.from_dict), ("engine", _engine_from_dict)):
            if key in d:
                kw[key] = _section(key, d[key], parser)
        if "scan" in d:
            kw["scan"] = _check_scan(d["scan"])
        if "fit" in d:
            kw["fit"] = _check_fit(d["fit"])
        return cls(**kw)

    def with_overrides(self, seed: int | None = None, n_traj: int | None = None,
                       shots: int | None = None) -> "RunConfig":
        e = self.engine.to_dict()
        if seed is not None:
            e["seed"] = seed
        if n_traj is not None:
            e["n_traj"] = n_traj
        if shots is not None:
            e["shots"] = shots
        d = self.to_dict()
        d["engine"] = e
        return RunConfig.from_dict(d)


def _section(key: str, value, parser):
    if not isinstance(value, dict):
        raise ConfigError("must be an object", key)
    try:
        return parser(value)
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(str(exc), key) from None


def _engine_from_dict(d: dict) -> EngineOptions:
    unknown = set(d) - {"mode", "n_traj", "seed", "shots", "workers", "profile", "substeps"}
    if unknown:
        raise ConfigError(f"unknown field(s) {sorted(unknown)}", "engine")
    kw = dict(d)
    for k in ("n_traj", "seed", "workers", "substeps"):
        if k in kw:
            kw[k] = _as_int(kw[k], k)
    if kw.get("shots") is not None:
        kw["shots"] = _as_int(kw["shots"], "shots")
    return EngineOptions(**kw)


def _as_int(v, name: str) -> int:
    if isinstance(v, bool) or not (isinstance(v, int) or (isinstance(v, float) and v.is_integer())):
        raise ConfigError(f"must be an integer, got {v!r}", f"engine.{name}")
    return int(v)


def _check_scan(s) -> dict:
    if not isinstance(s, dict) or set(s) - {"parameter", "values"} or "parameter" not in s:
        raise ConfigError("needs exactly 'parameter' and 'values'", "scan")
    vals = s.get("values")
    if not isinstance(vals, list) or not vals:
        raise ConfigError("values must be a non-empty list", "scan.values")
    if not isinstance(s["parameter"], str) or s["parameter"].split(".")[0] not in (
            "device", "noise", "sequence", "engine"):
        raise ConfigError("parameter must be a dotted path into device/noise/sequence/engine",
                          "scan.parameter")
    return {"parameter": s["parameter"], "values": list(vals)}


def _check_fit(f) -> dict:
    if not isinstance(f, dict) or set(f) - {"kind", "curves", "model"}:
        raise ConfigError("allowed fields are kind, curves, model", "fit")
    kind = f.get("kind", "cpmg_family")
    if kind not in FIT_KINDS:
        raise ConfigError(f"kind must be one of {FIT_KINDS}", "fit.kind")
    curves = f.get("curves", [])
    if not isinstance(curves, list) or not all(isinstance(c, str) for c in curves):
        raise ConfigError("curves must be a list of file paths", "fit.curves")
    model = f.get("model", {})
    try:
        FitModel.from_dict(model)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), "fit.model") from None
    return {"kind": kind, "curves": list(curves), "model": dict(model)}


def set_path(d: dict, path: str, value) -> dict:
    """Copy of ``d`` with the dotted ``path`` set to ``value``.

    Integer components index lists, e.g. ``noise.fluctuators.0.lambda``.
    """
    out = copy.deepcopy(d)
    keys = path.split(".")
    node = out
    for k in keys[:-1]:
        if isinstance(node, list):
            node = node[int(k)]
        else:
            if k not in node:
                raise ConfigError(f"no field {k!r}", path)
            node = node[k]
    last = keys[-1]
    if isinstance(node, list):
        node[int(last)] = value
    else:
        if last not in node:
            raise ConfigError(f"no field {last!r}", path)
        node[last] = value
    return out


def load_config(text: str) -> RunConfig:
    """Parse a JSON document; syntax errors report line and column.

    An output sidecar (which wraps the resolved configuration under
    ``"config"``) is accepted too, so any output can be regenerated.
    """
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(exc.msg, f"line {exc.lineno} column {exc.colno}") from None
    if isinstance(d, dict) and "config" in d and "version" in d:
        d = d["config"]
    return RunConfig.from_dict(d)
