"""Run configuration loaded from YAML (JSON works too, being a YAML subset).

Hyperparameters sit at the top level under their usual names::

    suite: suite.jsonl
    method: repot
    out: traces.jsonl
    seed: 0
    parallel: 4
    R: 1
    T: 4
    k: 8
    temperature: 0.0
    max_output_tokens: 16384
    reasoning_level: none
    phi_threshold: 0.15
    backend:
      kind: scripted        # or remote (REPOT_API_BASE / REPOT_API_KEY / REPOT_MODEL)
      script: responses.jsonl
      model_name: my-model
    sandbox:
      interpreter: python3
      wall_ms: 10000
      mem_bytes: 1073741824
    derail:
      cases: cases.jsonl    # optional; generated from the suite when absent
      conditions: [no_feedback, repot_full]
      per_problem: 1
      total: 550
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import yaml


class ConfigError(ValueError):
    pass


@dataclass
class BackendConfig:
    kind: str = "scripted"
    script: str | None = None
    model_name: str = ""
    api_base: str | None = None
    retries: int = 3
    timeout_s: float = 600.0


@dataclass
class SandboxConfig:
    interpreter: str = "python3"
    wall_ms: int = 10_000
    mem_bytes: int = 1 << 30
    max_concurrent: int = 4


@dataclass
class DerailConfig:
    cases: str | None = None
    conditions: list[str] | None = None
    per_problem: int = 1
    total: int | None = None
    stateguard_budget: int | None = None


@dataclass
class RunConfig:
    suite: str | None = None
    method: str = "repot"
    out: str | None = None
    seed: int = 0
    parallel: int = 1
    R: int = 1
    T: int = 4
    k: int = 8
    K: int | None = None
    temperature: float = 0.0
    sc_temperature: float | None = None
    max_output_tokens: int = 16384
    reasoning_level: str = "none"
    phi_threshold: float = 0.15
    backend: BackendConfig = field(default_factory=BackendConfig)
    sandbox: SandboxConfig = field(default_factory=SandboxConfig)
    derail: DerailConfig = field(default_factory=DerailConfig)

    def to_json(self) -> dict:
        return asdict(self)

    def validate(self) -> None:
        from .methods import METHODS

        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; valid methods: {', '.join(METHODS)}")
        try:
            self.method_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.temperature < 0:
            raise ConfigError("temperature must be >= 0")
        if self.max_output_tokens <= 0:
            raise ConfigError("max_output_tokens must be positive")
        if self.reasoning_level not in ("none", "medium"):
            raise ConfigError("reasoning_level must be 'none' or 'medium'")
        if self.parallel < 1:
            raise ConfigError("parallel must be >= 1")
        if self.backend.kind not in ("scripted", "remote"):
            raise ConfigError(f"backend.kind must be 'scripted' or 'remote', got {self.backend.kind!r}")

    def method_config(self):
        from .methods import MethodConfig

        return MethodConfig(self.method, self.R, self.T, self.k, self.phi_threshold, self.K)


_SECTIONS = {"backend": BackendConfig, "sandbox": SandboxConfig, "derail": DerailConfig}


def _build(cls, data: dict, where: str):
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")
    return data


def config_from_dict(data: dict | None) -> RunConfig:
    data = dict(data or {})
    _build(RunConfig, data, "config")
    kwargs: dict[str, Any] = {}
    for key, value in data.items():
        if key in _SECTIONS:
            if value is None:
                continue
            if not isinstance(value, dict):
                raise ConfigError(f"{key} must be a mapping")
            kwargs[key] = _SECTIONS[key](**_build(_SECTIONS[key], value, key))
        else:
            kwargs[key] = value
    try:
        return RunConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        data = yaml.safe_load(p.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"{p}: invalid YAML: {exc}") from None
    if data is not None and not isinstance(data, dict):
        raise ConfigError(f"{p}: top level must be a mapping")
    return config_from_dict(data)


def with_overrides(config: RunConfig, **overrides: Any) -> RunConfig:
    """Apply non-None overrides; ``backend``/``script`` keys go to the backend section."""
    top = {}
    backend = {}
    for key, value in overrides.items():
        if value is None:
            continue
        if key == "backend":
            backend["kind"] = value
        elif key == "script":
            backend["script"] = value
        else:
            top[key] = value
    cfg = replace(config, **top)
    if backend:
        cfg = replace(cfg, backend=replace(cfg.backend, **backend))
    return cfg
