"""Simulation configuration: YAML file validated by a strict pydantic model."""

from __future__ import annotations

from pathlib import Path
from typing import Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError

Scenario = Literal["decouple", "multiuser", "coexist", "ttd", "frames", "sweep"]


class SimulationConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    scenario: Scenario = "decouple"
    n_nb: int = Field(4, ge=1)
    m_ris: int = Field(16, ge=1)
    n_ue: int = Field(4, ge=1)
    n_users: int = Field(1, ge=1)
    snr_db: list[float] = Field(default_factory=lambda: [10.0], min_length=1)
    trial_count: int = Field(10, ge=1)
    seed: int = Field(0, ge=0, lt=2**64)
    rician_k: float = Field(0.0, ge=0)
    direct_path: bool = True
    constraint: Literal["ideal", "unit-modulus", "quantized"] = "unit-modulus"
    bits: int = Field(1, ge=1, le=8)
    streams: Optional[int] = Field(None, ge=1)

    # coexistence
    mechanism: Literal["blocking", "filter"] = "blocking"
    partition: Literal["contiguous", "interleaved"] = "contiguous"
    beta_grid: list[float] = Field(default_factory=lambda: [round(0.1 * i, 1) for i in range(11)], min_length=1)

    # ttd
    carrier_hz: float = Field(28e9, gt=0)
    subband_gap_hz: float = Field(100e6, gt=0)
    subcarriers_per_band: int = Field(9, ge=1)
    subcarrier_spacing_hz: float = Field(1e6, gt=0)
    n_cp: int = Field(64, ge=1)
    sample_period_s: float = Field(1e-9, gt=0)
    group_k: int = Field(1, ge=1)
    tau_bits_grid: list[int] = Field(default_factory=lambda: [1, 2, 3])
    phi_bits_grid: list[int] = Field(default_factory=lambda: [1, 2, 3])
    tau_max_s: float = Field(10e-9, gt=0)

    # frames
    spread_k: list[int] = Field(default_factory=lambda: [1, 2, 4, 8], min_length=1)
    n_bits: int = Field(1000, ge=1)
    pilot_slots: int = Field(1, ge=1)
    silent_slots: int = Field(0, ge=0)
    bits_per_frame: int = Field(8, ge=1)

    deployment_mode: Literal["network-controlled", "standalone"] = "network-controlled"
    out_dir: str = "results"
    format: Literal["csv", "json"] = "csv"
    per_trial: bool = False

    @field_validator("snr_db")
    @classmethod
    def _finite(cls, v):
        if any(x != x or x in (float("inf"), float("-inf")) for x in v):
            raise ValueError("snr_db entries must be finite")
        return v

    @field_validator("beta_grid")
    @classmethod
    def _unit_interval(cls, v):
        if any(not 0.0 <= b <= 1.0 for b in v):
            raise ValueError("beta_grid entries must lie in [0, 1]")
        return v

    @field_validator("spread_k", "tau_bits_grid", "phi_bits_grid")
    @classmethod
    def _positive(cls, v):
        if any(k < 1 for k in v):
            raise ValueError("entries must be >= 1")
        return v

    @model_validator(mode="after")
    def _groups(self):
        if self.m_ris % self.group_k:
            raise ValueError(f"m_ris ({self.m_ris}) must be divisible by group_k ({self.group_k})")
        return self

    def dump(self) -> str:
        return yaml.safe_dump(self.model_dump(mode="json"), sort_keys=True)


def parse_config(text: str, source: str = "<string>", **overrides) -> SimulationConfig:
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"{source}: parse error{where}: {getattr(exc, 'problem', exc)}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return SimulationConfig(**data)
    except ValidationError as exc:
        err = exc.errors()[0]
        field = ".".join(str(p) for p in err["loc"]) or "<root>"
        raise ConfigError(f"{source}: invalid field '{field}': {err['msg']}") from exc


def load_config(path: str | Path, **overrides) -> SimulationConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    return parse_config(text, str(path), **overrides)
