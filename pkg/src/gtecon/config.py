"""Run configuration: YAML file plus command-line overrides."""

from __future__ import annotations

import copy
import hashlib
import math
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Any

import yaml

from .econ import CostParams
from .harness import ScenarioConfig
from .ingest import (
    EmpiricalIncomeDistribution,
    IncidenceFormat,
    IncomeFormat,
    PrevalencePoint,
    income_distributions,
    load_incidence_csv,
    load_income_csv,
    prevalence_series,
    synthesize_incomes,
)


class ConfigError(ValueError):
    pass


DEFAULTS: dict[str, Any] = {
    "n": 1000,
    "n_sim": 25,
    "algorithms": [1, 2, 3, 4, 5],
    "duration_days": 14,
    "s_max": 256,
    "strict_nesting": True,
    "common_random_numbers": False,
    "costs": {"c_f": 10000, "c_v": 150, "c_l": 300, "tau0": 750, "h": 0.5, "stage_days": 1},
    "format": "csv",
}

SYNTHETIC_DEFAULTS = {"count": 20000, "median": 100.0, "scale": 0.6}


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _as_date(value, key: str) -> date | None:
    if value is None or isinstance(value, date):
        return value
    try:
        return date.fromisoformat(str(value))
    except ValueError as exc:
        raise ConfigError(f"{key}: not an ISO date: {value!r}") from exc


@dataclass
class RunConfig:
    """Resolved configuration; ``raw`` is the merged mapping written to the manifest."""

    raw: dict
    base_dir: Path

    @classmethod
    def load(cls, path, overrides: dict | None = None) -> RunConfig:
        path = Path(path)
        try:
            data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        return cls.from_dict(data, path.parent, overrides)

    @classmethod
    def from_dict(cls, data: dict, base_dir=".", overrides: dict | None = None) -> RunConfig:
        raw = _merge(DEFAULTS, data)
        raw = _merge(raw, {k: v for k, v in (overrides or {}).items() if v is not None})
        cfg = cls(raw, Path(base_dir))
        cfg._validate()
        return cfg

    def _validate(self) -> None:
        raw = self.raw
        if "seed" not in raw or raw["seed"] is None:
            raise ConfigError("seed is mandatory")
        if not isinstance(raw["seed"], int) or raw["seed"] < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {raw['seed']!r}")
        if "incidence" not in raw or "path" not in (raw["incidence"] or {}):
            raise ConfigError("incidence.path is required")
        has_csv = "income" in raw and raw["income"] is not None
        has_synth = "synthetic_income" in raw and raw["synthetic_income"] is not None
        if has_csv == has_synth:
            raise ConfigError("exactly one of 'income' (CSV) or 'synthetic_income' must be given")
        if raw["format"] not in ("csv", "json"):
            raise ConfigError(f"format must be csv or json, got {raw['format']!r}")
        if not raw.get("locations"):
            raise ConfigError("locations must list at least one district id")
        raw["locations"] = [str(loc) for loc in raw["locations"]]
        self.scenario()

    def path(self, value) -> Path:
        p = Path(value)
        return p if p.is_absolute() else self.base_dir / p

    def cost_params(self) -> CostParams:
        try:
            return CostParams(**self.raw["costs"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"costs: {exc}") from exc

    def scenario(self, threads: int = 1) -> ScenarioConfig:
        raw = self.raw
        try:
            return ScenarioConfig(
                locations=tuple(raw["locations"]),
                algorithms=tuple(raw["algorithms"]),
                cost_params=self.cost_params(),
                n=int(raw["n"]),
                n_sim=int(raw["n_sim"]),
                duration_days=float(raw["duration_days"]),
                seed=int(raw["seed"]),
                s_max=int(raw["s_max"]),
                strict_nesting=bool(raw["strict_nesting"]),
                common_random_numbers=bool(raw["common_random_numbers"]),
                threads=threads,
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def input_files(self) -> list[Path]:
        files = [self.path(self.raw["incidence"]["path"])]
        if self.raw.get("income"):
            files.append(self.path(self.raw["income"]["path"]))
        return files

    def load_prevalence(self) -> list[PrevalencePoint]:
        block = self.raw["incidence"]
        cols = block.get("columns", {}) or {}
        try:
            fmt = IncidenceFormat(
                **cols,
                locations=tuple(self.raw["locations"]),
                start=_as_date(block.get("start"), "incidence.start"),
                end=_as_date(block.get("end"), "incidence.end"),
            )
        except TypeError as exc:
            raise ConfigError(f"incidence.columns: {exc}") from exc
        records, _ = load_incidence_csv(self.path(block["path"]), fmt)
        return prevalence_series(records, float(self.raw["duration_days"]))

    def load_incomes(self) -> dict[str, EmpiricalIncomeDistribution]:
        locations = self.raw["locations"]
        if self.raw.get("income"):
            block = self.raw["income"]
            try:
                fmt = IncomeFormat(**(block.get("columns", {}) or {}),
                                   years=tuple(block.get("years", (2019, 2021))))
            except TypeError as exc:
                raise ConfigError(f"income.columns: {exc}") from exc
            records, _ = load_income_csv(self.path(block["path"]), fmt)
            by_region = income_distributions(records, block.get("rule", "hours"))
            regions = {str(k): str(v) for k, v in (block.get("regions") or {}).items()}
            out = {}
            for loc in locations:
                region = regions.get(loc, loc)
                if region in by_region:
                    out[loc] = EmpiricalIncomeDistribution(loc, by_region[region].daily_incomes)
            return out
        block = _merge(SYNTHETIC_DEFAULTS, self.raw["synthetic_income"])
        per_location = block.pop("per_location", {}) or {}
        seed = block.pop("seed", self.raw["seed"])
        out = {}
        for i, loc in enumerate(locations):
            opts = _merge(block, per_location.get(loc, {}) or {})
            location = opts["location"] if "location" in opts else math.log(float(opts["median"]))
            try:
                out[loc] = synthesize_incomes(loc, int(opts["count"]), location, float(opts["scale"]), seed + i)
            except ValueError as exc:
                raise ConfigError(f"synthetic_income: {exc}") from exc
        return out

    def manifest(self, command: str, outputs: list[str]) -> dict:
        from . import __version__

        inputs = {}
        for f in self.input_files():
            inputs[str(f)] = sha256(f) if f.exists() else None
        return {
            "tool": "gtecon",
            "version": __version__,
            "command": command,
            "seed": self.raw["seed"],
            "config": _jsonable(self.raw),
            "inputs": inputs,
            "outputs": sorted(outputs),
        }


def column_maps(path) -> tuple[dict, dict]:
    """Incidence and income column mappings (plus income year window) from a config file."""
    try:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    incidence = dict((data.get("incidence") or {}).get("columns") or {})
    income_block = data.get("income") or {}
    income = dict(income_block.get("columns") or {})
    if "years" in income_block:
        income["years"] = tuple(income_block["years"])
    return incidence, income


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, date):
        return value.isoformat()
    return value
