"""Incidence and income ingestion, prevalence conversion, synthetic incomes."""

from __future__ import annotations

import csv
import json
import logging
import math
import warnings
from dataclasses import asdict, dataclass, field
from datetime import date
from pathlib import Path
from typing import Iterable

import numpy as np

log = logging.getLogger(__name__)

WEEKS_PER_MONTH = 4.345
WORKDAYS_PER_WEEK = 5
PREVALENCE_CEILING = 1.0 - 1e-9
MAX_DIAGNOSTICS = 20


class SchemaError(ValueError):
    """Input file lacks required columns or cannot be read."""


class PrevalenceClampWarning(UserWarning):
    pass


def prevalence_from_incidence(incidence_7day: float, duration_days: float = 14.0) -> float:
    """Point prevalence from a seven-day incidence per 100,000.

    New cases are assumed to arrive at a constant daily rate and to stay
    infectious for ``duration_days``.  Values at or above one are clamped
    just below one with a :class:`PrevalenceClampWarning`.
    """
    if not incidence_7day >= 0:
        raise ValueError(f"incidence must be >= 0, got {incidence_7day!r}")
    if not duration_days > 0:
        raise ValueError(f"duration must be > 0, got {duration_days!r}")
    p = incidence_7day * duration_days / 7.0 / 100000.0
    if p > PREVALENCE_CEILING:
        warnings.warn(f"prevalence {p:.4g} from incidence {incidence_7day} clamped to {PREVALENCE_CEILING}",
                      PrevalenceClampWarning, stacklevel=2)
        p = PREVALENCE_CEILING
    return p


def daily_income(monthly_gross: float, weekly_hours: float, rule: str = "hours") -> float:
    """Daily income in EUR from monthly gross income and weekly hours.

    ``rule="hours"`` divides the weekly income (monthly / 4.345) by the
    hours worked per day (weekly hours / 5).  ``rule="workdays"`` divides
    the weekly income by five working days instead.
    """
    if not monthly_gross > 0:
        raise ValueError(f"monthly income must be > 0, got {monthly_gross!r}")
    if not weekly_hours > 0:
        raise ValueError(f"weekly hours must be > 0, got {weekly_hours!r}")
    weekly = monthly_gross / WEEKS_PER_MONTH
    if rule == "hours":
        return weekly / (weekly_hours / WORKDAYS_PER_WEEK)
    if rule == "workdays":
        return weekly / WORKDAYS_PER_WEEK
    raise ValueError(f"unknown daily income rule {rule!r}")


# --- records ----------------------------------------------------------------

@dataclass(frozen=True)
class IncidenceRecord:
    location_id: str
    date: date
    incidence_7day: float


@dataclass(frozen=True)
class PrevalencePoint:
    location_id: str
    date: date
    prevalence: float


@dataclass(frozen=True)
class IncomeRecord:
    region: str
    year: int
    monthly_gross: float
    weekly_hours: float


@dataclass(frozen=True)
class EmpiricalIncomeDistribution:
    region: str
    daily_incomes: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.asarray(self.daily_incomes, dtype=float).ravel()
        if arr.size == 0:
            raise ValueError(f"income distribution for {self.region!r} is empty")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise ValueError(f"incomes for {self.region!r} must be finite and >= 0")
        arr.setflags(write=False)
        object.__setattr__(self, "daily_incomes", arr)

    def __len__(self):
        return self.daily_incomes.size

    def summary(self) -> dict:
        x = self.daily_incomes
        return {
            "region": self.region,
            "count": int(x.size),
            "mean": float(x.mean()),
            "median": float(np.median(x)),
            "sd": float(x.std(ddof=1)) if x.size > 1 else 0.0,
            "min": float(x.min()),
            "max": float(x.max()),
        }


@dataclass
class IngestReport:
    """Row accounting for one file: ``rows_in == parsed + rejected + filtered``.

    Rows superseded by a later duplicate count as filtered.
    """

    source: str = ""
    rows_in: int = 0
    parsed: int = 0
    rejected: int = 0
    filtered: int = 0
    duplicates: int = 0
    diagnostics: list[str] = field(default_factory=list)

    def diagnose(self, message: str) -> None:
        log.debug("%s: %s", self.source, message)
        if len(self.diagnostics) < MAX_DIAGNOSTICS:
            self.diagnostics.append(message)

    @property
    def balanced(self) -> bool:
        return self.rows_in == self.parsed + self.rejected + self.filtered

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


# --- CSV loading ------------------------------------------------------------

@dataclass(frozen=True)
class IncidenceFormat:
    """Column mapping for incidence files; defaults follow the RKI district layout."""

    location: str = "Landkreis_id"
    date: str = "Meldedatum"
    incidence: str = "Inzidenz_7-Tage"
    locations: tuple[str, ...] | None = None
    start: date | None = None
    end: date | None = None


@dataclass(frozen=True)
class IncomeFormat:
    region: str = "region"
    year: str = "year"
    monthly_gross: str = "monthly_gross_eur"
    weekly_hours: str = "weekly_hours"
    years: tuple[int, int] = (2019, 2021)


def _open_rows(path: Path, required: Iterable[str]):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8-sig")
    except (OSError, UnicodeDecodeError) as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from exc
    head = text.split("\n", 1)[0]
    delimiter = ";" if head.count(";") > head.count(",") else ","
    reader = csv.DictReader(text.splitlines(), delimiter=delimiter)
    header = [h.strip() for h in (reader.fieldnames or [])]
    missing = [c for c in required if c not in header]
    if missing:
        raise SchemaError(f"{path}: missing column(s) {', '.join(missing)}; found {', '.join(header) or 'none'}")
    reader.fieldnames = header
    return reader, delimiter == ";"


def _number(raw: str | None, decimal_comma: bool = False) -> float:
    if raw is None or not raw.strip():
        raise ValueError("empty value")
    raw = raw.strip()
    value = float(raw.replace(",", ".") if decimal_comma else raw)
    if not math.isfinite(value):
        raise ValueError(f"non-finite value {raw!r}")
    return value


def load_incidence_csv(path, fmt: IncidenceFormat = IncidenceFormat()) -> tuple[list[IncidenceRecord], IngestReport]:
    """Parse a seven-day incidence CSV.

    Malformed rows are rejected with a line-numbered diagnostic.  For a
    repeated (location, date) pair the last row wins.
    """
    report = IngestReport(source=str(path))
    reader, comma = _open_rows(path, (fmt.location, fmt.date, fmt.incidence))
    keep = set(fmt.locations) if fmt.locations is not None else None
    records: dict[tuple[str, date], IncidenceRecord] = {}
    for row in reader:
        report.rows_in += 1
        line = reader.line_num
        try:
            loc = (row[fmt.location] or "").strip()
            if not loc:
                raise ValueError("empty location id")
            day = date.fromisoformat((row[fmt.date] or "").strip())
            value = _number(row[fmt.incidence], comma)
            if value < 0:
                raise ValueError(f"negative incidence {value}")
        except (ValueError, TypeError) as exc:
            report.rejected += 1
            report.diagnose(f"line {line}: {exc}")
            continue
        if (keep is not None and loc not in keep) or (fmt.start and day < fmt.start) or (fmt.end and day > fmt.end):
            report.filtered += 1
            continue
        key = (loc, day)
        if key in records:
            report.filtered += 1
            report.duplicates += 1
            report.diagnose(f"line {line}: duplicate ({loc}, {day}); keeping the later row")
        records[key] = IncidenceRecord(loc, day, value)
    if report.duplicates:
        warnings.warn(f"{path}: {report.duplicates} duplicate (location, date) row(s); kept the last", stacklevel=2)
    report.parsed = len(records)
    return sorted(records.values(), key=lambda r: (r.location_id, r.date)), report


def load_income_csv(path, fmt: IncomeFormat = IncomeFormat()) -> tuple[list[IncomeRecord], IngestReport]:
    report = IngestReport(source=str(path))
    reader, comma = _open_rows(path, (fmt.region, fmt.year, fmt.monthly_gross, fmt.weekly_hours))
    lo, hi = fmt.years
    records = []
    for row in reader:
        report.rows_in += 1
        line = reader.line_num
        try:
            region = (row[fmt.region] or "").strip()
            if not region:
                raise ValueError("empty region")
            year = int(_number(row[fmt.year], comma))
            monthly = _number(row[fmt.monthly_gross], comma)
            hours = _number(row[fmt.weekly_hours], comma)
            if monthly <= 0:
                raise ValueError(f"monthly income must be > 0, got {monthly}")
            if hours <= 0:
                raise ValueError(f"weekly hours must be > 0, got {hours}")
        except (ValueError, TypeError) as exc:
            report.rejected += 1
            report.diagnose(f"line {line}: {exc}")
            continue
        if not lo <= year <= hi:
            report.filtered += 1
            continue
        records.append(IncomeRecord(region, year, monthly, hours))
    report.parsed = len(records)
    return records, report


def prevalence_series(records: Iterable[IncidenceRecord], duration_days: float = 14.0) -> list[PrevalencePoint]:
    return [PrevalencePoint(r.location_id, r.date, prevalence_from_incidence(r.incidence_7day, duration_days))
            for r in records]


def income_distributions(records: Iterable[IncomeRecord], rule: str = "hours") -> dict[str, EmpiricalIncomeDistribution]:
    """Group income records by region into empirical daily-income distributions."""
    grouped: dict[str, list[float]] = {}
    for r in records:
        grouped.setdefault(r.region, []).append(daily_income(r.monthly_gross, r.weekly_hours, rule))
    return {region: EmpiricalIncomeDistribution(region, np.array(values)) for region, values in sorted(grouped.items())}


def synthesize_incomes(region: str, count: int, location: float, scale: float, seed: int) -> EmpiricalIncomeDistribution:
    """Log-normal stand-in for survey incomes; the median is ``exp(location)``."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if not (math.isfinite(location) and math.isfinite(scale)) or scale < 0:
        raise ValueError(f"invalid log-normal parameters location={location!r}, scale={scale!r}")
    rng = np.random.default_rng(seed)
    dist = EmpiricalIncomeDistribution(region, rng.lognormal(location, scale, size=count))
    log.info("synthetic incomes %s", dist.summary())
    return dist
