"""Hybrid Monte Carlo study over prevalence series, algorithms and cost settings.

For every (location, date, k) the pool sizes are optimized at that
prevalence, ``n_sim`` populations are drawn (infections plus incomes
resampled from the location's empirical distribution), each is run through
the k-stage algorithm and costed.  Replication ``r`` of a point draws from
its own RNG, seeded from ``(seed, location, date, k, r)``, so results do not
depend on execution order or thread count.
"""

from __future__ import annotations

import logging
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import date
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import PoolPlan, draw_population, simulate
from .econ import BASELINE, CostBreakdown, CostParams, economic_cost
from .ingest import EmpiricalIncomeDistribution, PrevalencePoint
from .optimize import OptimizationRequest, optimize_pool_sizes, zero_prevalence_plan

log = logging.getLogger(__name__)

SWEEPABLE = ("c_v", "n", "h", "tau0")

# One-at-a-time value sets of the reference experiments.
TABLE1 = {
    "c_v": (0, 50, 100, 150, 300, 400, 800, 1000, 2000),
    "n": (150, 250, 500, 1000, 5000, 10000),
    "h": (0, 0.4, 0.5, 0.8, 0.9, 1),
    "tau0": (0, 50, 100, 250, 750, 1000),
}


@dataclass(frozen=True)
class ScenarioConfig:
    locations: tuple[str, ...]
    algorithms: tuple[int, ...] = (1, 2, 3, 4, 5)
    cost_params: CostParams = BASELINE
    n: int = 1000
    n_sim: int = 25
    duration_days: float = 14.0
    seed: int = 0
    s_max: int = 256
    strict_nesting: bool = True
    # share infection/income draws across algorithms at the same point
    common_random_numbers: bool = False
    threads: int = 1

    def __post_init__(self):
        object.__setattr__(self, "locations", tuple(self.locations))
        object.__setattr__(self, "algorithms", tuple(sorted(set(int(k) for k in self.algorithms))))
        if not self.locations:
            raise ValueError("at least one location is required")
        if not self.algorithms or any(k < 1 for k in self.algorithms):
            raise ValueError(f"algorithms must be stage counts >= 1, got {self.algorithms}")
        if self.n_sim < 1:
            raise ValueError(f"n_sim must be >= 1, got {self.n_sim}")
        if self.n < 1:
            raise ValueError(f"population size must be >= 1, got {self.n}")
        if self.duration_days <= 0:
            raise ValueError(f"duration must be > 0, got {self.duration_days}")
        if self.threads < 1:
            raise ValueError(f"threads must be >= 1, got {self.threads}")


@dataclass(frozen=True)
class Ledger:
    """Per-replication test counts and quarantine income sums at one point."""

    location: str
    date: date
    prevalence: float
    plan: PoolPlan
    tests: np.ndarray = field(repr=False)
    stage_sums: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class ScenarioResult:
    location: str
    date: date
    prevalence: float
    k: int
    plan: PoolPlan
    n: int
    mean_eci: float
    min_eci: float
    max_eci: float
    range_per_individual: float
    mean_total_tests: float
    costs: tuple[float, ...] = field(repr=False)
    breakdowns: tuple[CostBreakdown, ...] = field(repr=False)

    @property
    def mean_economic_loss(self) -> float:
        """Mean quarantine income loss per individual."""
        return float(np.mean([b.economic_loss for b in self.breakdowns])) / self.n

    def to_row(self) -> dict:
        sizes = self.plan.pool_sizes
        row = {
            "location": self.location,
            "date": self.date.isoformat(),
            "prevalence": self.prevalence,
            "k": self.k,
        }
        row.update({f"s{i}": (sizes[i - 1] if i <= len(sizes) else "") for i in range(1, 5)})
        row.update({
            "mean_eci": self.mean_eci,
            "min_eci": self.min_eci,
            "max_eci": self.max_eci,
            "range": self.range_per_individual,
            "mean_tests": self.mean_total_tests,
            "economic_loss": self.mean_economic_loss,
            "n_sim": len(self.costs),
        })
        return row


@dataclass(frozen=True)
class OptimalChoice:
    location: str
    date: date
    prevalence: float
    k: int
    mean_eci: float

    def to_row(self) -> dict:
        return {"location": self.location, "date": self.date.isoformat(), "prevalence": self.prevalence,
                "k": self.k, "mean_eci": self.mean_eci}


class PlanCache:
    """Optimal plans per (k, p); the optimizer is deterministic in both."""

    def __init__(self, s_max: int = 256, strict_nesting: bool = True):
        self.s_max = s_max
        self.strict_nesting = strict_nesting
        self._plans: dict[tuple[int, float], PoolPlan] = {}

    def __call__(self, k: int, p: float) -> PoolPlan:
        key = (k, p)
        if key not in self._plans:
            if k == 1:
                plan = PoolPlan.individual()
            elif p == 0:
                plan = zero_prevalence_plan(k, self.s_max, self.strict_nesting)
            else:
                req = OptimizationRequest(k, p, s_max=self.s_max, strict_nesting=self.strict_nesting)
                plan = optimize_pool_sizes(req, fallback=True).plan
            self._plans[key] = plan
        return self._plans[key]


def _location_key(location: str) -> int:
    return zlib.crc32(location.encode("utf-8"))


def replication_rng(seed: int, location: str, day: date, k: int, r: int) -> np.random.Generator:
    """Independent generator for one replication; ``k=0`` shares draws across algorithms."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(_location_key(location), day.toordinal(), k, r))
    return np.random.default_rng(ss)


def _group_points(config: ScenarioConfig, points: Iterable[PrevalencePoint]) -> list[PrevalencePoint]:
    by_loc: dict[str, dict[date, PrevalencePoint]] = {loc: {} for loc in config.locations}
    for pt in points:
        if pt.location_id in by_loc:
            by_loc[pt.location_id][pt.date] = pt
    out = []
    for loc, series in by_loc.items():
        if not series:
            raise ValueError(f"no prevalence data for location {loc!r}")
        out.extend(series[d] for d in sorted(series))
    return out


def _check_incomes(config: ScenarioConfig, incomes: Mapping[str, EmpiricalIncomeDistribution]) -> None:
    missing = [loc for loc in config.locations if loc not in incomes]
    if missing:
        raise ValueError(f"no income distribution for location(s) {', '.join(missing)}")


def _replicate(config: ScenarioConfig, pt: PrevalencePoint, k: int, plan: PoolPlan,
               incomes: EmpiricalIncomeDistribution) -> Ledger:
    tests = np.empty(config.n_sim, dtype=np.int64)
    sums = np.empty((config.n_sim, k))
    stream_k = 0 if config.common_random_numbers else k
    for r in range(config.n_sim):
        rng = replication_rng(config.seed, pt.location_id, pt.date, stream_k, r)
        pop = draw_population(config.n, pt.prevalence, incomes, rng)
        outcome = simulate(plan, pop, rng)
        tests[r] = outcome.total_tests
        sums[r] = outcome.stage_income_sums
    return Ledger(pt.location_id, pt.date, pt.prevalence, plan, tests, sums)


def simulate_points(config: ScenarioConfig, prevalence: Iterable[PrevalencePoint],
                    incomes: Mapping[str, EmpiricalIncomeDistribution],
                    plans: PlanCache | None = None) -> list[Ledger]:
    """Replication ledgers for every (location, date, k), in that order."""
    _check_incomes(config, incomes)
    points = _group_points(config, prevalence)
    plans = plans or PlanCache(config.s_max, config.strict_nesting)
    tasks = [(pt, k, plans(k, pt.prevalence)) for pt in points for k in config.algorithms]

    def run(task):
        pt, k, plan = task
        return _replicate(config, pt, k, plan, incomes[pt.location_id])

    if config.threads == 1:
        return [run(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=config.threads) as pool:
        return list(pool.map(run, tasks))


def cost_ledgers(ledgers: Sequence[Ledger], params: CostParams, n: int) -> list[ScenarioResult]:
    results = []
    for led in ledgers:
        breakdowns = tuple(economic_cost(int(t), s, params) for t, s in zip(led.tests, led.stage_sums))
        costs = np.array([b.total for b in breakdowns])
        per_person = costs / n
        results.append(ScenarioResult(
            location=led.location,
            date=led.date,
            prevalence=led.prevalence,
            k=led.plan.stages,
            plan=led.plan,
            n=n,
            # mean of identical costs can drift an ulp outside [min, max]
            mean_eci=min(max(float(costs.mean()) / n, float(per_person.min())), float(per_person.max())),
            min_eci=float(per_person.min()),
            max_eci=float(per_person.max()),
            range_per_individual=float(per_person.max() - per_person.min()),
            mean_total_tests=float(led.tests.mean()),
            costs=tuple(float(c) for c in costs),
            breakdowns=breakdowns,
        ))
    return results


def run_scenario(config: ScenarioConfig, prevalence: Iterable[PrevalencePoint],
                 incomes: Mapping[str, EmpiricalIncomeDistribution]) -> list[ScenarioResult]:
    """Simulate and cost every (location, date, k) of the configuration."""
    ledgers = simulate_points(config, prevalence, incomes)
    return cost_ledgers(ledgers, config.cost_params, config.n)


def _with_value(config: ScenarioConfig, parameter: str, value) -> ScenarioConfig:
    if parameter == "n":
        return replace(config, n=int(value))
    if parameter == "tau0":
        value = int(value)
    return replace(config, cost_params=config.cost_params.with_(**{parameter: value}))


def baseline_value(config: ScenarioConfig, parameter: str):
    return config.n if parameter == "n" else getattr(config.cost_params, parameter)


def sweep(config: ScenarioConfig, parameter: str, values: Sequence, prevalence: Iterable[PrevalencePoint],
          incomes: Mapping[str, EmpiricalIncomeDistribution]) -> list[tuple[float, list[ScenarioResult]]]:
    """One-at-a-time sweep of ``parameter``; the baseline value is always included.

    Cost-only parameters reuse one set of simulated ledgers, so every value
    is evaluated on the same draws.
    """
    if parameter not in SWEEPABLE:
        raise ValueError(f"unknown sweep parameter {parameter!r}; choose one of {', '.join(SWEEPABLE)}")
    if len(values) == 0:
        raise ValueError("sweep needs at least one value")
    base = baseline_value(config, parameter)
    grid = sorted(set(values) | {base})
    prevalence = list(prevalence)
    out = []
    if parameter == "n":
        plans = PlanCache(config.s_max, config.strict_nesting)
        for value in grid:
            cfg = _with_value(config, parameter, value)
            out.append((value, cost_ledgers(simulate_points(cfg, prevalence, incomes, plans),
                                            cfg.cost_params, cfg.n)))
        return out
    ledgers = simulate_points(config, prevalence, incomes)
    for value in grid:
        cfg = _with_value(config, parameter, value)
        out.append((value, cost_ledgers(ledgers, cfg.cost_params, cfg.n)))
    return out


def optimal_choice(results: Iterable[ScenarioResult]) -> list[OptimalChoice]:
    """Algorithm with the lowest mean ECI per (location, date); ties go to fewer stages."""
    best: dict[tuple[str, date], ScenarioResult] = {}
    for res in results:
        key = (res.location, res.date)
        cur = best.get(key)
        if cur is None or (res.mean_eci, res.k) < (cur.mean_eci, cur.k):
            best[key] = res
    return [OptimalChoice(r.location, r.date, r.prevalence, r.k, r.mean_eci)
            for _, r in sorted(best.items())]
