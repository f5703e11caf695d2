"""Multi-stage Dorfman group testing: plans, closed-form test counts, simulation.

A plan with ``k`` stages pools individuals at stages ``1..k-1`` with sizes
``s_1 > s_2 > ... > s_{k-1}`` and retests the remaining individuals one by
one at stage ``k``.  ``k = 1`` is plain individual testing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class PlanError(ValueError):
    """Raised for pool plans that violate the nesting invariants."""


def check_prevalence(p: float) -> float:
    p = float(p)
    if not (0.0 <= p < 1.0) or math.isnan(p):
        raise ValueError(f"prevalence must lie in [0, 1), got {p!r}")
    return p


@dataclass(frozen=True)
class PoolPlan:
    """Pool sizes of a k-stage design; ``stages == len(pool_sizes) + 1``."""

    pool_sizes: tuple[int, ...] = ()

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.pool_sizes)
        if any(s != t for s, t in zip(sizes, self.pool_sizes)):
            raise PlanError(f"pool sizes must be integers, got {self.pool_sizes!r}")
        object.__setattr__(self, "pool_sizes", sizes)
        if any(s < 2 for s in sizes):
            raise PlanError(f"pool sizes must be >= 2, got {sizes}")
        if any(a <= b for a, b in zip(sizes, sizes[1:])):
            raise PlanError(f"pool sizes must be strictly decreasing, got {sizes}")

    @classmethod
    def individual(cls) -> PoolPlan:
        return cls(())

    @property
    def stages(self) -> int:
        return len(self.pool_sizes) + 1

    @property
    def nested(self) -> bool:
        """True when every pool size divides the one before it."""
        s = self.pool_sizes
        return all(a % b == 0 for a, b in zip(s, s[1:]))

    def is_ragged(self, n: int) -> bool:
        """True when simulating ``n`` individuals produces uneven pools.

        Closed-form and simulated counts are only comparable on plans that
        are not ragged.
        """
        if not self.pool_sizes:
            return False
        return not self.nested or n % self.pool_sizes[0] != 0

    def validate(self, require_nested: bool = True) -> None:
        if require_nested and not self.nested:
            raise PlanError(f"pool sizes {self.pool_sizes} are not nested (each must divide the previous)")

    def __str__(self):
        if not self.pool_sizes:
            return "k=1 (individual)"
        return f"k={self.stages} s=({', '.join(map(str, self.pool_sizes))})"


def per_capita_tests(pool_sizes: Sequence[float], p: float) -> float:
    """Expected tests per individual for pool sizes ``s_1..s_{k-1}``.

    Accepts real-valued sizes, which the optimizer uses for its continuous
    relaxation.
    """
    if len(pool_sizes) == 0:
        return 1.0
    q = 1.0 - p
    total = 1.0 / pool_sizes[0]
    for prev, cur in zip(pool_sizes, pool_sizes[1:]):
        total += (1.0 - q**prev) / cur
    return total + (1.0 - q ** pool_sizes[-1])


def expected_tests(plan: PoolPlan, p: float, n: int, *, approximate: bool = False) -> float:
    """Closed-form expected number of tests for ``n`` individuals.

    The expression is exact for nested plans when ``n`` is a multiple of
    ``s_1``.  Non-nested plans raise :class:`PlanError` unless
    ``approximate=True``.
    """
    p = check_prevalence(p)
    if n < 1:
        raise ValueError(f"population size must be >= 1, got {n}")
    plan.validate(require_nested=not approximate)
    if plan.stages == 1:
        return float(n)
    return n * per_capita_tests(plan.pool_sizes, p)


@dataclass(frozen=True)
class Population:
    infected: np.ndarray
    daily_income: np.ndarray

    def __post_init__(self):
        infected = np.asarray(self.infected, dtype=bool)
        income = np.asarray(self.daily_income, dtype=float)
        if infected.ndim != 1 or infected.shape != income.shape:
            raise ValueError("infected flags and incomes must be 1-d arrays of equal length")
        if infected.size < 1:
            raise ValueError("population must contain at least one individual")
        if not np.all(np.isfinite(income)) or np.any(income < 0):
            raise ValueError("incomes must be finite and non-negative")
        object.__setattr__(self, "infected", infected)
        object.__setattr__(self, "daily_income", income)

    @property
    def size(self) -> int:
        return int(self.infected.size)


@dataclass(frozen=True)
class SimulationOutcome:
    """One stochastic run.

    ``quarantined_per_stage[j]`` holds the sorted indices of everyone still
    in quarantine (i.e. tested) at stage ``j + 1``.
    """

    tests_per_stage: tuple[int, ...]
    quarantined_per_stage: tuple[np.ndarray, ...] = field(repr=False)
    stage_income_sums: tuple[float, ...]

    @property
    def total_tests(self) -> int:
        return sum(self.tests_per_stage)

    @property
    def stages(self) -> int:
        return len(self.tests_per_stage)


def draw_infections(n: int, p: float, rng: np.random.Generator) -> np.ndarray:
    p = check_prevalence(p)
    if n < 1:
        raise ValueError(f"population size must be >= 1, got {n}")
    return rng.random(n) < p


def draw_population(n: int, p: float, incomes, rng: np.random.Generator) -> Population:
    """Sample i.i.d. infections and incomes (with replacement) for ``n`` people.

    ``incomes`` is an :class:`~gtecon.ingest.EmpiricalIncomeDistribution` or
    any array of daily incomes.
    """
    pool = np.asarray(getattr(incomes, "daily_incomes", incomes), dtype=float)
    if pool.size == 0:
        raise ValueError("income distribution is empty")
    infected = draw_infections(n, p, rng)
    return Population(infected, rng.choice(pool, size=n, replace=True))


def _run_stages(plan: PoolPlan, infected: np.ndarray, order: np.ndarray):
    """Yield ``(tests, positions)`` per stage, positions into ``order``."""
    n = infected.size
    flags = infected[order]
    pos = np.arange(n)
    group = pos // plan.pool_sizes[0] if plan.pool_sizes else pos
    for stage in range(plan.stages):
        if stage == plan.stages - 1:
            yield pos.size, pos
            return
        if pos.size == 0:
            yield 0, pos
            continue
        starts = np.flatnonzero(np.r_[True, group[1:] != group[:-1]])
        yield starts.size, pos
        positive = np.logical_or.reduceat(flags[pos], starts)
        keep = np.repeat(positive, np.diff(np.r_[starts, pos.size]))
        pos, group = pos[keep], group[keep]
        if pos.size == 0 or stage + 1 == plan.stages - 1:
            continue
        # split each surviving pool into consecutive chunks of the next size
        starts = np.flatnonzero(np.r_[True, group[1:] != group[:-1]])
        lengths = np.diff(np.r_[starts, pos.size])
        rank = np.arange(pos.size) - np.repeat(starts, lengths)
        chunk = rank // plan.pool_sizes[stage + 1]
        new = np.r_[True, (group[1:] != group[:-1]) | (chunk[1:] != chunk[:-1])]
        group = np.cumsum(new) - 1


def simulate(plan: PoolPlan, pop: Population, rng: np.random.Generator | None = None,
             *, shuffle: bool = True) -> SimulationOutcome:
    """Run nested pooled testing on ``pop`` with perfect tests.

    Individuals are pooled in index order after a seeded shuffle drawn from
    ``rng``; ``shuffle=False`` pools in plain index order.  When a pool does
    not split evenly the last sub-pool is smaller.
    """
    n = pop.size
    if shuffle:
        if rng is None:
            raise ValueError("rng is required when shuffle=True")
        order = rng.permutation(n)
    else:
        order = np.arange(n)
    tests, quarantined, sums = [], [], []
    for count, pos in _run_stages(plan, pop.infected, order):
        members = np.sort(order[pos])
        tests.append(int(count))
        quarantined.append(members)
        sums.append(float(pop.daily_income[members].sum()))
    return SimulationOutcome(tuple(tests), tuple(quarantined), tuple(sums))


def count_tests(plan: PoolPlan, infected: np.ndarray, rng: np.random.Generator) -> int:
    """Total tests only; skips the quarantine ledger."""
    order = rng.permutation(infected.size)
    return sum(int(c) for c, _ in _run_stages(plan, infected, order))


def mean_tests(plan: PoolPlan, p: float, n: int, replications: int,
               rng: np.random.Generator) -> float:
    """Monte Carlo estimate of the expected number of tests."""
    if replications < 1:
        raise ValueError("replications must be >= 1")
    total = 0
    for _ in range(replications):
        total += count_tests(plan, draw_infections(n, p, rng), rng)
    return total / replications
