"""Pool sizes minimizing the expected number of tests.

The objective is ``n`` times a per-capita function, so every search here
works per capita and scales at the end.

Two routes are available:

* :func:`optimize_pool_sizes` relaxes the sizes to reals, runs a multi-start
  Nelder-Mead search and then descends over the integer lattice in a +-2
  box around each continuous solution.
* :func:`exhaustive_search` enumerates every admissible plan.

With ``strict_nesting`` (the default) plans must be divisor chains
``s_{l+1} | s_l``.  The optimizer then works in ratio coordinates
``(s_1/s_2, ..., s_{k-2}/s_{k-1}, s_{k-1})``, where every integer point
with entries >= 2 is a valid chain.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize

from .core import PoolPlan, per_capita_tests

CONTINUOUS = "continuous+lattice"
EXHAUSTIVE = "exhaustive"
MAX_CANDIDATES = 10**7
_TIE_RTOL = 1e-12
FALLBACK_LIMIT = 10**5

log = logging.getLogger(__name__)


class DomainError(ValueError):
    """Prevalence outside the open unit interval."""


class InfeasibleError(ValueError):
    """No plan satisfies the bounds and nesting rules."""


class SearchSpaceTooLarge(ValueError):
    def __init__(self, size: int, limit: int = MAX_CANDIDATES):
        super().__init__(f"search space has about {size:.3g} candidate plans (limit {limit:.0e})")
        self.size = size


@dataclass(frozen=True)
class OptimizationRequest:
    stages: int
    p: float
    n: int = 1000
    s_max: int = 256
    strict_nesting: bool = True

    def __post_init__(self):
        if self.stages < 2:
            raise ValueError(f"optimization needs k >= 2 stages, got {self.stages}")
        if not (0.0 < self.p < 1.0):
            raise DomainError(f"p outside (0,1): {self.p!r}")
        if self.s_max < 4:
            raise ValueError(f"s_max must be >= 4, got {self.s_max}")
        if self.n < 1:
            raise ValueError(f"population size must be >= 1, got {self.n}")


@dataclass(frozen=True)
class OptimizationResult:
    plan: PoolPlan
    expected_tests_at_optimum: float
    per_capita: float
    method: str
    # Whether the expected per-capita count is at least one, i.e. pooling
    # does not beat individual testing.
    individual_dominates: bool
    approximate: bool = False


def _result(req: OptimizationRequest, sizes: tuple[int, ...], method: str) -> OptimizationResult:
    plan = PoolPlan(sizes)
    f = per_capita_tests(plan.pool_sizes, req.p)
    return OptimizationResult(
        plan=plan,
        expected_tests_at_optimum=req.n * f,
        per_capita=f,
        method=method,
        individual_dominates=f >= 1.0,
        approximate=not plan.nested,
    )


def _better(value: float, sizes: tuple, best_value: float, best_sizes: tuple | None) -> bool:
    if best_sizes is None:
        return True
    tol = _TIE_RTOL * abs(best_value)
    if value < best_value - tol:
        return True
    return abs(value - best_value) <= tol and sizes < best_sizes


# --- enumeration ------------------------------------------------------------

@lru_cache(maxsize=None)
def _chains_below(top: int, length: int) -> tuple[tuple[int, ...], ...]:
    """Strictly decreasing divisor chains of ``length`` sizes starting below ``top``."""
    if length == 0:
        return ((),)
    out = []
    for d in range(2, top):
        if top % d:
            continue
        for rest in _chains_below(d, length - 1):
            out.append((d,) + rest)
    return tuple(out)


@lru_cache(maxsize=32)
def nested_candidates(stages: int, s_max: int) -> np.ndarray:
    """All divisor chains ``s_1 > ... > s_{k-1} >= 2`` with ``s_1 <= s_max``, lexicographic."""
    m = stages - 1
    rows = [(s1,) + rest for s1 in range(2, s_max + 1) for rest in _chains_below(s1, m - 1)]
    arr = np.array(rows, dtype=np.int64).reshape(-1, m)
    arr.setflags(write=False)
    return arr


def candidate_count(stages: int, s_max: int, strict_nesting: bool) -> int:
    if strict_nesting:
        return len(nested_candidates(stages, s_max))
    return math.comb(s_max - 1, stages - 1)


def _per_capita_matrix(sizes: np.ndarray, p: float) -> np.ndarray:
    q = 1.0 - p
    s = sizes.astype(float)
    total = 1.0 / s[:, 0]
    for j in range(1, s.shape[1]):
        total = total + (1.0 - q ** s[:, j - 1]) / s[:, j]
    return total + (1.0 - q ** s[:, -1])


def exhaustive_search(req: OptimizationRequest) -> OptimizationResult:
    """Global integer optimum by full enumeration (lexicographic tie-break)."""
    size = candidate_count(req.stages, req.s_max, req.strict_nesting)
    if size > MAX_CANDIDATES:
        raise SearchSpaceTooLarge(size)
    if size == 0:
        raise InfeasibleError(f"no admissible {req.stages}-stage plan with s_1 <= {req.s_max}")
    if req.strict_nesting:
        cand = nested_candidates(req.stages, req.s_max)
    else:
        # combinations() yields increasing tuples in lexicographic order;
        # reversing each row gives decreasing plans but scrambles the order
        combos = np.fromiter(
            itertools.chain.from_iterable(itertools.combinations(range(2, req.s_max + 1), req.stages - 1)),
            dtype=np.int64,
        ).reshape(-1, req.stages - 1)
        cand = combos[:, ::-1]
        cand = cand[np.lexsort(cand.T[::-1])]
    values = _per_capita_matrix(cand, req.p)
    best = values.min()
    idx = int(np.flatnonzero(values <= best + _TIE_RTOL * abs(best))[0])
    return _result(req, tuple(int(s) for s in cand[idx]), EXHAUSTIVE)


def zero_prevalence_plan(stages: int, s_max: int = 256, strict_nesting: bool = True) -> PoolPlan:
    """Plan used when ``p == 0``: largest admissible ``s_1``, then smallest later sizes.

    At zero prevalence only the first stage runs, so ``1/s_1`` is the whole
    objective.
    """
    if stages == 1:
        return PoolPlan.individual()
    if not strict_nesting:
        if s_max < stages:
            raise InfeasibleError(f"no admissible {stages}-stage plan with s_1 <= {s_max}")
        return PoolPlan((s_max,) + tuple(range(stages - 1, 1, -1)))
    for s1 in range(s_max, 1, -1):
        rest = _chains_below(s1, stages - 2)
        if rest:
            return PoolPlan((s1,) + min(rest))
    raise InfeasibleError(f"no admissible {stages}-stage plan with s_1 <= {s_max}")


# --- continuous relaxation + lattice refinement -----------------------------

def _sizes_from_ratios(x) -> list:
    """Ratio coordinates ``(r_1, ..., r_{k-2}, s_{k-1})`` to pool sizes."""
    sizes = [x[-1]]
    for r in reversed(x[:-1]):
        sizes.append(sizes[-1] * r)
    return sizes[::-1]


def _continuous_starts(req: OptimizationRequest) -> list[np.ndarray]:
    m = req.stages - 1
    base = 1.0 / math.sqrt(req.p)
    starts = []
    for s1 in (0.5 * base, base, 2.0 * base, 8.0, float(req.s_max)):
        s1 = min(max(s1, 2.0 ** m), float(req.s_max))
        if req.strict_nesting:
            starts.append(np.full(m, s1 ** (1.0 / m)))
        else:
            # geometric ladder from s1 down towards 2
            starts.append(np.geomspace(s1, 2.0, m) if m > 1 else np.array([s1]))
    return starts


def _continuous_objective(req: OptimizationRequest):
    log_smax = math.log(req.s_max)

    def f(u):
        x = np.exp(u)
        if req.strict_nesting:
            sizes = _sizes_from_ratios(list(x))
            excess = max(0.0, float(np.sum(u)) - log_smax)
        else:
            sizes = list(x)
            excess = max(0.0, u[0] - log_smax)
            excess += sum(max(0.0, b - a + 1e-3) for a, b in zip(u, u[1:]))
        return per_capita_tests(sizes, req.p) + 10.0 * excess**2 + 10.0 * excess

    return f


def _ratio_to_sizes(req: OptimizationRequest, points: np.ndarray) -> np.ndarray:
    if not req.strict_nesting:
        return points
    return np.cumprod(points[:, ::-1], axis=1)[:, ::-1]


def _to_lattice(req: OptimizationRequest, sizes: tuple[int, ...]) -> tuple[int, ...]:
    if not req.strict_nesting:
        return sizes
    return tuple(a // b for a, b in zip(sizes, sizes[1:])) + (sizes[-1],)


def _pushed_to_bound(req: OptimizationRequest, points: np.ndarray) -> list[np.ndarray]:
    """Variants of ``points`` whose top ``j`` stages are as large as ``s_max`` allows.

    At high prevalence the leading pools are almost surely positive, so the
    optimum parks them on the ``s_1 <= s_max`` bound; a small box around an
    interior point cannot reach those plans once the lower sizes change.
    """
    m = points.shape[1]
    out = []
    for j in range(1, m + 1):
        pushed = points.copy()
        if req.strict_nesting:
            below = np.maximum(np.prod(points[:, j:], axis=1), 1)
            pushed[:, : j - 1] = 2
            pushed[:, j - 1] = req.s_max // (below * 2 ** (j - 1))
        else:
            pushed[:, :j] = np.arange(req.s_max, req.s_max - j, -1)
        out.append(pushed)
    return out


def _best_admissible(req: OptimizationRequest, points: np.ndarray):
    """Best plan among lattice points (lexicographic tie-break), or None."""
    ok = np.all(points >= 2, axis=1)
    sizes = _ratio_to_sizes(req, np.where(ok[:, None], points, 2))
    ok &= sizes[:, 0] <= req.s_max
    ok &= np.all(sizes[:, :-1] > sizes[:, 1:], axis=1)
    sizes = sizes[ok]
    if sizes.size == 0:
        return None, math.inf
    values = _per_capita_matrix(sizes, req.p)
    best = values.min()
    tied = sizes[values <= best + _TIE_RTOL * abs(best)]
    winner = tied[np.lexsort(tied.T[::-1])[0]]
    winner = tuple(int(s) for s in winner)
    return winner, per_capita_tests(winner, req.p)


def _lattice_descent(req: OptimizationRequest, start: tuple[int, ...], radius: int = 2):
    m = len(start)
    offsets = np.array(list(itertools.product(range(-radius, radius + 1), repeat=m)), dtype=np.int64)
    center = tuple(max(2, v) for v in start)
    best_sizes, best_value = None, math.inf
    visited = set()
    while center not in visited:
        visited.add(center)
        box = np.asarray(center, dtype=np.int64) + offsets
        sizes, value = _best_admissible(req, np.vstack([box] + _pushed_to_bound(req, box)))
        if sizes is None:
            break
        if _better(value, sizes, best_value, best_sizes):
            best_sizes, best_value = sizes, value
        center = _to_lattice(req, best_sizes)
    return best_sizes, best_value


def optimize_pool_sizes(req: OptimizationRequest, radius: int = 2,
                        fallback: bool = False) -> OptimizationResult:
    """Multi-start continuous relaxation followed by integer lattice descent.

    The lattice descent is a local method.  With ``fallback=True`` and a
    candidate space of at most ``FALLBACK_LIMIT`` plans, the exhaustive
    optimum is also computed and returned whenever it is strictly better.
    """
    if req.s_max < 2 ** (req.stages - 1) and req.strict_nesting:
        raise InfeasibleError(f"no admissible {req.stages}-stage divisor chain with s_1 <= {req.s_max}")
    if req.s_max < req.stages:
        raise InfeasibleError(f"no admissible {req.stages}-stage plan with s_1 <= {req.s_max}")
    objective = _continuous_objective(req)
    bounds = [(math.log(2.0), math.log(req.s_max))] * (req.stages - 1)
    seeds = set()
    for x0 in _continuous_starts(req):
        u0 = np.clip(np.log(x0), bounds[0][0], bounds[0][1])
        res = minimize(objective, u0, method="Nelder-Mead", bounds=bounds,
                       options={"xatol": 1e-4, "fatol": 1e-12, "maxiter": 4000})
        seeds.add(tuple(int(round(v)) for v in np.exp(res.x)))
    best_sizes, best_value = None, math.inf
    for seed in sorted(seeds):
        sizes, value = _lattice_descent(req, seed, radius)
        if sizes is not None and _better(value, sizes, best_value, best_sizes):
            best_sizes, best_value = sizes, value
    if best_sizes is None:
        raise InfeasibleError(f"no admissible {req.stages}-stage plan with s_1 <= {req.s_max}")
    result = _result(req, best_sizes, CONTINUOUS)
    if fallback and candidate_count(req.stages, req.s_max, req.strict_nesting) <= FALLBACK_LIMIT:
        exact = exhaustive_search(req)
        if exact.plan != result.plan and _better(exact.per_capita, exact.plan.pool_sizes,
                                                 result.per_capita, result.plan.pool_sizes):
            log.info("lattice descent missed the optimum for k=%d p=%g: %s vs %s",
                     req.stages, req.p, result.plan, exact.plan)
            return exact
    return result
