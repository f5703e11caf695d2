"""Economic cost of one group-testing run and the per-individual summaries."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class CostParams:
    """Cost inputs, in EUR unless noted.

    ``tau0`` is the internal testing capacity for one screening run (tests
    beyond it are outsourced at ``c_l`` each) and ``h`` the share of
    quarantined income that is not lost thanks to remote work.
    ``stage_days`` scales the quarantine ledger; every stage lasts one day
    by default.
    """

    c_f: float = 10000.0
    c_v: float = 150.0
    c_l: float = 300.0
    tau0: int = 750
    h: float = 0.5
    stage_days: float = 1.0

    def __post_init__(self):
        for name in ("c_f", "c_v", "c_l", "tau0", "stage_days"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {value!r}")
        if int(self.tau0) != self.tau0:
            raise ValueError(f"tau0 must be an integer, got {self.tau0!r}")
        object.__setattr__(self, "tau0", int(self.tau0))
        if not (0.0 <= self.h <= 1.0):
            raise ValueError(f"h must lie in [0, 1], got {self.h!r}")
        if self.c_l < self.c_v:
            warnings.warn(f"outsourcing cost c_l={self.c_l} is below the internal cost c_v={self.c_v}",
                          stacklevel=3)

    def with_(self, **changes) -> CostParams:
        return replace(self, **changes)


BASELINE = CostParams()


@dataclass(frozen=True)
class CostBreakdown:
    fixed: float
    variable: float
    outsourced: float
    economic_loss: float

    @property
    def total(self) -> float:
        return self.fixed + self.variable + self.outsourced + self.economic_loss


def economic_cost(tau: int, stage_income_sums: Sequence[float], params: CostParams) -> CostBreakdown:
    """Cost of a run with ``tau`` tests and per-stage quarantined income sums."""
    if tau < 0:
        raise ValueError(f"test count must be >= 0, got {tau}")
    sums = np.asarray(stage_income_sums, dtype=float)
    if np.any(sums < 0) or not np.all(np.isfinite(sums)):
        raise ValueError("stage income sums must be finite and >= 0")
    internal = min(tau, params.tau0)
    return CostBreakdown(
        fixed=params.c_f,
        variable=internal * params.c_v,
        outsourced=(tau - internal) * params.c_l,
        economic_loss=(1.0 - params.h) * params.stage_days * float(sums.sum()),
    )


def _costs(costs: Sequence[float]) -> np.ndarray:
    arr = np.asarray(costs, dtype=float)
    if arr.size == 0:
        raise ValueError("need at least one cost")
    return arr


def eci(costs: Sequence[float], n: int) -> float:
    """Economic cost per individual: mean cost over replications divided by ``n``."""
    if n < 1:
        raise ValueError(f"population size must be >= 1, got {n}")
    return float(_costs(costs).mean()) / n


def range_per_individual(costs: Sequence[float], n: int) -> float:
    if n < 1:
        raise ValueError(f"population size must be >= 1, got {n}")
    arr = _costs(costs)
    return float((arr.max() - arr.min()) / n)
