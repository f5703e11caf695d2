import math
import warnings
from dataclasses import replace
from datetime import date

import numpy as np
import pytest

from gtecon.core import PoolPlan, expected_tests
from gtecon.econ import BASELINE
from gtecon.harness import (
    TABLE1,
    OptimalChoice,
    PlanCache,
    ScenarioConfig,
    ScenarioResult,
    cost_ledgers,
    optimal_choice,
    replication_rng,
    run_scenario,
    simulate_points,
    sweep,
)

from conftest import points

LOC = "02000"


def config(**kw):
    kw.setdefault("locations", (LOC,))
    kw.setdefault("algorithms", (2, 3))
    kw.setdefault("seed", 99)
    return ScenarioConfig(**kw)


def test_zero_prevalence_has_no_spread(incomes):
    cfg = config(algorithms=(2,), cost_params=BASELINE.with_(h=1.0))
    (res,) = run_scenario(cfg, points(LOC, [0.0]), incomes)
    s1 = res.plan.pool_sizes[0]
    expected = BASELINE.c_f + math.ceil(1000 / s1) * BASELINE.c_v
    assert all(c == pytest.approx(expected, abs=1e-6) for c in res.costs)
    assert res.range_per_individual == 0
    assert res.min_eci == res.mean_eci == res.max_eci


def test_individual_testing_at_zero_prevalence(incomes):
    (res,) = run_scenario(config(algorithms=(1,)), points(LOC, [0.0]), incomes)
    assert res.mean_total_tests == 1000


def test_bookkeeping(incomes):
    results = run_scenario(config(), points(LOC, [0.01]), incomes)
    assert [r.k for r in results] == [2, 3]
    assert all(len(r.costs) == 25 == len(r.breakdowns) for r in results)


def test_mean_tests_near_closed_form(incomes):
    (res,) = run_scenario(config(algorithms=(2,)), points(LOC, [0.01]), incomes)
    assert res.plan == PoolPlan((11,))
    target = expected_tests(res.plan, 0.01, 1000)
    assert abs(res.mean_total_tests - target) / target < 0.05


def test_aggregation_matches_retained_costs(incomes):
    for res in run_scenario(config(algorithms=(1, 2, 3, 4, 5)), points(LOC, [0.004, 0.03]), incomes):
        costs = np.array(res.costs)
        assert res.min_eci == costs.min() / res.n
        assert res.max_eci == costs.max() / res.n
        assert res.mean_eci == pytest.approx(costs.mean() / res.n, rel=1e-15)
        assert res.min_eci <= res.mean_eci <= res.max_eci
        assert res.range_per_individual == res.max_eci - res.min_eci
        assert all(b.total == c for b, c in zip(res.breakdowns, res.costs))


def test_stage_ledger_consistency(incomes):
    cfg = config(algorithms=(2, 3, 4, 5), n_sim=10)
    for led in simulate_points(cfg, points(LOC, [0.02]), incomes):
        assert led.stage_sums.shape == (10, led.plan.stages)
        assert np.all(np.diff(led.stage_sums, axis=1) <= 1e-9)
        # stage 1 quarantines everyone, so w_1 is a full sample of n incomes
        assert np.all(led.stage_sums[:, 0] > 0)


def test_first_stage_sum_is_all_drawn_incomes(incomes):
    from gtecon.core import draw_population, simulate

    cfg = config(algorithms=(3,), n_sim=3)
    pt = points(LOC, [0.02])[0]
    (led,) = simulate_points(cfg, [pt], incomes)
    for r in range(3):
        rng = replication_rng(cfg.seed, LOC, pt.date, 3, r)
        pop = draw_population(cfg.n, pt.prevalence, incomes[LOC], rng)
        out = simulate(led.plan, pop, rng)
        assert led.stage_sums[r, 0] == pytest.approx(pop.daily_income.sum())
        assert led.tests[r] == out.total_tests


def test_deterministic_across_threads(incomes):
    pts = points(LOC, [0.001, 0.01, 0.05])
    serial = run_scenario(config(threads=1), pts, incomes)
    parallel = run_scenario(config(threads=4), pts, incomes)
    assert [r.costs for r in serial] == [r.costs for r in parallel]
    again = run_scenario(config(threads=1), pts, incomes)
    assert [r.to_row() for r in serial] == [r.to_row() for r in again]


def test_seed_changes_results(incomes):
    a = run_scenario(config(seed=1), points(LOC, [0.05]), incomes)
    b = run_scenario(config(seed=2), points(LOC, [0.05]), incomes)
    assert a[0].costs != b[0].costs


def test_common_random_numbers_share_draws(incomes):
    cfg = config(algorithms=(2, 3), common_random_numbers=True, cost_params=BASELINE.with_(h=0.0))
    a, b = simulate_points(cfg, points(LOC, [0.02]), incomes)
    # same population: identical stage-one ledger
    assert np.array_equal(a.stage_sums[:, 0], b.stage_sums[:, 0])
    a, b = simulate_points(replace(cfg, common_random_numbers=False), points(LOC, [0.02]), incomes)
    assert not np.array_equal(a.stage_sums[:, 0], b.stage_sums[:, 0])


def test_missing_inputs(incomes):
    with pytest.raises(ValueError, match="income"):
        run_scenario(config(locations=("X",)), points("X", [0.01]), incomes)
    with pytest.raises(ValueError, match="prevalence"):
        run_scenario(config(), points("other", [0.01]), incomes)


def test_config_validation():
    with pytest.raises(ValueError):
        config(n_sim=0)
    with pytest.raises(ValueError):
        config(algorithms=(0, 2))
    with pytest.raises(ValueError):
        config(locations=())
    assert config(algorithms=(3, 2, 3)).algorithms == (2, 3)


class TestSweep:
    def test_h(self, incomes):
        sets = sweep(config(), "h", [0, 0.5, 0.9, 1], points(LOC, [0.01]), incomes)
        assert [v for v, _ in sets] == [0, 0.5, 0.9, 1]
        _, at_one = sets[-1]
        assert all(b.economic_loss == 0 for r in at_one for b in r.breakdowns)

    def test_tau0(self, incomes):
        sets = dict(sweep(config(), "tau0", [0, 250, 750, 1000], points(LOC, [0.02]), incomes))
        assert all(b.variable == 0 for r in sets[0] for b in r.breakdowns)
        led = simulate_points(config(), points(LOC, [0.02]), incomes)
        for r, ledger in zip(sets[0], led):
            assert [b.outsourced for b in r.breakdowns] == [t * BASELINE.c_l for t in ledger.tests]

    def test_c_v_table(self, incomes):
        with warnings.catch_warnings():
            warnings.filterwarnings("ignore", message="outsourcing cost")
            sets = sweep(config(algorithms=(2,)), "c_v", TABLE1["c_v"], points(LOC, [0.01]), incomes)
        assert len(sets) == 9
        ecis = [res[0].mean_eci for _, res in sets]
        assert ecis == sorted(ecis)

    def test_baseline_added(self, incomes):
        sets = sweep(config(algorithms=(2,)), "h", [0.9], points(LOC, [0.01]), incomes)
        assert [v for v, _ in sets] == [0.5, 0.9]

    def test_n(self, incomes):
        sets = sweep(config(algorithms=(2,), n_sim=3), "n", [150, 5000], points(LOC, [0.01]), incomes)
        assert [v for v, _ in sets] == [150, 1000, 5000]
        assert [res[0].n for _, res in sets] == [150, 1000, 5000]

    def test_errors(self, incomes):
        with pytest.raises(ValueError):
            sweep(config(), "c_f", [1], points(LOC, [0.01]), incomes)
        with pytest.raises(ValueError):
            sweep(config(), "h", [], points(LOC, [0.01]), incomes)

    def test_cost_sweep_reuses_draws(self, incomes):
        sets = sweep(config(algorithms=(3,)), "h", [0, 1], points(LOC, [0.01]), incomes)
        tests = {tuple(b.variable + b.outsourced for b in res[0].breakdowns) for _, res in sets}
        assert len(tests) == 1


def _result(k, mean, day=date(2020, 11, 1)):
    plan = PoolPlan(tuple(2**j for j in range(k - 1, 0, -1)))
    return ScenarioResult(LOC, day, 0.01, k, plan, 1000, mean, mean, mean, 0.0, 0.0, (mean * 1000,), ())


class TestOptimalChoice:
    def test_lowest_mean(self):
        (c,) = optimal_choice([_result(2, 90.0), _result(3, 80.0)])
        assert c.k == 3

    def test_tie_goes_to_fewer_stages(self):
        (c,) = optimal_choice([_result(3, 85.0), _result(2, 85.0)])
        assert c.k == 2

    def test_one_per_point(self):
        rows = optimal_choice([_result(2, 1.0), _result(3, 2.0, date(2020, 11, 2)), _result(2, 3.0, date(2020, 11, 2))])
        assert [(c.date.day, c.k) for c in rows] == [(1, 2), (2, 3)]
        assert isinstance(rows[0], OptimalChoice)


def test_plan_cache():
    cache = PlanCache()
    assert cache(1, 0.3) == PoolPlan.individual()
    assert cache(2, 0.0) == PoolPlan((256,))
    assert cache(2, 0.01) is cache(2, 0.01)


def test_cost_ledgers_per_capita(incomes):
    led = simulate_points(config(algorithms=(2,), n_sim=4), points(LOC, [0.01]), incomes)
    (res,) = cost_ledgers(led, BASELINE.with_(h=1.0), 1000)
    expect = [BASELINE.c_f + t * BASELINE.c_v for t in led[0].tests]
    assert list(res.costs) == pytest.approx(expect)
    assert res.mean_economic_loss == 0
