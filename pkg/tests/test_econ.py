import warnings

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gtecon.econ import BASELINE, CostBreakdown, CostParams, eci, economic_cost, range_per_individual

H1 = BASELINE.with_(h=1.0)


class TestCostParams:
    def test_baseline_values(self):
        assert (BASELINE.c_f, BASELINE.c_v, BASELINE.c_l, BASELINE.tau0, BASELINE.h) == (10000, 150, 300, 750, 0.5)

    @pytest.mark.parametrize("field,value", [("c_v", -1), ("c_f", float("inf")), ("h", 1.5), ("h", -0.1),
                                             ("tau0", 2.5), ("tau0", -3)])
    def test_rejects_invalid(self, field, value):
        with pytest.raises(ValueError):
            BASELINE.with_(**{field: value})

    def test_cheap_outsourcing_warns(self):
        with pytest.warns(UserWarning, match="outsourcing cost"):
            CostParams(c_v=400, c_l=300)

    def test_no_warning_at_baseline(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            CostParams()


class TestEconomicCost:
    def test_within_capacity(self):
        assert economic_cost(300, [123.0, 4.0], H1).total == pytest.approx(55000, abs=1e-6)

    def test_over_capacity(self):
        b = economic_cost(800, [5.0], H1)
        assert b.total == pytest.approx(137500, abs=1e-6)
        assert b.variable == 750 * 150
        assert b.outsourced == 50 * 300

    def test_pure_loss(self):
        b = economic_cost(0, [1000.0], BASELINE.with_(h=0.0))
        assert b.total == pytest.approx(BASELINE.c_f + 1000, abs=1e-6)

    def test_loss_sums_stages(self):
        b = economic_cost(10, [100.0, 40.0, 10.0], BASELINE)
        assert b.economic_loss == pytest.approx(0.5 * 150)

    def test_stage_days_scale_loss(self):
        b = economic_cost(10, [100.0], BASELINE.with_(stage_days=2.0, h=0.0))
        assert b.economic_loss == 200.0

    def test_zero_capacity_outsources_everything(self):
        b = economic_cost(40, [1.0], BASELINE.with_(tau0=0))
        assert b.variable == 0
        assert b.outsourced == 40 * 300

    def test_h1_zeroes_loss(self):
        assert economic_cost(99, [1e6, 5e5], H1).economic_loss == 0

    @pytest.mark.parametrize("tau,sums", [(-1, [1.0]), (1, [-5.0]), (1, [float("nan")])])
    def test_invalid_inputs(self, tau, sums):
        with pytest.raises(ValueError):
            economic_cost(tau, sums, BASELINE)

    def test_breakdown_total(self):
        assert CostBreakdown(1, 2, 3, 4).total == 10


params = st.builds(
    CostParams,
    c_f=st.floats(0, 1e5),
    c_v=st.floats(0, 500),
    c_l=st.floats(500, 2000),
    tau0=st.integers(0, 2000),
    h=st.floats(0, 1),
)
sums = st.lists(st.floats(0, 1e5), min_size=1, max_size=5)


class TestCostProperties:
    @settings(max_examples=1000)
    @given(params=params, w=sums)
    def test_continuity_at_capacity(self, params, w):
        at = economic_cost(params.tau0, w, params).total
        left = economic_cost(max(params.tau0 - 1, 0), w, params).total
        right = economic_cost(params.tau0 + 1, w, params).total
        # one step on either side moves the cost by exactly one test price
        if params.tau0 > 0:
            assert at - left == pytest.approx(params.c_v, abs=1e-6)
        assert right - at == pytest.approx(params.c_l, abs=1e-6)

    @given(params=params, w=sums, tau=st.integers(0, 3000))
    def test_components_add_up(self, params, w, tau):
        b = economic_cost(tau, w, params)
        assert b.total == pytest.approx(b.fixed + b.variable + b.outsourced + b.economic_loss)
        if tau <= params.tau0:
            assert b.outsourced == 0

    @given(params=params, w=sums, tau=st.integers(0, 3000), bump=st.floats(0, 100))
    def test_monotone_in_unit_cost(self, params, w, tau, bump):
        higher = params.with_(c_v=params.c_v + bump, c_l=params.c_l + bump)
        assert economic_cost(tau, w, higher).total >= economic_cost(tau, w, params).total

    @given(params=params, w=sums, tau=st.integers(0, 3000), h=st.floats(0, 1))
    def test_non_increasing_in_h(self, params, w, tau, h):
        lo, hi = sorted((params.h, h))
        assert economic_cost(tau, w, params.with_(h=hi)).total <= economic_cost(tau, w, params.with_(h=lo)).total + 1e-9

    @given(params=params, w=sums, tau=st.integers(0, 3000), extra=st.integers(0, 500))
    def test_non_increasing_in_capacity(self, params, w, tau, extra):
        more = params.with_(tau0=params.tau0 + extra)
        assert economic_cost(tau, w, more).total <= economic_cost(tau, w, params).total + 1e-9

    @given(params=params, w=sums, tau=st.integers(0, 3000))
    def test_loss_linear_in_income(self, params, w, tau):
        double = [2 * x for x in w]
        assert economic_cost(tau, double, params).economic_loss == pytest.approx(
            2 * economic_cost(tau, w, params).economic_loss)


class TestSummaries:
    def test_eci_examples(self):
        assert eci([55000], 1000) == 55
        assert eci([100000, 200000], 1000) == 150

    def test_range_examples(self):
        assert range_per_individual([5, 5, 5], 1) == 0
        assert range_per_individual([100000, 250000], 1000) == 150

    @given(st.lists(st.floats(0, 1e7), min_size=1, max_size=30), st.integers(1, 10**5))
    def test_range_non_negative_and_zero_iff_equal(self, costs, n):
        r = range_per_individual(costs, n)
        assert r >= 0
        assert (r == 0) == (len(set(costs)) == 1)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            eci([], 10)
        with pytest.raises(ValueError):
            range_per_individual([], 10)
        with pytest.raises(ValueError):
            eci([1.0], 0)
