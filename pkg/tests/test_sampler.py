import math

import numpy as np
import pytest

from rollplan.demand import CustomerBehavior, ForecastMatrix, MmfeDemandSource, OrderForecast, seed_initial_orders, update_period
from rollplan.planning import DemandScenarios
from rollplan.scenarios import (
    DeviationTracker,
    SigmaTable,
    estimate_sigma,
    parametric_sigma,
    sample_scenarios,
)


def test_constant_trajectory_records_zero_deviations():
    order = OrderForecast("10", 5, values={b: 200.0 for b in range(0, 13)})
    tracker = DeviationTracker(12)
    tracker.record(order)
    assert all(all(v == 0.0 for v in obs) for obs in tracker.samples.values())


def test_deviation_is_final_minus_forecast():
    order = OrderForecast("10", 3, values={1: 190.0, 0: 200.0})
    tracker = DeviationTracker(12)
    tracker.record(order)
    assert tracker.samples[("10", 1)] == [10.0]


def test_zero_deviations_give_zero_sigma():
    tracker = DeviationTracker(12)
    for due in range(3):
        tracker.record(OrderForecast("10", due, values={b: 150.0 for b in range(0, 4)}))
    table = estimate_sigma(tracker)
    assert table.sigma("10", 1) == 0.0
    assert table.sigma("10", 3) == 0.0


def test_two_point_sample_std():
    tracker = DeviationTracker(12)
    tracker.record(OrderForecast("10", 1, values={1: 190.0, 0: 200.0}))
    tracker.record(OrderForecast("10", 2, values={1: 210.0, 0: 200.0}))
    table = estimate_sigma(tracker)
    assert table.sigma("10", 1) == pytest.approx(10.0 * math.sqrt(2.0))


def test_single_sample_falls_back_to_parametric():
    tracker = DeviationTracker(12)
    tracker.record(OrderForecast("10", 1, values={1: 190.0, 0: 200.0}))
    fallback = parametric_sigma(CustomerBehavior("c", 0.075, 12), {"10": 200.0})
    table = estimate_sigma(tracker, fallback)
    assert table.sigma("10", 1) == fallback.sigma("10", 1)
    assert table.counts[("10", 1)] == 1


def test_parametric_sigma_counts_pending_updates():
    behavior = CustomerBehavior("c", 0.075, 12)
    table = parametric_sigma(behavior, {"10": 200.0})
    assert table.sigma("10", 1) == 0.0
    assert table.sigma("10", 2) == pytest.approx(15.0)
    assert table.sigma("10", 12) == pytest.approx(15.0 * math.sqrt(11.0))
    type_a = parametric_sigma(CustomerBehavior("a", 0.075, 12), {"10": 200.0})
    assert all(type_a.sigma("10", b) == 0.0 for b in range(1, 13))


def test_warmup_estimate_close_to_parametric():
    """Offset 1 is already final; offset 2 carries one pending update of std 15."""
    behavior = CustomerBehavior("c", 0.075, 12)
    source = MmfeDemandSource(behavior, np.random.default_rng(17))
    matrix = ForecastMatrix(12, {"10": 200.0})
    tracker = DeviationTracker(12)
    seed_initial_orders(matrix, ["10"], source)
    for t in range(1, 41):
        update_period(matrix, ["10"], t, source)
        tracker.record(matrix.order("10", t))
    table = estimate_sigma(tracker)
    assert table.sigma("10", 1) == 0.0
    assert table.sigma("10", 2) == pytest.approx(15.0, rel=0.25)
    assert table.sigma("10", 3) > table.sigma("10", 2) * 0.9


def test_zero_sigma_scenarios_equal_point_forecast():
    point = {"10": np.full(12, 200.0)}
    table = SigmaTable(12)
    scen = sample_scenarios(point, table, 5, np.random.default_rng(1))
    assert scen.n == 5
    np.testing.assert_array_equal(scen.values["10"], np.tile(point["10"], (5, 1)))
    np.testing.assert_allclose(scen.probabilities, np.full(5, 0.2))


def test_zero_forecast_stays_zero_in_scenarios():
    point = {"10": np.zeros(12)}
    table = parametric_sigma(CustomerBehavior("c", 0.5, 12), {"10": 200.0})
    scen = sample_scenarios(point, table, 8, np.random.default_rng(2))
    np.testing.assert_array_equal(scen.values["10"], np.zeros((8, 12)))


def test_first_window_period_never_perturbed():
    point = {"10": np.full(12, 200.0)}
    table = parametric_sigma(CustomerBehavior("c", 0.075, 12), {"10": 200.0})
    scen = sample_scenarios(point, table, 50, np.random.default_rng(3))
    np.testing.assert_array_equal(scen.values["10"][:, 0], np.full(50, 200.0))
    assert scen.values["10"][:, 5].std() > 0.0


def test_scenario_mean_preserved_under_truncation():
    """Symmetric truncation at [0, 2F] keeps the sample mean near F."""
    point = {"10": np.full(12, 200.0)}
    table = SigmaTable(12, values={("10", b): 15.0 for b in range(1, 13)})
    scen = sample_scenarios(point, table, 100_000, np.random.default_rng(4))
    assert abs(scen.values["10"][:, 6].mean() - 200.0) < 0.5


def test_scenarios_nonnegative_and_bounded():
    point = {"10": np.full(12, 10.0)}
    table = SigmaTable(12, values={("10", b): 80.0 for b in range(1, 13)})
    scen = sample_scenarios(point, table, 2000, np.random.default_rng(5))
    assert (scen.values["10"] >= 0.0).all()
    assert (scen.values["10"] <= 20.0).all()


def test_sigma_csv_roundtrip(tmp_path):
    table = SigmaTable(12, values={("10", 1): 0.0, ("10", 2): 14.3271}, counts={("10", 1): 5, ("10", 2): 5})
    path = tmp_path / "sigma.csv"
    table.write_csv(path)
    back = SigmaTable.read_csv(path)
    assert back.values == table.values
    assert back.counts == table.counts


def test_sample_count_validation():
    with pytest.raises(ValueError):
        sample_scenarios({"10": np.zeros(12)}, SigmaTable(12), 0, np.random.default_rng(0))
