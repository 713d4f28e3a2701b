import numpy as np
import pytest

from rollplan.mrp import (
    LotPolicy,
    MrpParams,
    apply_lot_policy,
    lot_fop,
    lot_foq,
    net_requirements,
    run_mrp,
    tableau_csv_rows,
    time_phase,
)

from conftest import make_snapshot


def test_netting_consumes_on_hand_first():
    net = net_requirements(np.array([200.0, 200.0, 200.0]), np.zeros(3), on_hand=500.0)
    np.testing.assert_allclose(net, [0.0, 0.0, 100.0])


def test_netting_adds_safety_stock():
    net = net_requirements(np.array([200.0]), np.zeros(1), on_hand=0.0, safety_stock=20.0)
    np.testing.assert_allclose(net, [220.0])


def test_netting_zero_demand():
    net = net_requirements(np.zeros(4), np.zeros(4), on_hand=0.0)
    np.testing.assert_allclose(net, np.zeros(4))


def test_netting_counts_scheduled_receipts():
    net = net_requirements(np.array([100.0, 100.0]), np.array([0.0, 150.0]), on_hand=100.0)
    np.testing.assert_allclose(net, [0.0, 0.0])


def test_fop_groups_periods():
    receipts = lot_fop(np.array([100.0, 50.0, 0.0, 80.0]), periods=2)
    np.testing.assert_allclose(receipts, [150.0, 0.0, 0.0, 80.0])


def test_fop_one_is_lot_for_lot():
    net = np.array([10.0, 0.0, 30.0])
    np.testing.assert_allclose(lot_fop(net, 1), net)


def test_foq_rounds_up_to_multiple():
    receipts = lot_foq(np.array([120.0]), lot_size=100.0)
    np.testing.assert_allclose(receipts, [200.0])


def test_foq_overshoot_covers_later_periods():
    receipts = lot_foq(np.array([120.0, 60.0]), lot_size=100.0)
    np.testing.assert_allclose(receipts, [200.0, 0.0])


def test_apply_lot_policy_requires_foq_size():
    with pytest.raises(ValueError):
        apply_lot_policy(np.array([10.0]), LotPolicy("foq", 1.25), lot_size=None)


def test_lot_policy_parse():
    policy = LotPolicy.parse("fop:2")
    assert policy.kind == "fop" and policy.value == 2
    policy = LotPolicy.parse("foq:1.25")
    assert policy.kind == "foq" and policy.value == 1.25
    with pytest.raises(ValueError):
        LotPolicy.parse("fop")
    with pytest.raises(ValueError):
        LotPolicy.parse("lot4lot:1")


def test_time_phase_shifts_by_lead_time():
    releases = time_phase(np.array([0.0, 0.0, 0.0, 0.0, 100.0]), lead_time=2)
    np.testing.assert_allclose(releases, [0.0, 0.0, 100.0, 0.0, 0.0])


def test_time_phase_clamps_past_releases():
    releases = time_phase(np.array([100.0, 0.0, 0.0]), lead_time=2)
    np.testing.assert_allclose(releases, [100.0, 0.0, 0.0])


def test_time_phase_empty():
    np.testing.assert_allclose(time_phase(np.zeros(3), 1), np.zeros(3))


def test_steady_state_releases_every_item(elementary):
    """Level demand, lot-for-lot, LT=1: each period releases one lot per item."""
    system = elementary.with_load("98")
    demand = {
        "10": np.full(12, 200.0),
        "11": np.full(12, 400.0),
    }
    on_hand = {"10": 200.0, "11": 400.0, "20": 200.0, "21": 400.0}
    snapshot = make_snapshot(system, demand, on_hand)
    plan, tableaus = run_mrp(system, snapshot, MrpParams(lead_time=1, ss_mult=0.0, lot=LotPolicy("fop", 1)))
    for item_id, qty in (("10", 200.0), ("11", 400.0)):
        # on-hand covers period 1; first shortfall in period 2 releases in period 1
        releases = tableaus[item_id].planned_releases
        np.testing.assert_allclose(releases[:11], np.full(11, qty))
    for item_id, qty in (("20", 200.0), ("21", 400.0)):
        releases = tableaus[item_id].planned_releases
        np.testing.assert_allclose(releases[:10], np.full(10, qty))
    assert len(plan.releases()) == 4


def test_zero_demand_empty_plan(elementary):
    snapshot = make_snapshot(elementary, {"10": np.zeros(12), "11": np.zeros(12)})
    plan, _ = run_mrp(elementary, snapshot, MrpParams())
    assert plan.rows == []


def test_ample_on_hand_empty_plan(elementary):
    demand = {"10": np.full(12, 200.0), "11": np.full(12, 400.0)}
    on_hand = {"10": 5000.0, "11": 5000.0, "20": 0.0, "21": 0.0}
    snapshot = make_snapshot(elementary, demand, on_hand)
    plan, _ = run_mrp(elementary, snapshot, MrpParams())
    assert plan.rows == []


def test_explosion_passes_parent_releases_to_components(elementary):
    demand = {"10": np.array([0.0, 0.0, 300.0] + [0.0] * 9), "11": np.zeros(12)}
    snapshot = make_snapshot(elementary, demand)
    plan, tableaus = run_mrp(elementary, snapshot, MrpParams(lead_time=1))
    # end item releases 300 in period 2; component gross inherits that period
    np.testing.assert_allclose(tableaus["10"].planned_releases[1], 300.0)
    np.testing.assert_allclose(tableaus["20"].gross[1], 300.0)
    np.testing.assert_allclose(tableaus["20"].planned_releases[0], 300.0)


def test_ss_mult_resolves_against_mean_requirements(elementary):
    demand = {"10": np.zeros(12), "11": np.zeros(12)}
    snapshot = make_snapshot(elementary, demand)
    plan, tableaus = run_mrp(elementary, snapshot, MrpParams(ss_mult=0.5))
    assert tableaus["10"].safety_stock == 100.0
    assert tableaus["21"].safety_stock == 200.0


def test_tableau_rows_roundtrip_header(elementary):
    demand = {"10": np.full(12, 200.0), "11": np.zeros(12)}
    snapshot = make_snapshot(elementary, demand)
    _, tableaus = run_mrp(elementary, snapshot, MrpParams())
    rows = tableau_csv_rows(tableaus)
    assert rows[0][:2] == ["item", "row"]
    assert len(rows) == 1 + 5 * len(tableaus)
