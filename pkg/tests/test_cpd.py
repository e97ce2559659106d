import itertools
import numpy as np
import pytest
import ruptures
import statekit

step = np.array([0.0] * 100 + [10.0] * 100)
constant = np.full((120, 2), 3.0)


def l2():
    return statekit.cpd.SegmentCostModel("l2")


def test_segment_cost_l2():
    assert statekit.cpd.segment_cost(l2(), [4.0, 4.0, 4.0], 0, 3) == 0.0
    assert statekit.cpd.segment_cost(l2(), [0.0, 2.0], 0, 2) == 2.0


def test_segment_cost_l1():
    model = statekit.cpd.SegmentCostModel("l1")
    assert statekit.cpd.segment_cost(model, [1.0, 2.0, 6.0], 0, 3) == 5.0


def test_segment_cost_normal_degenerate_segment():
    signal = np.array([[1.0, 2.0], [1.0, 2.0], [5.0, 0.0]])
    model = statekit.cpd.SegmentCostModel("normal")
    expected = 2 * np.linalg.slogdet(1e-6 * np.eye(2))[1]
    assert statekit.cpd.segment_cost(model, signal, 0, 2) == pytest.approx(expected)


def test_segment_cost_normal_matches_dense_determinant():
    signal = np.random.default_rng(0).normal(size=(30, 3))
    model = statekit.cpd.SegmentCostModel("normal", epsilon=1e-3)
    segment = signal[5:25]
    covariance = np.cov(segment, rowvar=False, bias=True) + 1e-3 * np.eye(3)
    expected = 20 * np.log(np.linalg.det(covariance))
    assert statekit.cpd.segment_cost(model, signal, 5, 25) == pytest.approx(expected)


def test_segment_cost_linear_exact_fit():
    rng = np.random.default_rng(1)
    inputs = rng.normal(size=(40, 2))
    outputs = inputs @ np.array([[2.0, -1.0], [0.5, 3.0]]) + 1.0
    signal = np.hstack([inputs, outputs])
    model = statekit.cpd.SegmentCostModel("linear")
    assert statekit.cpd.segment_cost(model, signal, 0, 40) == pytest.approx(0.0, abs=1e-9)


def test_segment_cost_ar_exact_fit():
    x = [1.0, 2.0]
    for _ in range(40):
        x.append(0.5 * x[-1] - 0.3 * x[-2])
    signal = np.column_stack([x, x])
    model = statekit.cpd.SegmentCostModel("ar", order=2)
    assert statekit.cpd.segment_cost(model, signal, 0, len(x)) == pytest.approx(0.0, abs=1e-9)


def test_segment_cost_non_negative():
    signal = np.random.default_rng(2).normal(size=(60, 4))
    for kind in ("l1", "l2", "rbf", "linear", "ar"):
        model = statekit.cpd.SegmentCostModel(kind)
        cost = model.fit(signal)
        for a, b in [(0, 60), (3, 17), (10, 40)]:
            assert cost.cost(a, b) >= 0


def test_segment_cost_too_short():
    for kind, length in [("l1", 0), ("normal", 1), ("rbf", 1), ("rank", 1), ("ar", 5)]:
        model = statekit.cpd.SegmentCostModel(kind)
        with pytest.raises(ValueError):
            statekit.cpd.segment_cost(model, np.zeros((20, 2)), 3, 3 + length)
    with pytest.raises(ValueError):
        statekit.cpd.segment_cost(l2(), np.zeros((20, 2)), 10, 30)


def test_l2_cost_is_superadditive():
    signal = np.random.default_rng(3).normal(size=(50, 2))
    cost = l2().fit(signal)
    for a, b, c in [(0, 10, 50), (5, 6, 7), (12, 30, 31)]:
        assert cost.cost(a, c) >= cost.cost(a, b) + cost.cost(b, c) - 1e-9


def test_costs_ignore_sample_order():
    rng = np.random.default_rng(4)
    signal = rng.normal(size=(30, 3))
    shuffled = signal[rng.permutation(30)]
    for kind in ("l1", "l2"):
        model = statekit.cpd.SegmentCostModel(kind)
        assert statekit.cpd.segment_cost(model, signal, 0, 30) == pytest.approx(
            statekit.cpd.segment_cost(model, shuffled, 0, 30)
        )


def test_rbf_cost_ignores_channel_order():
    signal = np.random.default_rng(5).normal(size=(40, 3))
    model = statekit.cpd.SegmentCostModel("rbf")
    assert statekit.cpd.segment_cost(model, signal, 5, 30) == pytest.approx(
        statekit.cpd.segment_cost(model, signal[:, [2, 0, 1]], 5, 30)
    )


def test_SegmentCostModel():
    model = statekit.cpd.SegmentCostModel("AR", order=3)
    assert model.kind == "ar"
    assert model.params == {"order": 3}
    assert model.serialize() == {"kind": "ar", "order": 3}
    assert model == statekit.cpd.SegmentCostModel("ar", order=3)
    assert repr(model) == "SegmentCostModel[ar, order=3]"
    with pytest.raises(ValueError):
        statekit.cpd.SegmentCostModel("gaussian")
    with pytest.raises(ValueError):
        statekit.cpd.SegmentCostModel("l2", order=3)
    with pytest.raises(ValueError):
        statekit.cpd.SegmentCostModel("ar", order=0)


def test_bottom_up_step():
    result = statekit.cpd.bottom_up(step, l2(), 100, jump=5)
    assert result.breakpoints == [100]
    assert result.total_cost == 0.0
    assert result.objective == 100.0


def brute_force_objective(signal, model, penalty, jump):
    length = len(signal)
    grid = list(range(jump, length, jump))
    cost = model.fit(signal)
    segment_costs = {}
    best = None
    for m in range(len(grid) + 1):
        for subset in itertools.combinations(grid, m):
            bounds = [0, *subset, length]
            objective = penalty * m
            for a, b in zip(bounds[:-1], bounds[1:]):
                if (a, b) not in segment_costs:
                    segment_costs[a, b] = cost.cost(a, b)
                objective += segment_costs[a, b]
            if best is None or objective < best:
                best = objective
    return best


def well_separated_signal(seed, length=40, jump=4):
    """
    Three constant levels, adjacent levels at least 4 apart, cut on the jump
    grid and blurred by noise of scale 0.05. Greedy merging reaches the
    exhaustive optimum on this family; on unstructured noise it can stop at
    a slightly worse objective.
    """
    rng = np.random.default_rng(seed)
    levels = rng.choice([-6.0, -2.0, 3.0, 8.0], size=3, replace=False)
    cuts = sorted(int(c) for c in rng.choice(range(jump, length, jump), size=2, replace=False))
    signal = np.concatenate(
        [
            np.full(cuts[0], levels[0]),
            np.full(cuts[1] - cuts[0], levels[1]),
            np.full(length - cuts[1], levels[2]),
        ]
    )
    return signal + rng.normal(scale=0.05, size=length), cuts


@pytest.mark.parametrize("kind", ["l1", "l2"])
@pytest.mark.parametrize("seed", range(50))
def test_bottom_up_matches_brute_force(kind, seed):
    signal, cuts = well_separated_signal(seed)
    model = statekit.cpd.SegmentCostModel(kind)
    result = statekit.cpd.bottom_up(signal, model, 1.0, jump=4)
    assert result.objective == pytest.approx(brute_force_objective(signal, model, 1.0, 4))
    assert result.breakpoints == cuts


def test_bottom_up_constant_signal():
    for kind in ("l1", "l2", "normal"):
        model = statekit.cpd.SegmentCostModel(kind)
        assert statekit.cpd.bottom_up(constant, model, 1.0).breakpoints == []


def test_bottom_up_penalty_extremes():
    signal = np.random.default_rng(6).normal(size=(100, 2))
    assert statekit.cpd.bottom_up(signal, l2(), 0, jump=10).breakpoints == list(range(10, 100, 10))
    assert statekit.cpd.bottom_up(signal, l2(), float("inf"), jump=10).breakpoints == []


def test_bottom_up_larger_penalty_keeps_a_subset():
    rng = np.random.default_rng(7)
    for _ in range(5):
        signal = np.cumsum(rng.normal(size=(300, 3)), axis=0)
        for kind in ("l1", "l2"):
            model = statekit.cpd.SegmentCostModel(kind)
            low = statekit.cpd.bottom_up(signal, model, 100)
            high = statekit.cpd.bottom_up(signal, model, 1000)
            assert set(high.breakpoints) <= set(low.breakpoints)


def test_bottom_up_respects_min_size():
    signal = np.random.default_rng(8).normal(size=(200, 4))
    model = statekit.cpd.SegmentCostModel("linear")
    result = statekit.cpd.bottom_up(signal, model, 0, jump=5)
    bounds = [0] + result.breakpoints + [200]
    assert all(b - a >= 4 for a, b in zip(bounds[:-1], bounds[1:]))


def test_bottom_up_invalid():
    with pytest.raises(ValueError):
        statekit.cpd.bottom_up([1.0], l2(), 10)
    with pytest.raises(ValueError):
        statekit.cpd.bottom_up(step, l2(), -1)
    with pytest.raises(ValueError):
        statekit.cpd.bottom_up(step, l2(), 10, jump=0)
    with pytest.raises(TypeError):
        statekit.cpd.bottom_up(step, "l2", 10)


def test_window_based_step():
    result = statekit.cpd.window_based(step, l2(), 100, width=20)
    assert len(result) == 1
    assert abs(result.breakpoints[0] - 100) <= 1


def test_window_based_constant_signal():
    assert statekit.cpd.window_based(constant, l2(), 1.0, width=20).breakpoints == []


def test_window_based_invalid():
    with pytest.raises(ValueError):
        statekit.cpd.window_based(np.zeros(50), l2(), 10, width=100)
    with pytest.raises(ValueError):
        statekit.cpd.window_based(step, l2(), 10, width=21)
    with pytest.raises(ValueError):
        statekit.cpd.window_based(step, statekit.cpd.SegmentCostModel("ar"), 10, width=10)


def test_library_costs_match_ruptures():
    signal = np.random.default_rng(11).normal(size=(40, 3))
    for kind, reference in [
        ("l1", ruptures.costs.CostL1),
        ("l2", ruptures.costs.CostL2),
        ("rank", ruptures.costs.CostRank),
    ]:
        cost = statekit.cpd.SegmentCostModel(kind).fit(signal)
        expected = reference().fit(signal)
        for a, b in [(0, 40), (5, 17), (20, 22)]:
            assert cost.cost(a, b) == pytest.approx(float(np.squeeze(expected.error(a, b))))
    assert statekit.cpd.SegmentCostModel("l1").fit(signal).cost(7, 8) == 0.0


def test_costs_plug_into_ruptures_searches():
    signal = step[:, None]
    for kind in statekit._cost.costs:
        cost = statekit.cpd.SegmentCostModel(kind).build()
        assert isinstance(cost, ruptures.base.BaseCost)
        assert cost.model == kind
    algo = ruptures.BottomUp(custom_cost=l2().build(), jump=5).fit(signal)
    assert algo.predict(pen=100) == [100, 200]
    assert statekit.cpd.bottom_up(step, l2(), 100, jump=5).breakpoints == [100]


def test_window_threshold_applies_to_the_discrepancy():
    # ruptures accepts a peak when the whole-signal cost drops by the
    # penalty; here the peak itself must exceed it
    algo = ruptures.Window(width=20, custom_cost=l2().build(), jump=5).fit(step[:, None])
    assert algo.predict(pen=600) == [100, 200]
    assert statekit.cpd.window_based(step, l2(), 600, width=20).breakpoints == []
    assert statekit.cpd.window_based(step, l2(), 400, width=20).breakpoints == [100]


def test_searches_are_deterministic():
    signal = np.random.default_rng(9).normal(size=(250, 3))
    for search in statekit.cpd.SEARCHES:
        first = statekit.cpd.detect(signal, search, "rbf", 5.0)
        second = statekit.cpd.detect(signal, search, "rbf", 5.0)
        assert first.breakpoints == second.breakpoints


def test_detect():
    assert statekit.cpd.detect(step, "bottom_up", "l2", 100).breakpoints == [100]
    assert len(statekit.cpd.detect(step, "window", l2(), 100, width=20)) == 1
    with pytest.raises(ValueError):
        statekit.cpd.detect(step, "pelt", "l2", 100)


def test_configuration_grid_runs():
    grid = statekit.cpd.configuration_grid()
    assert len(grid) == 42
    assert grid[0] == ("l1", "bottomup", 100)
    assert grid[-1] == ("ar", "window", 1000)
    rng = np.random.default_rng(10)
    signal = np.vstack([rng.normal(size=(100, 10)), rng.normal(3.0, size=(100, 10))])
    for kind, search, penalty in grid:
        result = statekit.cpd.detect(signal, search, kind, penalty)
        assert all(0 < b < 200 for b in result.breakpoints)
        assert result.breakpoints == sorted(set(result.breakpoints))


def test_configuration_name():
    assert statekit.cpd.configuration_name("l2", "bottom_up", 100) == "bottomup-l2-100"
    assert statekit.cpd.configuration_name("rbf", "window", 1000.0) == "window-rbf-1000"
