import warnings
import numpy as np
import pytest
import statekit
from statekit.sim import Dwell, FlightPlan, SimConfig

ALTITUDE = statekit.sim.CHANNEL_NAMES.index("altitude")
THROTTLE = statekit.sim.CHANNEL_NAMES.index("throttle")
quiet = SimConfig(noise_std={channel: 0.0 for channel in statekit.sim.SENSOR_CHANNELS})


def short_plan():
    return FlightPlan(
        [
            ("accelerate", None, Dwell(quantity="airspeed", threshold=35.0, timeout=400)),
            ("takeoff", None, Dwell(quantity="altitude", threshold=20.0, timeout=400)),
            ("climb", {"altitude": 300.0}, Dwell(quantity="altitude", threshold=290.0, timeout=1500)),
            ("cruise", None, Dwell(50)),
            ("descend", {"altitude": 150.0}, Dwell(quantity="altitude", threshold=160.0, direction="below")),
            ("approach", None, Dwell(quantity="altitude", threshold=70.0, direction="below")),
            ("land", None, Dwell(40)),
        ]
    )


def test_Dwell():
    fixed = Dwell(12)
    assert not fixed.reached(11, 0.0)
    assert fixed.reached(12, 0.0)
    assert fixed.serialize() == {"duration": 12}
    above = Dwell(quantity="altitude", threshold=100.0)
    assert not above.reached(5, 200.0)
    assert above.reached(10, 100.0)
    below = Dwell(quantity="airspeed", threshold=5.0, direction="below")
    assert below.reached(20, 4.0)
    assert not below.reached(20, 6.0)
    assert str(above) == "Dwell[altitude above 100.0]"


def test_Dwell_invalid():
    with pytest.raises(ValueError):
        Dwell()
    with pytest.raises(ValueError):
        Dwell(20, quantity="altitude", threshold=5.0)
    with pytest.raises(ValueError):
        Dwell(9)
    with pytest.raises(ValueError):
        Dwell(quantity="fuel", threshold=1.0)
    with pytest.raises(ValueError):
        Dwell(quantity="altitude")
    with pytest.raises(ValueError):
        Dwell(quantity="altitude", threshold=1.0, direction="sideways")


def test_FlightPlan():
    plan = short_plan()
    assert len(plan) == 7
    assert plan.state_sequence_names[0] == "accelerate"
    assert plan.state_sequence[2] == statekit.sim.STATE_NAMES.index("climb")
    assert plan.serialize()[2]["setpoints"] == {"altitude": 300.0}
    assert str(plan).startswith("FlightPlan[accelerate, takeoff")


def test_FlightPlan_invalid():
    land = ("land", None, Dwell(20))
    accelerate = ("accelerate", None, Dwell(20))
    with pytest.raises(ValueError):
        FlightPlan([])
    with pytest.raises(ValueError):
        FlightPlan([("takeoff", None, Dwell(20)), land])
    with pytest.raises(ValueError):
        FlightPlan([accelerate, ("cruise", None, Dwell(20))])
    with pytest.raises(ValueError):
        FlightPlan([accelerate, ("cruise", None, Dwell(20)), ("cruise", None, Dwell(30)), land])
    with pytest.raises(ValueError):
        FlightPlan([accelerate, ("hover", None, Dwell(20)), land])
    with pytest.raises(ValueError):
        FlightPlan([accelerate, ("cruise", {"fuel": 1.0}, Dwell(20)), land])
    with pytest.raises(ValueError):
        FlightPlan([accelerate, ("cruise", {"altitude": np.nan}, Dwell(20)), land])
    with pytest.raises(TypeError):
        FlightPlan([accelerate, ("cruise", None, 20), land])


def test_FlightPlan_reserved_state_names():
    names = list(statekit.sim.STATE_NAMES) + ["taxi"]
    plan = FlightPlan([("accelerate", None, Dwell(20)), ("land", None, Dwell(20))], state_names=names)
    assert plan.state_names[-1] == "taxi"
    with pytest.raises(ValueError):
        FlightPlan([("accelerate", None, Dwell(20)), ("taxi", None, Dwell(20)), ("land", None, Dwell(20))], state_names=names)


def test_SimConfig():
    cfg = SimConfig(noise_std={"altitude": 2.0}, gains={"cruise": {"throttle_alt_kp": 0.02}}, seed=3)
    assert cfg.noise_std["altitude"] == 2.0
    assert cfg.noise_std["pitch"] == statekit.sim.DEFAULT_NOISE["pitch"]
    assert cfg.gains["cruise"]["throttle_alt_kp"] == 0.02
    assert cfg.with_seed(8).seed == 8
    assert cfg.with_seed(8).noise_std == cfg.noise_std
    with pytest.raises(ValueError):
        SimConfig(noise_std={"throttle": 1.0})
    with pytest.raises(ValueError):
        SimConfig(noise_std={"pitch": -1.0})
    with pytest.raises(ValueError):
        SimConfig(gains={"hover": {}})
    with pytest.raises(ValueError):
        SimConfig(gains={"cruise": {"throttle_alt_kp": -0.1}})
    with pytest.raises(ValueError):
        SimConfig(sample_rate_hz=0)
    with pytest.raises(ValueError):
        SimConfig(min_length=500, max_length=100)


def test_PIController():
    controller = statekit.sim.PIController(2.0, 1.0, limits=(-1.0, 1.0), deadband=0.5)
    assert controller.update(0.4, 1.0) == 0.0
    assert controller.update(0.5, 0.1) == pytest.approx(1.0)
    assert controller.integral == 0.0
    assert controller.update(-0.2, 1.0) == 0.0
    assert controller.update(0.6, 1.0) == 1.0


def test_throttle_command_is_bounded_and_falls_with_altitude():
    setpoints = dict(statekit.sim.DEFAULT_SETPOINTS["cruise"], altitude=500.0)
    for state in ("climb", "cruise", "turn_left", "descend", "approach"):
        gains = statekit.sim.DEFAULT_GAINS[state]
        for airspeed in (0.0, 30.0, 50.0, 80.0):
            commands = [
                statekit.sim.throttle_command(altitude, airspeed, setpoints, gains, altitude_integral=10.0)
                for altitude in np.linspace(0.0, 1500.0, 61)
            ]
            assert all(0.0 <= command <= 1.0 for command in commands)
            assert all(b <= a for a, b in zip(commands, commands[1:]))


def test_generate_flight():
    series, annotation = statekit.sim.generate_flight(short_plan(), quiet)
    assert series.n_channels == 10
    assert series.channel_names == list(statekit.sim.CHANNEL_NAMES)
    assert series.sample_rate_hz == 5.0
    assert annotation.states == short_plan().state_sequence
    assert annotation.entries[0][0] == 0
    assert len(annotation.entries) == 7
    throttle = series.values[:, THROTTLE]
    assert throttle.min() >= 0.0 and throttle.max() <= 1.0


def test_climb_altitude_increases_without_noise():
    series, annotation = statekit.sim.generate_flight(short_plan(), quiet)
    climb = statekit.sim.STATE_NAMES.index("climb")
    step = annotation.states.index(climb)
    start, end = annotation.timestamps[step], annotation.timestamps[step + 1]
    altitude = series.values[start:end, ALTITUDE]
    assert len(altitude) > 10
    assert np.all(np.diff(altitude) > 0)
    assert altitude[-1] < 300.0 - quiet.deadband


def test_generate_flight_is_deterministic():
    cfg = SimConfig(seed=11)
    first, first_annotation = statekit.sim.generate_flight(short_plan(), cfg)
    second, second_annotation = statekit.sim.generate_flight(short_plan(), cfg)
    assert np.array_equal(first.values, second.values)
    assert first_annotation.entries == second_annotation.entries
    other, _ = statekit.sim.generate_flight(short_plan(), cfg.with_seed(12))
    assert not np.array_equal(first.values, other.values)


def test_generate_flight_truncates_with_warning():
    cfg = SimConfig(min_length=50, max_length=100)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        series, annotation = statekit.sim.generate_flight(short_plan(), cfg)
    assert len(series) == 100
    assert any("truncated" in str(warning.message) for warning in caught)
    assert annotation.entries[-1][0] < 100


def test_generate_flight_invalid():
    with pytest.raises(TypeError):
        statekit.sim.generate_flight([("accelerate", None, Dwell(20))])


@pytest.mark.parametrize("seed", range(5))
def test_random_plan(seed):
    plan = statekit.sim.random_plan(seed)
    names = plan.state_sequence_names
    assert names[0] == "accelerate"
    assert names[-1] == "land"
    assert all(a != b for a, b in zip(names, names[1:]))
    assert str(statekit.sim.random_plan(seed)) == str(plan)
    with pytest.raises(ValueError):
        statekit.sim.random_plan(seed, profile="huge")


def test_generate_dataset():
    dataset = statekit.sim.generate_dataset(4, plan_randomizer_seed=3)
    assert len(dataset) == 4
    assert dataset.num_states == 9
    assert dataset.channel_names == list(statekit.sim.CHANNEL_NAMES)
    for _, series, annotation in dataset:
        assert statekit.dataset.MIN_LENGTH <= len(series) <= statekit.sim.PROFILES["desk"]
        assert annotation.states[0] == 0
        assert annotation.states[-1] == statekit.sim.STATE_NAMES.index("land")
        assert series.values[:, THROTTLE].min() >= 0.0
        assert series.values[:, THROTTLE].max() <= 1.0


def test_generate_dataset_is_reproducible():
    a = statekit.sim.generate_dataset(3, plan_randomizer_seed=5)
    b = statekit.sim.generate_dataset(3, plan_randomizer_seed=5)
    for (_, series_a, annotation_a), (_, series_b, annotation_b) in zip(a, b):
        assert np.array_equal(series_a.values, series_b.values)
        assert annotation_a.entries == annotation_b.entries


def test_generate_dataset_invalid():
    with pytest.raises(ValueError):
        statekit.sim.generate_dataset(0)
    with pytest.raises(ValueError):
        statekit.sim.generate_dataset(2, profile="huge")
    with pytest.raises(ValueError):
        statekit.sim.generate_dataset(2, SimConfig(min_length=5000))
