"""
Synthetic flight generator. A scripted flight plan walks an autopilot through
a sequence of states; in each state proportional-integral controllers steer
a point-mass aircraft toward the state's setpoints. The generator records
five sensor channels (pitch, roll, yaw, altitude, airspeed), five control
channels (elevator, aileron, rudder, throttle, flaps), and the sample at
which each state was entered.

The model makes no claim of aerodynamic fidelity. It produces data in which
the relationship between inputs and outputs differs from state to state and
in which state boundaries leave a trace in the signals.
"""

import logging as _logging
import warnings as _warnings
import numpy as _np
from .series import MultivariateSeries, StateAnnotation
from .dataset import Dataset as _Dataset, MIN_LENGTH, MAX_LENGTH

_logger = _logging.getLogger(__name__)

STATE_NAMES = (
    "accelerate",
    "takeoff",
    "climb",
    "cruise",
    "turn_left",
    "turn_right",
    "descend",
    "approach",
    "land",
)
SENSOR_CHANNELS = ("pitch", "roll", "yaw", "altitude", "airspeed")
CONTROL_CHANNELS = ("elevator", "aileron", "rudder", "throttle", "flaps")
CHANNEL_NAMES = SENSOR_CHANNELS + CONTROL_CHANNELS
MIN_DWELL = 10
QUANTITIES = ("altitude", "airspeed", "heading_change")
PROFILES = {"desk": 3000, "paper-scale": MAX_LENGTH}

# Per-state setpoints. `altitude` is carried over from the previous step when
# a plan step does not set it; `pitch` and `roll` fix the attitude command.
DEFAULT_SETPOINTS = {
    "accelerate": {"airspeed": 40.0, "pitch": 0.0, "roll": 0.0, "flaps": 0.3, "throttle_base": 0.2},
    "takeoff": {"airspeed": 45.0, "pitch": 10.0, "roll": 0.0, "flaps": 0.3, "throttle_base": 1.0},
    "climb": {"altitude": 600.0, "airspeed": 50.0, "roll": 0.0, "flaps": 0.0, "throttle_base": 0.85},
    "cruise": {"airspeed": 50.0, "roll": 0.0, "flaps": 0.0, "throttle_base": 0.55},
    "turn_left": {"airspeed": 50.0, "roll": -25.0, "flaps": 0.0, "throttle_base": 0.6},
    "turn_right": {"airspeed": 50.0, "roll": 25.0, "flaps": 0.0, "throttle_base": 0.6},
    "descend": {"altitude": 300.0, "airspeed": 45.0, "roll": 0.0, "flaps": 0.0, "throttle_base": 0.25},
    "approach": {"altitude": 60.0, "airspeed": 35.0, "roll": 0.0, "flaps": 0.8, "throttle_base": 0.35},
    "land": {"altitude": 0.0, "airspeed": 0.0, "roll": 0.0, "flaps": 1.0, "throttle_base": 0.0},
}

# Per-state controller gains. Altitude feeds the pitch command (pitch_kp,
# pitch_ki, in degrees per meter) and the throttle command (throttle_alt_kp,
# throttle_alt_ki); airspeed feeds the throttle (throttle_speed_kp/ki).
_ZERO_GAINS = {
    "pitch_kp": 0.0,
    "pitch_ki": 0.0,
    "throttle_alt_kp": 0.0,
    "throttle_alt_ki": 0.0,
    "throttle_speed_kp": 0.0,
    "throttle_speed_ki": 0.0,
    "roll_kp": 1.0,
}
DEFAULT_GAINS = {
    "accelerate": {**_ZERO_GAINS, "throttle_speed_kp": 0.1},
    "takeoff": dict(_ZERO_GAINS),
    "climb": {**_ZERO_GAINS, "pitch_kp": 0.05, "pitch_ki": 0.0005, "throttle_speed_kp": 0.02},
    "cruise": {
        **_ZERO_GAINS,
        "pitch_kp": 0.08,
        "pitch_ki": 0.001,
        "throttle_alt_kp": 0.01,
        "throttle_alt_ki": 0.0002,
        "throttle_speed_kp": 0.05,
        "throttle_speed_ki": 0.001,
    },
    "turn_left": {**_ZERO_GAINS, "pitch_kp": 0.08, "pitch_ki": 0.001, "throttle_alt_kp": 0.015, "throttle_speed_kp": 0.04},
    "turn_right": {**_ZERO_GAINS, "pitch_kp": 0.08, "pitch_ki": 0.001, "throttle_alt_kp": 0.015, "throttle_speed_kp": 0.04},
    "descend": {**_ZERO_GAINS, "pitch_kp": 0.04, "pitch_ki": 0.0005, "throttle_speed_kp": 0.01},
    "approach": {**_ZERO_GAINS, "pitch_kp": 0.06, "pitch_ki": 0.0005, "throttle_speed_kp": 0.08, "throttle_speed_ki": 0.002},
    "land": {**_ZERO_GAINS, "pitch_kp": 0.05},
}
DEFAULT_NOISE = {"pitch": 0.1, "roll": 0.1, "yaw": 0.2, "altitude": 0.5, "airspeed": 0.2}

_PITCH_LIMITS = {"land": (-4.0, 2.0), "descend": (-10.0, 5.0)}
_DEFAULT_PITCH_LIMITS = (-10.0, 15.0)
_ROTATE_SPEED = 30.0
_SURFACE_LAG = 0.2
_FLAPS_LAG = 2.0


class Dwell:
    """
    How long a plan step lasts: either a fixed number of samples or until a
    simulated quantity crosses a threshold.
    """

    def __init__(
        self,
        duration: int = None,
        *,
        quantity: str = None,
        threshold: float = None,
        direction: str = "above",
        timeout: int = 3000,
    ):
        """
        Initialized with:

        - `duration` Number of samples (at least 10).
        - `quantity` One of `altitude`, `airspeed`, or `heading_change`
        (absolute heading change since the step began, in degrees).
        - `threshold` Value the quantity must reach.
        - `direction` `above` or `below`.
        - `timeout` Maximum number of samples to wait for the threshold.
        """
        if (duration is None) == (quantity is None):
            raise ValueError("A dwell needs either a duration or a threshold quantity.")
        if duration is not None:
            duration = int(duration)
            if duration < MIN_DWELL:
                raise ValueError(f"Dwell durations must be at least {MIN_DWELL} samples, got {duration}.")
        else:
            if quantity not in QUANTITIES:
                raise ValueError(f"Unknown dwell quantity {quantity!r}; use one of {QUANTITIES}.")
            if threshold is None:
                raise ValueError(f"A {quantity} dwell needs a threshold.")
            if direction not in ("above", "below"):
                raise ValueError(f"direction must be 'above' or 'below', got {direction!r}.")
            timeout = int(timeout)
            if timeout < MIN_DWELL:
                raise ValueError(f"Dwell timeouts must be at least {MIN_DWELL} samples, got {timeout}.")
        self._duration = duration
        self._quantity = quantity
        self._threshold = None if threshold is None else float(threshold)
        self._direction = direction
        self._timeout = timeout

    def __repr__(self):
        if self._duration is not None:
            return f"Dwell[{self._duration} samples]"
        return f"Dwell[{self._quantity} {self._direction} {self._threshold}]"

    @property
    def duration(self) -> int:
        """Fixed number of samples, or `None` for a threshold dwell"""
        return self._duration

    @property
    def quantity(self) -> str:
        """Watched quantity of a threshold dwell"""
        return self._quantity

    @property
    def threshold(self) -> float:
        """Threshold value of a threshold dwell"""
        return self._threshold

    @property
    def direction(self) -> str:
        """Crossing direction of a threshold dwell"""
        return self._direction

    @property
    def timeout(self) -> int:
        """Maximum wait of a threshold dwell"""
        return self._timeout

    def reached(self, elapsed: int, value: float) -> bool:
        """
        Whether the step is over after `elapsed` samples, given the current
        value of the watched quantity.
        """
        if self._duration is not None:
            return elapsed >= self._duration
        if elapsed < MIN_DWELL:
            return False
        if self._direction == "above":
            return value >= self._threshold
        return value <= self._threshold

    def serialize(self) -> dict:
        if self._duration is not None:
            return {"duration": self._duration}
        return {
            "quantity": self._quantity,
            "threshold": self._threshold,
            "direction": self._direction,
            "timeout": self._timeout,
        }


class FlightPlan:
    """
    Ordered list of plan steps, each a state, its setpoints, and a dwell
    condition. A plan starts with `accelerate` and ends with `land`.
    """

    def __init__(self, steps: list, *, state_names=STATE_NAMES):
        """
        Initialized with:

        - `steps` List of `(state, setpoints, dwell)` tuples. `state` is a
        state name or id, `setpoints` a dictionary overriding the state's
        default setpoints (or `None`), and `dwell` a `Dwell`.
        - `state_names` State vocabulary; position is the state id. Names
        without simulated behavior may be included to reserve ids.
        """
        self._state_names = [str(name) for name in state_names]
        if len(set(self._state_names)) != len(self._state_names):
            raise ValueError("State names must be unique.")
        steps = list(steps)
        if not steps:
            raise ValueError("A flight plan needs at least one step.")
        self._steps = []
        for state, setpoints, dwell in steps:
            state = self._state_id(state)
            name = self._state_names[state]
            if name not in DEFAULT_SETPOINTS:
                raise ValueError(f"State {name!r} has no simulated behavior.")
            if not isinstance(dwell, Dwell):
                raise TypeError(f"Expected Dwell, got {dwell.__class__.__name__}")
            setpoints = dict(setpoints or {})
            for key, value in setpoints.items():
                if key not in DEFAULT_SETPOINTS["cruise"] and key not in ("altitude", "pitch"):
                    raise ValueError(f"Unknown setpoint {key!r} in step {len(self._steps)}.")
                if not _np.isfinite(value):
                    raise ValueError(f"Setpoint {key} must be finite, got {value}.")
            self._steps.append((state, setpoints, dwell))
        if self._state_names[self._steps[0][0]] != "accelerate":
            raise ValueError("A flight plan must begin with accelerate.")
        if self._state_names[self._steps[-1][0]] != "land":
            raise ValueError("A flight plan must end with land.")
        for i in range(1, len(self._steps)):
            if self._steps[i][0] == self._steps[i - 1][0]:
                raise ValueError(
                    f"Steps {i - 1} and {i} repeat state {self._state_names[self._steps[i][0]]!r}."
                )

    def __repr__(self):
        return f"FlightPlan[{', '.join(self.state_sequence_names)}]"

    def __len__(self):
        return len(self._steps)

    def __iter__(self):
        for step in self._steps:
            yield step

    @property
    def steps(self) -> list:
        """List of `(state_id, setpoints, dwell)` tuples"""
        return list(self._steps)

    @property
    def state_names(self) -> list:
        """State vocabulary"""
        return list(self._state_names)

    @property
    def state_sequence(self) -> list:
        """State ids of the steps, in order"""
        return [state for state, _, _ in self._steps]

    @property
    def state_sequence_names(self) -> list:
        """State names of the steps, in order"""
        return [self._state_names[state] for state, _, _ in self._steps]

    def serialize(self) -> list:
        return [
            {"state": self._state_names[state], "setpoints": setpoints, "dwell": dwell.serialize()}
            for state, setpoints, dwell in self._steps
        ]

    def _state_id(self, state):
        if isinstance(state, str):
            if state not in self._state_names:
                raise ValueError(f"Unknown state {state!r}.")
            return self._state_names.index(state)
        state = int(state)
        if not 0 <= state < len(self._state_names):
            raise ValueError(f"State id {state} is not in [0, {len(self._state_names)}).")
        return state


class SimConfig:
    """
    Simulator settings: sensor noise, controller gains, sampling rate, seed,
    and flight length bounds.
    """

    def __init__(
        self,
        *,
        noise_std: dict = None,
        gains: dict = None,
        sample_rate_hz: float = 5.0,
        seed: int = 0,
        min_length: int = MIN_LENGTH,
        max_length: int = MAX_LENGTH,
        deadband: float = 5.0,
    ):
        """
        Initialized with:

        - `noise_std` Gaussian noise standard deviation per sensor channel;
        missing channels take the defaults.
        - `gains` Per-state overrides of the controller gains, e.g.
        `{"cruise": {"throttle_alt_kp": 0.02}}`.
        - `sample_rate_hz` Sampling rate.
        - `seed` Seed of the sensor noise.
        - `min_length`, `max_length` Bounds on the number of samples.
        - `deadband` Altitude error (meters) below which the altitude
        controllers treat the error as zero.
        """
        self._noise_std = dict(DEFAULT_NOISE)
        for channel, std in (noise_std or {}).items():
            if channel not in SENSOR_CHANNELS:
                raise ValueError(f"Unknown sensor channel {channel!r}.")
            std = float(std)
            if not std >= 0:
                raise ValueError(f"Noise std of {channel} must be non-negative, got {std}.")
            self._noise_std[channel] = std
        self._gains = {state: dict(values) for state, values in DEFAULT_GAINS.items()}
        for state, values in (gains or {}).items():
            if state not in self._gains:
                raise ValueError(f"Unknown state {state!r} in gains.")
            for key, value in values.items():
                if key not in _ZERO_GAINS:
                    raise ValueError(f"Unknown gain {key!r} for state {state!r}.")
                value = float(value)
                if not _np.isfinite(value):
                    raise ValueError(f"Gain {state}.{key} must be finite, got {value}.")
                if key.startswith("throttle_alt") and value < 0:
                    raise ValueError(f"Gain {state}.{key} must be non-negative, got {value}.")
                self._gains[state][key] = value
        self.sample_rate_hz = float(sample_rate_hz)
        if not self.sample_rate_hz > 0:
            raise ValueError(f"sample_rate_hz must be positive, got {sample_rate_hz}.")
        self.seed = int(seed)
        self.min_length = int(min_length)
        self.max_length = int(max_length)
        if not 1 <= self.min_length <= self.max_length:
            raise ValueError(f"Invalid length bounds [{min_length}, {max_length}].")
        self.deadband = float(deadband)
        if self.deadband < 0:
            raise ValueError(f"deadband must be non-negative, got {deadband}.")

    def __repr__(self):
        return f"SimConfig[seed={self.seed}, {self.sample_rate_hz} Hz]"

    @property
    def noise_std(self) -> dict:
        """Noise standard deviation per sensor channel"""
        return dict(self._noise_std)

    @property
    def gains(self) -> dict:
        """Controller gains per state"""
        return {state: dict(values) for state, values in self._gains.items()}

    def with_seed(self, seed: int):
        """
        Return a copy of the config with a different noise seed.
        """
        config = SimConfig(
            noise_std=self._noise_std,
            gains=self._gains,
            sample_rate_hz=self.sample_rate_hz,
            seed=seed,
            min_length=self.min_length,
            max_length=self.max_length,
            deadband=self.deadband,
        )
        return config

    def serialize(self) -> dict:
        return {
            "noise_std": self.noise_std,
            "gains": self.gains,
            "sample_rate_hz": self.sample_rate_hz,
            "seed": self.seed,
            "min_length": self.min_length,
            "max_length": self.max_length,
            "deadband": self.deadband,
        }


class PIController:
    """
    Proportional-integral controller with an error deadband and output
    limits. The integral only accumulates while the output is not saturated.
    """

    def __init__(self, kp: float, ki: float, *, limits=(-_np.inf, _np.inf), deadband: float = 0.0):
        self.kp = float(kp)
        self.ki = float(ki)
        self.limits = (float(limits[0]), float(limits[1]))
        self.deadband = float(deadband)
        self.integral = 0.0

    def __repr__(self):
        return f"PIController[kp={self.kp}, ki={self.ki}]"

    def reset(self):
        self.integral = 0.0

    def update(self, error: float, dt: float) -> float:
        if abs(error) < self.deadband:
            error = 0.0
        raw = self.kp * error + self.ki * (self.integral + error * dt)
        output = min(max(raw, self.limits[0]), self.limits[1])
        if output == raw:
            self.integral += error * dt
        return output


def throttle_command(
    altitude: float,
    airspeed: float,
    setpoints: dict,
    gains: dict,
    *,
    altitude_integral: float = 0.0,
    speed_integral: float = 0.0,
) -> float:
    """
    Throttle in [0, 1] requested by a state's altitude-hold and airspeed
    loops. For fixed integrals the command never increases with altitude,
    since altitude gains are non-negative.
    """
    raw = setpoints.get("throttle_base", 0.5)
    if "altitude" in setpoints:
        raw += gains["throttle_alt_kp"] * (setpoints["altitude"] - altitude)
        raw += gains["throttle_alt_ki"] * altitude_integral
    raw += gains["throttle_speed_kp"] * (setpoints["airspeed"] - airspeed)
    raw += gains["throttle_speed_ki"] * speed_integral
    return float(min(max(raw, 0.0), 1.0))


def generate_flight(plan: FlightPlan, cfg: SimConfig = None):
    """
    Simulate one flight and return the `MultivariateSeries` of the ten
    channels together with its `StateAnnotation`. Flights longer than
    `cfg.max_length` are cut off with a warning. The result depends only on
    the plan and the config (including its seed).
    """
    if not isinstance(plan, FlightPlan):
        raise TypeError(f"Expected FlightPlan, got {plan.__class__.__name__}")
    if cfg is None:
        cfg = SimConfig()
    values, entries, finished, timeouts = _simulate(plan, cfg)
    for step, elapsed in timeouts:
        _warnings.warn(
            f"Step {step} ({plan.state_names[plan.steps[step][0]]}) timed out after {elapsed} samples before reaching its threshold.",
            stacklevel=2,
        )
    if not finished:
        _warnings.warn(
            f"Flight truncated at {cfg.max_length} samples before the plan finished.",
            stacklevel=2,
        )
    return _package(values, entries, plan, cfg)


def random_plan(rng, *, profile: str = "desk", state_names=STATE_NAMES, long_fraction: float = 0.5):
    """
    Draw a random flight plan. With probability `long_fraction` the plan
    follows a long multi-leg template, otherwise a short circuit, which gives
    a bimodal distribution of flight lengths. Dwell times scale with the
    profile (`desk` or `paper-scale`).
    """
    if profile not in PROFILES:
        raise ValueError(f"Unknown profile {profile!r}; use one of {tuple(PROFILES)}.")
    rng = _np.random.default_rng(rng)
    scale = PROFILES[profile] / PROFILES["desk"]

    def hold(low, high):
        return Dwell(int(max(MIN_DWELL, rng.integers(low, high + 1) * scale)))

    cruise_altitude = float(rng.uniform(300.0, 1200.0))
    steps = [
        ("accelerate", None, Dwell(quantity="airspeed", threshold=float(rng.uniform(33, 38)), timeout=400)),
        ("takeoff", None, Dwell(quantity="altitude", threshold=float(rng.uniform(15, 30)), timeout=400)),
        ("climb", {"altitude": cruise_altitude}, Dwell(quantity="altitude", threshold=cruise_altitude - 10.0, timeout=int(1500 * scale))),
    ]
    legs = 1 if rng.random() >= long_fraction else int(rng.integers(3, 6))
    altitude = cruise_altitude
    for _ in range(legs):
        steps.append(("cruise", {"altitude": altitude}, hold(40, 160 if legs == 1 else 220)))
        turn = "turn_left" if rng.random() < 0.5 else "turn_right"
        steps.append((turn, {"altitude": altitude}, hold(20, 80)))
        if legs > 1:
            target = float(_np.clip(altitude + rng.uniform(-400, 400), 250.0, 1500.0))
            change = "climb" if target > altitude else "descend"
            direction = "above" if change == "climb" else "below"
            offset = -10.0 if change == "climb" else 10.0
            steps.append(
                (change, {"altitude": target}, Dwell(quantity="altitude", threshold=target + offset, direction=direction, timeout=int(1000 * scale)))
            )
            altitude = target
    steps.append(("cruise", {"altitude": altitude}, hold(20, 80)))
    descend_to = float(rng.uniform(150.0, 250.0))
    steps.append(("descend", {"altitude": descend_to}, Dwell(quantity="altitude", threshold=descend_to + 10.0, direction="below", timeout=int(1500 * scale))))
    steps.append(("approach", None, Dwell(quantity="altitude", threshold=70.0, direction="below", timeout=int(800 * scale))))
    steps.append(("land", None, hold(40, 120)))
    merged = [steps[0]]
    for step in steps[1:]:
        if step[0] == merged[-1][0]:
            continue
        merged.append(step)
    return FlightPlan(merged, state_names=state_names)


def generate_dataset(
    num_flights: int,
    cfg: SimConfig = None,
    plan_randomizer_seed: int = 0,
    *,
    profile: str = "desk",
    state_names=STATE_NAMES,
    max_attempts: int = 50,
    n_jobs: int = 1,
) -> _Dataset:
    """
    Generate `num_flights` flights from random plans. Each flight draws its
    plan and noise seed from its own child of `plan_randomizer_seed`, so the
    dataset does not depend on `n_jobs`. Plans whose flights fall outside
    `[cfg.min_length, min(cfg.max_length, profile bound)]` are redrawn.
    """
    num_flights = int(num_flights)
    if num_flights < 1:
        raise ValueError(f"num_flights must be at least 1, got {num_flights}.")
    if profile not in PROFILES:
        raise ValueError(f"Unknown profile {profile!r}; use one of {tuple(PROFILES)}.")
    if cfg is None:
        cfg = SimConfig()
    max_length = min(cfg.max_length, PROFILES[profile])
    if max_length < cfg.min_length:
        raise ValueError(
            f"Profile {profile!r} allows at most {max_length} samples, below min_length {cfg.min_length}."
        )
    children = _np.random.SeedSequence(int(plan_randomizer_seed)).spawn(num_flights)
    jobs = [(child, cfg, max_length, profile, state_names, max_attempts) for child in children]
    if n_jobs == 1:
        samples = [_generate_one(*job) for job in jobs]
    else:
        from joblib import Parallel, delayed

        samples = Parallel(n_jobs=n_jobs)(delayed(_generate_one)(*job) for job in jobs)
    lengths = [len(series) for series, _ in samples]
    _logger.info(
        "Generated %d flights: min length %d, median %d, max %d",
        num_flights,
        min(lengths),
        int(_np.median(lengths)),
        max(lengths),
    )
    return _Dataset(samples, state_names=state_names)


def _generate_one(seed_sequence, cfg, max_length, profile, state_names, max_attempts):
    rng = _np.random.default_rng(seed_sequence)
    for _ in range(max_attempts):
        plan = random_plan(rng, profile=profile, state_names=state_names)
        flight_cfg = cfg.with_seed(int(rng.integers(2**31)))
        values, entries, finished, _ = _simulate(plan, flight_cfg, max_length=max_length)
        if finished and values.shape[0] >= cfg.min_length:
            return _package(values, entries, plan, flight_cfg)
    raise ValueError(
        f"Could not draw a flight within [{cfg.min_length}, {max_length}] samples in {max_attempts} attempts."
    )


def _package(values, entries, plan, cfg):
    series = MultivariateSeries.from_array(
        values, sample_rate_hz=cfg.sample_rate_hz, channel_names=list(CHANNEL_NAMES)
    )
    annotation = StateAnnotation(entries, len(plan.state_names), length=len(series))
    return series, annotation


def _simulate(plan, cfg, max_length=None):
    """
    Run the plan. Returns the `l × 10` value matrix, the annotation entries,
    whether the plan finished within the length bound, and the list of
    `(step, elapsed)` threshold timeouts.
    """
    if max_length is None:
        max_length = cfg.max_length
    rng = _np.random.default_rng(cfg.seed)
    dt = 1.0 / cfg.sample_rate_hz
    surface_alpha = dt / (_SURFACE_LAG + dt)
    flaps_alpha = dt / (_FLAPS_LAG + dt)
    noise = _np.array([cfg.noise_std[channel] for channel in SENSOR_CHANNELS])
    pitch = roll = heading = altitude = airspeed = 0.0
    elevator = aileron = rudder = 0.0
    flaps = DEFAULT_SETPOINTS["accelerate"]["flaps"]
    altitude_target = 0.0
    rows = []
    entries = []
    timeouts = []
    finished = True
    for step, (state, overrides, dwell) in enumerate(plan.steps):
        if len(rows) >= max_length:
            finished = False
            break
        name = plan.state_names[state]
        setpoints = dict(DEFAULT_SETPOINTS[name])
        if name in ("cruise", "turn_left", "turn_right"):
            setpoints["altitude"] = altitude_target
        setpoints.update(overrides)
        if "altitude" in setpoints:
            altitude_target = setpoints["altitude"]
        gains = cfg.gains[name]
        low, high = _PITCH_LIMITS.get(name, _DEFAULT_PITCH_LIMITS)
        pitch_loop = PIController(gains["pitch_kp"], gains["pitch_ki"], limits=(low, high), deadband=cfg.deadband)
        altitude_integral = speed_integral = 0.0
        entries.append((len(rows), state))
        entry_heading = heading
        elapsed = 0
        while True:
            # attitude commands
            if "pitch" in setpoints:
                pitch_command = setpoints["pitch"]
            else:
                pitch_command = pitch_loop.update(setpoints["altitude"] - altitude, dt)
            airborne = altitude > 0.0 or airspeed >= _ROTATE_SPEED
            if not airborne or (altitude <= 0.0 and name in ("accelerate", "land")):
                pitch_command = 0.0
            roll_command = setpoints["roll"] if altitude > 0.0 else 0.0
            # throttle
            altitude_error = setpoints.get("altitude", altitude) - altitude
            if abs(altitude_error) < cfg.deadband:
                altitude_error = 0.0
            throttle = throttle_command(
                altitude,
                airspeed,
                setpoints,
                gains,
                altitude_integral=altitude_integral,
                speed_integral=speed_integral,
            )
            altitude_integral += altitude_error * dt
            speed_integral += (setpoints["airspeed"] - airspeed) * dt
            # control surfaces with first-order lag
            elevator += surface_alpha * (_clip(pitch_command - pitch, 25.0) - elevator)
            aileron += surface_alpha * (_clip(gains["roll_kp"] * (roll_command - roll), 20.0) - aileron)
            rudder += surface_alpha * (_clip(0.2 * roll, 10.0) - rudder)
            flaps += flaps_alpha * (setpoints["flaps"] - flaps)
            # point-mass kinematics
            pitch += elevator * dt
            roll += aileron * dt
            if airspeed > 1.0:
                heading += _np.degrees(9.81 * _np.tan(_np.radians(roll)) / airspeed) * dt
            drag = 0.08 + 0.04 * flaps
            if altitude <= 0.0 and name == "land":
                drag += 0.3
            airspeed += (6.0 * throttle - drag * airspeed - 9.81 * 0.3 * _np.sin(_np.radians(pitch))) * dt
            airspeed = max(airspeed, 0.0)
            altitude = max(altitude + airspeed * _np.sin(_np.radians(pitch)) * dt, 0.0)
            if altitude <= 0.0:
                pitch = min(pitch, 0.0) if name != "takeoff" else pitch
            sensors = _np.array([pitch, roll, heading % 360.0, altitude, airspeed])
            sensors = sensors + noise * rng.standard_normal(5)
            rows.append(_np.concatenate([sensors, [elevator, aileron, rudder, throttle, flaps]]))
            elapsed += 1
            value = {
                "altitude": altitude,
                "airspeed": airspeed,
                "heading_change": abs(heading - entry_heading),
            }.get(dwell.quantity, 0.0)
            if dwell.reached(elapsed, value):
                break
            if dwell.duration is None and elapsed >= dwell.timeout:
                timeouts.append((step, elapsed))
                break
            if len(rows) >= max_length:
                finished = False
                break
    return _np.array(rows), entries, finished, timeouts


def _clip(value, limit):
    return min(max(value, -limit), limit)
