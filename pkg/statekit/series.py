"""
Defines the `MultivariateSeries`, `StateAnnotation`, `LabelSequence`, and
`PaddedBatch` objects, which are used to represent one recorded execution of
a black-box system, and the functions that convert between the sparse
change-point form of a state annotation and the dense per-timestep form that
the models consume.
"""

import numpy as _np


class MultivariateSeries:
    """
    Representation of one execution's input/output recording: *n* aligned
    univariate channels sampled at a fixed rate. Values are stored as a
    read-only `l × n` float array, so a series can be shared freely.
    """

    def __init__(
        self,
        channels,
        *,
        sample_rate_hz: float = 5.0,
        channel_names: list = None,
    ):
        """
        Initialized with:

        - `channels` List of *n* univariate sequences of equal length, e.g.
        `[[0.1, 0.2, 0.3], [5.0, 5.1, 5.3]]`.
        - `sample_rate_hz` Sampling rate in Hertz (5 Hz by default).
        - `channel_names` Optional list of *n* identifiers; defaults to
        `ch0`, `ch1`, ...
        """
        lengths = {len(channel) for channel in channels}
        if len(lengths) > 1:
            raise ValueError(
                f"All channels must have the same length, got lengths {sorted(lengths)}."
            )
        values = _np.ascontiguousarray(_np.array(channels, dtype=float).T)
        self._init_from_values(values, sample_rate_hz, channel_names)

    @classmethod
    def from_array(
        cls, values, *, sample_rate_hz: float = 5.0, channel_names: list = None
    ):
        """
        Create a series from an `l × n` array (one row per sample).
        """
        series = cls.__new__(cls)
        series._init_from_values(
            _np.array(values, dtype=float), sample_rate_hz, channel_names
        )
        return series

    def _init_from_values(self, values, sample_rate_hz, channel_names):
        if values.ndim != 2:
            raise ValueError("A series must be two-dimensional (samples × channels).")
        length, n_channels = values.shape
        if n_channels < 2:
            raise ValueError(f"A series needs at least 2 channels, got {n_channels}.")
        if length < 1:
            raise ValueError("A series needs at least one sample.")
        if not sample_rate_hz > 0:
            raise ValueError(f"sample_rate_hz must be positive, got {sample_rate_hz}.")
        if channel_names is None:
            channel_names = [f"ch{i}" for i in range(n_channels)]
        channel_names = [str(name) for name in channel_names]
        if len(channel_names) != n_channels:
            raise ValueError(
                f"Got {len(channel_names)} channel names for {n_channels} channels."
            )
        values.flags.writeable = False
        self._values = values
        self._sample_rate_hz = float(sample_rate_hz)
        self._channel_names = channel_names

    def __repr__(self):
        return f"MultivariateSeries[{len(self)}×{self.n_channels}]"

    def __len__(self):
        return self._values.shape[0]

    @property
    def values(self):
        """Read-only `l × n` array of samples."""
        return self._values

    @property
    def channels(self) -> list:
        """List of the *n* univariate channels."""
        return [self._values[:, i] for i in range(self.n_channels)]

    @property
    def n_channels(self) -> int:
        """Number of channels (*n*)."""
        return self._values.shape[1]

    @property
    def sample_rate_hz(self) -> float:
        """Sampling rate in Hertz."""
        return self._sample_rate_hz

    @property
    def channel_names(self) -> list:
        """Channel identifiers."""
        return list(self._channel_names)

    @property
    def duration(self) -> float:
        """Duration of the recording in seconds."""
        return len(self) / self._sample_rate_hz

    def with_values(self, values):
        """
        Returns a new series with the same metadata but different values (of
        the same shape).
        """
        values = _np.asarray(values, dtype=float)
        if values.shape != self._values.shape:
            raise ValueError(
                f"Expected values of shape {self._values.shape}, got {values.shape}."
            )
        return MultivariateSeries.from_array(
            values.copy(),
            sample_rate_hz=self._sample_rate_hz,
            channel_names=self._channel_names,
        )

    def serialize(self) -> dict:
        """
        Returns representation of the series as a dictionary for
        serialization.
        """
        return {
            "channels": self._values.T.tolist(),
            "sample_rate_hz": self._sample_rate_hz,
            "channel_names": self.channel_names,
        }


class StateAnnotation:
    """
    Representation of the state history of one execution as an ordered list
    of change points `[(t, s), ...]`, where `t` is the sample index at which
    the system entered state `s`. The first entry is always at `t = 0`.
    """

    def __init__(self, entries, num_states: int, *, length: int = None):
        """
        Initialized with:

        - `entries` List of `(t, state_id)` pairs, e.g. `[(0, 0), (3, 1)]`.
        - `num_states` Number of possible states (N_s).
        - `length` Optional length of the owning series; if given, every
        timestamp must be smaller than it.
        """
        self._num_states = int(num_states)
        if self._num_states < 1:
            raise ValueError(f"num_states must be positive, got {num_states}.")
        self._entries = _validate_entries(entries, self._num_states, length)

    @classmethod
    def from_labels(cls, labels, num_states: int, mask=None):
        """
        Build the annotation implied by a dense label sequence: the initial
        state at `t = 0` followed by every change point.
        """
        states = _states_of(labels)
        if len(states) == 0:
            raise ValueError("Cannot annotate an empty label sequence.")
        entries = [(0, int(states[0]))] + derive_change_points(states, mask)
        return cls(entries, num_states)

    def __repr__(self):
        return f"StateAnnotation{self._entries}"

    def __len__(self):
        return len(self._entries)

    def __iter__(self):
        for entry in self._entries:
            yield entry

    def __getitem__(self, index):
        return self._entries[index]

    def __eq__(self, other):
        if not isinstance(other, StateAnnotation):
            return NotImplemented
        return (
            self._entries == other._entries and self._num_states == other._num_states
        )

    @property
    def entries(self) -> list:
        """List of `(t, state_id)` tuples."""
        return list(self._entries)

    @property
    def num_states(self) -> int:
        """Number of possible states (N_s)."""
        return self._num_states

    @property
    def timestamps(self) -> list:
        """Sample indices of all entries."""
        return [t for t, _ in self._entries]

    @property
    def states(self) -> list:
        """State ids of all entries, in order."""
        return [s for _, s in self._entries]

    @property
    def change_points(self) -> list:
        """Entries after the initial state (i.e. with `t >= 1`)."""
        return self._entries[1:]

    def serialize(self) -> list:
        """
        Returns representation of the annotation in simple list format for
        serialization.
        """
        return [[t, s] for t, s in self._entries]


class LabelSequence:
    """
    Dense per-timestep state labels, optionally carrying their one-hot
    encoding.
    """

    def __init__(self, states, one_hot=None):
        """
        Initialized with:

        - `states` Vector of state ids, one per timestep.
        - `one_hot` Optional `L × N_s` indicator matrix that must agree with
        `states`.
        """
        states = _np.array(states, dtype=int)
        if states.ndim != 1:
            raise ValueError("states must be a one-dimensional vector.")
        if _np.any(states < 0):
            raise ValueError("State ids must be non-negative.")
        if one_hot is not None:
            one_hot = _np.array(one_hot, dtype=float)
            if one_hot.ndim != 2 or one_hot.shape[0] != states.shape[0]:
                raise ValueError(
                    f"one_hot must have one row per state, got shape {one_hot.shape} for {states.shape[0]} states."
                )
            if _np.any(states >= one_hot.shape[1]):
                raise ValueError(
                    f"State ids must lie in [0, {one_hot.shape[1]}) to match one_hot."
                )
            expected = _np.zeros_like(one_hot)
            expected[_np.arange(states.shape[0]), states] = 1.0
            if not _np.array_equal(one_hot, expected):
                raise ValueError("one_hot is not the indicator matrix of states.")
            one_hot.flags.writeable = False
        states.flags.writeable = False
        self._states = states
        self._one_hot = one_hot

    def __repr__(self):
        return f"LabelSequence[{len(self)}]"

    def __len__(self):
        return self._states.shape[0]

    def __eq__(self, other):
        if not isinstance(other, LabelSequence):
            return NotImplemented
        return _np.array_equal(self._states, other._states)

    @property
    def states(self):
        """Read-only vector of state ids."""
        return self._states

    @property
    def one_hot(self):
        """The `L × N_s` one-hot form, or `None` if not computed."""
        return self._one_hot

    def with_one_hot(self, num_states: int):
        """
        Returns a copy of the sequence that also carries its one-hot form.
        """
        return LabelSequence(self._states, one_hot_encode(self._states, num_states))

    def truncate(self, length: int):
        """
        Returns the first `length` labels.
        """
        one_hot = None if self._one_hot is None else self._one_hot[:length]
        return LabelSequence(self._states[:length], one_hot)


class PaddedBatch:
    """
    A series zero-padded to a fixed length together with its validity mask.
    It is not usually necessary to create `PaddedBatch` objects manually; use
    `pad_and_mask()`.
    """

    def __init__(self, data, mask, original_length: int):
        data = _np.asarray(data, dtype=float)
        mask = _np.asarray(mask, dtype=float)
        if data.ndim != 2 or mask.shape != (data.shape[0],):
            raise ValueError("data must be L × n and mask must have length L.")
        original_length = int(original_length)
        expected_mask = _np.arange(data.shape[0]) < original_length
        if not _np.array_equal(mask.astype(bool), expected_mask):
            raise ValueError("mask must be 1 before original_length and 0 after.")
        if _np.any(data[original_length:] != 0):
            raise ValueError("Padded rows must be all-zero.")
        data.flags.writeable = False
        mask.flags.writeable = False
        self._data = data
        self._mask = mask
        self._original_length = original_length

    def __repr__(self):
        return f"PaddedBatch[{self._original_length}/{len(self)}]"

    def __len__(self):
        return self._data.shape[0]

    @property
    def data(self):
        """`L × n` array, zero beyond the original length."""
        return self._data

    @property
    def mask(self):
        """Length-`L` vector of ones (real data) and zeros (padding)."""
        return self._mask

    @property
    def original_length(self) -> int:
        """Length of the series before padding."""
        return self._original_length


def pad_and_mask(series, target_length: int) -> PaddedBatch:
    """
    Zero-pad a `MultivariateSeries` (or an `l × n` array) to `target_length`
    rows and build the matching mask, which is 1 for the first *l* positions
    and 0 for the padded tail.
    """
    values = _values_of(series)
    length, n_channels = values.shape
    target_length = int(target_length)
    if length > target_length:
        raise ValueError(
            f"Series length ({length}) exceeds the target length ({target_length})."
        )
    data = _np.zeros((target_length, n_channels))
    data[:length] = values
    mask = _np.zeros(target_length)
    mask[:length] = 1.0
    return PaddedBatch(data, mask, length)


def expand_labels(annotation, length: int, num_states: int = None) -> LabelSequence:
    """
    Expand a change-point annotation into a dense label sequence of `length`
    elements: each position holds the state of the latest entry whose
    timestamp is at or before it. Positions past the owning series (the
    padded tail) repeat the final state. `annotation` may be a
    `StateAnnotation` or a list of `(t, state_id)` pairs. State ids must lie
    in `[0, num_states)`, where `num_states` defaults to that of the
    annotation.
    """
    if num_states is None and isinstance(annotation, StateAnnotation):
        num_states = annotation.num_states
    entries = list(annotation)
    if not entries:
        raise ValueError("Cannot expand an empty annotation.")
    length = int(length)
    timestamps = _np.array([t for t, _ in entries], dtype=int)
    states = _np.array([s for _, s in entries], dtype=int)
    if timestamps[0] != 0:
        raise ValueError(f"The first entry must be at t=0, got t={timestamps[0]}.")
    if _np.any(_np.diff(timestamps) <= 0):
        raise ValueError("Annotation timestamps must be strictly increasing.")
    if _np.any(states < 0) or (num_states is not None and _np.any(states >= num_states)):
        raise ValueError(
            f"Annotation state ids must lie in [0, {num_states}), got {states.tolist()}."
            if num_states is not None
            else f"Annotation state ids must be non-negative, got {states.tolist()}."
        )
    if timestamps[-1] >= length:
        raise ValueError(
            f"Annotation timestamp {timestamps[-1]} is out of range for length {length}."
        )
    index = _np.searchsorted(timestamps, _np.arange(length), side="right") - 1
    return LabelSequence(states[index])


def one_hot_encode(labels, num_states: int):
    """
    Return the `L × N_s` one-hot matrix of a `LabelSequence` (or vector of
    state ids). Row *t* is the indicator vector of the state at *t*.
    """
    states = _states_of(labels)
    num_states = int(num_states)
    if states.size and (states.min() < 0 or states.max() >= num_states):
        raise ValueError(
            f"State ids must lie in [0, {num_states}), got range [{states.min()}, {states.max()}]."
        )
    one_hot = _np.zeros((states.shape[0], num_states))
    one_hot[_np.arange(states.shape[0]), states] = 1.0
    return one_hot


def decode_one_hot(probabilities) -> LabelSequence:
    """
    Decode an `L × N_s` matrix of scores or probabilities into labels by
    row-wise argmax; ties go to the lowest state id.
    """
    probabilities = _np.asarray(probabilities, dtype=float)
    return LabelSequence(probabilities.argmax(axis=1))


def derive_change_points(labels, mask=None) -> list:
    """
    Return the change points implied by a dense label sequence: every
    `(t, state)` with `t >= 1` where the state differs from the previous one,
    restricted to unmasked positions. The initial state is not a change, so
    `t = 0` never appears.
    """
    states = _states_of(labels)
    valid = _np.ones(states.shape[0], dtype=bool)
    if mask is not None:
        valid = _np.asarray(mask).astype(bool)
        if valid.shape != states.shape:
            raise ValueError(
                f"mask has length {valid.shape[0]} but labels have length {states.shape[0]}."
            )
    changed = _np.flatnonzero((states[1:] != states[:-1]) & valid[1:] & valid[:-1]) + 1
    return [(int(t), int(states[t])) for t in changed]


def _validate_entries(entries, num_states, length):
    entries = [(int(t), int(s)) for t, s in entries]
    if not entries:
        raise ValueError("An annotation must contain at least the initial state.")
    if entries[0][0] != 0:
        raise ValueError(f"The first entry must be at t=0, got t={entries[0][0]}.")
    for (t_prev, s_prev), (t, s) in zip(entries[:-1], entries[1:]):
        if t <= t_prev:
            raise ValueError(
                f"Timestamps must be strictly increasing ({t_prev} is followed by {t})."
            )
        if s == s_prev:
            raise ValueError(f"Consecutive entries at t={t_prev} and t={t} share state {s}.")
    for t, s in entries:
        if not 0 <= s < num_states:
            raise ValueError(f"State id {s} at t={t} is not in [0, {num_states}).")
        if length is not None and t >= length:
            raise ValueError(f"Timestamp {t} is out of range for length {length}.")
    return entries


def _values_of(series):
    if isinstance(series, MultivariateSeries):
        return series.values
    values = _np.asarray(series, dtype=float)
    if values.ndim != 2:
        _fail(series, "MultivariateSeries or a 2D array")
    return values


def _states_of(labels):
    if isinstance(labels, LabelSequence):
        return labels.states
    return _np.asarray(labels, dtype=int)


def _fail(obj, expectation):
    raise TypeError(f"Expected {expectation}, got {obj.__class__.__name__}")


def _is_MultivariateSeries(series):
    if not isinstance(series, MultivariateSeries):
        _fail(series, "MultivariateSeries")


def _is_StateAnnotation(annotation):
    if not isinstance(annotation, StateAnnotation):
        _fail(annotation, "StateAnnotation")
