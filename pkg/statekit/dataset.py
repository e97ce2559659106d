"""
Defines the `Dataset` and `Normalizer` objects, which hold a collection of
labeled executions together with their train/validation/test assignment and
the per-channel normalization statistics.
"""

import warnings as _warnings
import numpy as _np
from .series import (
    StateAnnotation as _StateAnnotation,
    _is_MultivariateSeries,
    _fail,
)

SPLITS = ("train", "validation", "test")
DEFAULT_FRACTIONS = (0.9, 0.05, 0.05)
MIN_LENGTH = 200
MAX_LENGTH = 20000


class Normalizer:
    """
    Per-channel affine normalization `(x - mean) / std`. Channels with zero
    variance keep `std = 1`, so they are only centered.
    """

    def __init__(self, mean, std):
        mean = _np.array(mean, dtype=float)
        std = _np.array(std, dtype=float)
        if mean.shape != std.shape or mean.ndim != 1:
            raise ValueError("mean and std must be vectors of the same length.")
        if _np.any(std <= 0):
            raise ValueError("std must be strictly positive.")
        mean.flags.writeable = False
        std.flags.writeable = False
        self._mean = mean
        self._std = std

    def __repr__(self):
        return f"Normalizer[{self.n_channels}]"

    def __eq__(self, other):
        if not isinstance(other, Normalizer):
            return NotImplemented
        return _np.array_equal(self._mean, other._mean) and _np.array_equal(
            self._std, other._std
        )

    @property
    def mean(self):
        """Per-channel means."""
        return self._mean

    @property
    def std(self):
        """Per-channel standard deviations (population form)."""
        return self._std

    @property
    def n_channels(self) -> int:
        """Number of channels the statistics were computed for."""
        return self._mean.shape[0]

    def apply(self, series):
        """
        Normalize a `MultivariateSeries`, returning a new series.
        """
        values = self._check(series)
        return series.with_values((values - self._mean) / self._std)

    def invert(self, series):
        """
        Undo `apply()`, returning a new series in the original units.
        """
        values = self._check(series)
        return series.with_values(values * self._std + self._mean)

    def serialize(self) -> dict:
        """
        Returns representation of the normalizer as a dictionary for
        serialization.
        """
        return {"mean": self._mean.tolist(), "std": self._std.tolist()}

    def _check(self, series):
        _is_MultivariateSeries(series)
        if series.n_channels != self.n_channels:
            raise ValueError(
                f"Normalizer has {self.n_channels} channels, series has {series.n_channels}."
            )
        return series.values


def fit_normalizer(train_samples) -> Normalizer:
    """
    Compute per-channel mean and population standard deviation over the
    concatenation of the training series. `train_samples` may contain
    `MultivariateSeries` objects or `(series, annotation)` pairs.
    """
    blocks = []
    for sample in train_samples:
        series = sample[0] if isinstance(sample, tuple) else sample
        _is_MultivariateSeries(series)
        blocks.append(series.values)
    if not blocks:
        raise ValueError("Cannot fit a normalizer to an empty training set.")
    values = _np.concatenate(blocks, axis=0)
    mean = values.mean(axis=0)
    std = values.std(axis=0)
    std[std == 0] = 1.0
    return Normalizer(mean, std)


def apply_normalizer(normalizer: Normalizer, series):
    """
    Normalize a series with previously fitted statistics.
    """
    if not isinstance(normalizer, Normalizer):
        _fail(normalizer, "Normalizer")
    return normalizer.apply(series)


class Dataset:
    """
    Representation of a collection of executions, each a
    `MultivariateSeries` paired with its `StateAnnotation` (or `None` for
    unlabeled data), along with the state name table, split tags, and
    normalization statistics.
    """

    def __init__(
        self,
        samples: list,
        *,
        state_names: list,
        ids: list = None,
        splits: list = None,
        normalizer: Normalizer = None,
    ):
        """
        Initialized with:

        - `samples` List of `(MultivariateSeries, StateAnnotation)` pairs.
        - `state_names` List of N_s state names; position is the state id.
        - `ids` Optional flight identifiers (defaults to `flight_0000`, ...).
        - `splits` Optional list of split tags, one of `"train"`,
        `"validation"`, or `"test"` per sample.
        - `normalizer` Optional `Normalizer` fitted on the training split.
        """
        self._state_names = [str(name) for name in state_names]
        self._samples = []
        for sample in samples:
            series, annotation = sample
            _is_MultivariateSeries(series)
            if annotation is not None:
                if not isinstance(annotation, _StateAnnotation):
                    _fail(annotation, "StateAnnotation")
                if annotation.num_states != len(self._state_names):
                    raise ValueError(
                        f"Annotation has {annotation.num_states} states, dataset has {len(self._state_names)}."
                    )
                if annotation.timestamps[-1] >= len(series):
                    raise ValueError(
                        f"Annotation timestamp {annotation.timestamps[-1]} exceeds series length {len(series)}."
                    )
            self._samples.append((series, annotation))
        if ids is None:
            ids = [f"flight_{i:04d}" for i in range(len(self._samples))]
        if len(ids) != len(self._samples) or len(set(ids)) != len(ids):
            raise ValueError("ids must be unique and match the number of samples.")
        self._ids = [str(i) for i in ids]
        if splits is not None:
            splits = [str(tag) for tag in splits]
            if len(splits) != len(self._samples):
                raise ValueError("Every sample needs exactly one split tag.")
            for tag in splits:
                if tag not in SPLITS:
                    raise ValueError(f"Unknown split tag {tag!r}; use one of {SPLITS}.")
        self._splits = splits
        if normalizer is not None and not isinstance(normalizer, Normalizer):
            _fail(normalizer, "Normalizer")
        self._normalizer = normalizer

    def __repr__(self):
        return f"Dataset[{len(self)} samples, {self.num_states} states]"

    def __len__(self):
        return len(self._samples)

    def __iter__(self):
        for i, (series, annotation) in enumerate(self._samples):
            yield self._ids[i], series, annotation

    def __getitem__(self, flight_id):
        return self._samples[self._ids.index(flight_id)]

    @property
    def samples(self) -> list:
        """List of `(series, annotation)` pairs."""
        return list(self._samples)

    @property
    def ids(self) -> list:
        """Flight identifiers."""
        return list(self._ids)

    @property
    def splits(self) -> list:
        """Split tag of each sample, or `None` if the dataset is unsplit."""
        return None if self._splits is None else list(self._splits)

    @property
    def state_names(self) -> list:
        """State names; the position of a name is its state id."""
        return list(self._state_names)

    @property
    def num_states(self) -> int:
        """Number of possible states (N_s)."""
        return len(self._state_names)

    @property
    def normalizer(self) -> Normalizer:
        """Normalization statistics, or `None` if not yet fitted."""
        return self._normalizer

    @property
    def channel_names(self) -> list:
        """Channel names of the first sample."""
        if not self._samples:
            return []
        return self._samples[0][0].channel_names

    @property
    def n_channels(self) -> int:
        """Number of channels of the first sample."""
        if not self._samples:
            return 0
        return self._samples[0][0].n_channels

    @property
    def sample_rate_hz(self) -> float:
        """Sampling rate of the first sample."""
        if not self._samples:
            return 5.0
        return self._samples[0][0].sample_rate_hz

    @property
    def max_length(self) -> int:
        """Length of the longest series (L)."""
        return max((len(series) for series, _ in self._samples), default=0)

    @property
    def lengths(self) -> list:
        """Length of every series."""
        return [len(series) for series, _ in self._samples]

    def split(self, tag: str) -> list:
        """
        Return `(id, series, annotation)` triples carrying a given split tag.
        """
        if self._splits is None:
            raise ValueError("This dataset has not been split; call split_dataset().")
        if tag not in SPLITS:
            raise ValueError(f"Unknown split tag {tag!r}; use one of {SPLITS}.")
        return [
            (self._ids[i], series, annotation)
            for i, (series, annotation) in enumerate(self._samples)
            if self._splits[i] == tag
        ]

    def select(self, tag: str = None) -> list:
        """
        Like `split()`, but `None` or `"all"` returns every sample.
        """
        if tag is None or tag == "all":
            return list(self)
        return self.split(tag)

    def replace(self, **changes):
        """
        Returns a copy of the dataset with some attributes replaced (any of
        `samples`, `state_names`, `ids`, `splits`, `normalizer`).
        """
        attributes = {
            "samples": self._samples,
            "state_names": self._state_names,
            "ids": self._ids,
            "splits": self._splits,
            "normalizer": self._normalizer,
        }
        for key in changes:
            if key not in attributes:
                raise ValueError(f"Dataset has no attribute {key!r}.")
        attributes.update(changes)
        return Dataset(attributes.pop("samples"), **attributes)


def filter_by_length(
    dataset: Dataset, *, min_length: int = MIN_LENGTH, max_length: int = MAX_LENGTH
) -> Dataset:
    """
    Drop samples shorter than `min_length` or longer than `max_length`,
    warning about each dropped sample.
    """
    keep = []
    for i, length in enumerate(dataset.lengths):
        if min_length <= length <= max_length:
            keep.append(i)
        else:
            _warnings.warn(
                f"Dropping {dataset.ids[i]}: length {length} is outside [{min_length}, {max_length}]."
            )
    if not keep:
        raise ValueError("No samples remain after applying the length bounds.")
    splits = dataset.splits
    return dataset.replace(
        samples=[dataset.samples[i] for i in keep],
        ids=[dataset.ids[i] for i in keep],
        splits=None if splits is None else [splits[i] for i in keep],
    )


def split_counts(n_samples: int, fractions=DEFAULT_FRACTIONS) -> list:
    """
    Turn split fractions into sample counts with largest-remainder rounding.
    Remainders that tie are resolved in favor of the later split.
    """
    fractions = [float(f) for f in fractions]
    if len(fractions) != len(SPLITS):
        raise ValueError(f"Expected {len(SPLITS)} fractions, got {len(fractions)}.")
    if any(f <= 0 for f in fractions):
        raise ValueError(f"Split fractions must be positive, got {fractions}.")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"Split fractions must sum to 1, got {sum(fractions)}.")
    quotas = [n_samples * f for f in fractions]
    counts = [int(_np.floor(q)) for q in quotas]
    remainders = [round(q - c, 9) for q, c in zip(quotas, counts)]
    order = sorted(range(len(quotas)), key=lambda i: (remainders[i], i), reverse=True)
    for i in order[: n_samples - sum(counts)]:
        counts[i] += 1
    return counts


def split_dataset(dataset: Dataset, fractions=DEFAULT_FRACTIONS, seed: int = 0):
    """
    Randomly assign every sample to the train, validation, or test split and
    fit the normalizer on the training samples. The assignment depends only
    on `seed` and the number of samples.
    """
    if not isinstance(dataset, Dataset):
        _fail(dataset, "Dataset")
    if len(dataset) == 0:
        raise ValueError("Cannot split an empty dataset.")
    counts = split_counts(len(dataset), fractions)
    order = _np.random.default_rng(seed).permutation(len(dataset))
    splits = [None] * len(dataset)
    start = 0
    for tag, count in zip(SPLITS, counts):
        for i in order[start : start + count]:
            splits[i] = tag
        start += count
    train = [series for (series, _), tag in zip(dataset.samples, splits) if tag == "train"]
    return dataset.replace(splits=splits, normalizer=fit_normalizer(train))
