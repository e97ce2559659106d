import warnings
import numpy as np
import pytest
import statekit


def make_sample(length, offset=0.0, num_states=3):
    t = np.arange(length, dtype=float)
    series = statekit.MultivariateSeries([t + offset, np.sin(t) + offset])
    annotation = statekit.StateAnnotation([(0, 0), (length // 2, 1)], num_states)
    return series, annotation


samples = [make_sample(10 + i, offset=i) for i in range(20)]
dataset = statekit.Dataset(samples, state_names=["idle", "busy", "done"])


def test_Dataset():
    assert len(dataset) == 20
    assert dataset.num_states == 3
    assert dataset.ids[:2] == ["flight_0000", "flight_0001"]
    assert dataset.n_channels == 2
    assert dataset.channel_names == ["ch0", "ch1"]
    assert dataset.max_length == 29
    assert dataset.lengths[:3] == [10, 11, 12]
    assert dataset.splits is None
    flight_id, series, annotation = next(iter(dataset))
    assert flight_id == "flight_0000"
    assert dataset["flight_0001"][0] is samples[1][0]


def test_Dataset_invalid():
    with pytest.raises(ValueError):
        statekit.Dataset(samples[:2], state_names=["a", "b"])
    with pytest.raises(ValueError):
        statekit.Dataset(samples[:2], state_names=["a", "b", "c"], ids=["x", "x"])
    with pytest.raises(ValueError):
        statekit.Dataset(samples[:2], state_names=["a", "b", "c"], splits=["train", "dev"])
    with pytest.raises(TypeError):
        statekit.Dataset([(np.zeros((3, 2)), None)], state_names=["a"])


def test_unsplit_dataset_cannot_be_split_by_tag():
    with pytest.raises(ValueError):
        dataset.split("train")
    assert len(dataset.select("all")) == 20


def test_split_counts():
    assert statekit.dataset.split_counts(20) == [18, 1, 1]
    assert statekit.dataset.split_counts(100) == [90, 5, 5]
    assert statekit.dataset.split_counts(50) == [45, 2, 3]
    assert sum(statekit.dataset.split_counts(888)) == 888
    with pytest.raises(ValueError):
        statekit.dataset.split_counts(10, (0.5, 0.5, 0.5))
    with pytest.raises(ValueError):
        statekit.dataset.split_counts(10, (0.9, 0.1))


def test_split_dataset():
    split = statekit.dataset.split_dataset(dataset, seed=3)
    assert len(split.split("train")) == 18
    assert len(split.split("validation")) == 1
    assert len(split.split("test")) == 1
    assert all(tag in statekit.dataset.SPLITS for tag in split.splits)
    again = statekit.dataset.split_dataset(dataset, seed=3)
    assert again.splits == split.splits
    assert again.normalizer == split.normalizer


def test_normalizer_uses_training_split_only():
    split = statekit.dataset.split_dataset(dataset, seed=1)
    train = [series for _, series, _ in split.split("train")]
    values = np.concatenate([series.values for series in train])
    assert np.allclose(split.normalizer.mean, values.mean(axis=0))
    assert np.allclose(split.normalizer.std, values.std(axis=0))


def test_fit_normalizer():
    series = statekit.MultivariateSeries([[1.0, 3.0], [2.0, 2.0]])
    normalizer = statekit.dataset.fit_normalizer([series])
    assert normalizer.mean.tolist() == [2.0, 2.0]
    assert normalizer.std.tolist() == [1.0, 1.0]
    normalized = statekit.dataset.apply_normalizer(normalizer, series)
    assert normalized.values.tolist() == [[-1.0, 0.0], [1.0, 0.0]]
    assert normalizer.invert(normalized).values.tolist() == series.values.tolist()
    with pytest.raises(ValueError):
        statekit.dataset.fit_normalizer([])


def test_Normalizer_invalid():
    with pytest.raises(ValueError):
        statekit.dataset.Normalizer([0.0, 0.0], [1.0, 0.0])
    with pytest.raises(ValueError):
        statekit.dataset.Normalizer([0.0], [1.0, 1.0])
    normalizer = statekit.dataset.Normalizer([0.0, 0.0, 0.0], [1.0, 1.0, 1.0])
    with pytest.raises(ValueError):
        normalizer.apply(samples[0][0])


def test_filter_by_length():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        filtered = statekit.dataset.filter_by_length(dataset, min_length=15, max_length=20)
    assert filtered.lengths == list(range(15, 21))
    assert len(caught) == 14
    with pytest.raises(ValueError):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            statekit.dataset.filter_by_length(dataset, min_length=100, max_length=200)


def test_replace():
    renamed = dataset.replace(state_names=["x", "y", "z"])
    assert renamed.state_names == ["x", "y", "z"]
    assert renamed.samples == dataset.samples
    with pytest.raises(ValueError):
        dataset.replace(colour="red")
