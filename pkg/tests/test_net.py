from tempfile import TemporaryDirectory
from pathlib import Path
import numpy as np
import pytest
import statekit
from statekit._optim import Adam

tiny = statekit.net.ArchitectureConfig(
    conv_layers=[(2, 3)],
    gru_layers=[3],
    dense_hidden=4,
    num_states=3,
    input_channels=2,
    max_length=6,
)


def test_paper_preset_parameter_count():
    config = statekit.net.ArchitectureConfig.preset("paper")
    assert config.n_parameters == 399577
    assert statekit.net.ArchitectureConfig().n_parameters == 399577
    assert config == statekit.net.ArchitectureConfig()


def test_presets():
    desk = statekit.net.ArchitectureConfig.preset("desk", num_states=9)
    assert desk.max_length == 3000
    assert desk.num_states == 9
    cnn = statekit.net.ArchitectureConfig.preset("desk", variant="cnn_only")
    assert cnn.gru_layers == []
    assert cnn.conv_layers == [(32, 3), (32, 5), (32, 10)]
    rnn = statekit.net.ArchitectureConfig.preset("paper", variant="rnn_only")
    assert rnn.conv_layers == []
    names = [name for name, _ in rnn.parameter_shapes()]
    assert names[0] == "gru0.W"
    with pytest.raises(ValueError):
        statekit.net.ArchitectureConfig.preset("huge")


def test_ArchitectureConfig_invalid():
    with pytest.raises(ValueError):
        statekit.net.ArchitectureConfig(variant="transformer")
    with pytest.raises(ValueError):
        statekit.net.ArchitectureConfig(gru_layers=[])
    with pytest.raises(ValueError):
        statekit.net.ArchitectureConfig(variant="cnn_only")
    with pytest.raises(ValueError):
        statekit.net.ArchitectureConfig(alpha=1.5)
    with pytest.raises(ValueError):
        statekit.net.ArchitectureConfig(conv_layers=[(0, 3)])
    with pytest.raises(ValueError):
        statekit.net.ArchitectureConfig(num_states=0)


def test_TrainingConfig():
    tc = statekit.net.TrainingConfig()
    assert tc.serialize()["learning_rate"] == 1e-3
    assert tc.serialize()["batch_size"] == 4
    with pytest.raises(ValueError):
        statekit.net.TrainingConfig(learning_rate=0)
    with pytest.raises(ValueError):
        statekit.net.TrainingConfig(beta1=1.0)
    with pytest.raises(ValueError):
        statekit.net.TrainingConfig(patience=0)


def test_forward_outputs_probabilities():
    network = statekit.net.Network(tiny, seed=1)
    data = np.random.default_rng(0).normal(size=(2, 6, 2))
    mask = np.ones((2, 6))
    probabilities = network.forward(data, mask)
    assert probabilities.shape == (2, 6, 3)
    assert np.allclose(probabilities.sum(axis=2), 1.0)
    assert np.all(probabilities >= 0)
    with pytest.raises(ValueError):
        network.forward(data[:, :, :1], mask)
    with pytest.raises(ValueError):
        network.forward(data, mask[:, :5])


def test_padded_tail_does_not_affect_valid_positions():
    network = statekit.net.Network(tiny, seed=2)
    rng = np.random.default_rng(1)
    data = rng.normal(size=(1, 6, 2))
    mask = np.array([[1, 1, 1, 1, 0, 0]], dtype=float)
    before = network.forward(data, mask)
    data[0, 4:] = rng.normal(scale=100.0, size=(2, 2))
    after = network.forward(data, mask)
    assert np.allclose(before[0, :4], after[0, :4])


def test_network_gradients():
    rng = np.random.default_rng(3)
    network = statekit.net.Network(tiny, seed=3)
    for name, tensor in network.parameters.items():
        tensor += rng.normal(scale=0.1, size=tensor.shape)
    data = rng.normal(size=(2, 6, 2))
    mask = np.array([[1, 1, 1, 1, 1, 1], [1, 1, 1, 1, 0, 0]], dtype=float)
    targets = np.eye(3)[rng.integers(0, 3, size=(2, 6))]
    _, grads = network.loss_and_gradients(data, mask, targets)
    epsilon = 1e-6
    for name, tensor in network.parameters.items():
        numeric = np.zeros_like(tensor)
        for index in np.ndindex(tensor.shape):
            original = tensor[index]
            tensor[index] = original + epsilon
            plus = network.loss_and_gradients(data, mask, targets)[0]
            tensor[index] = original - epsilon
            minus = network.loss_and_gradients(data, mask, targets)[0]
            tensor[index] = original
            numeric[index] = (plus - minus) / (2 * epsilon)
        assert np.allclose(grads[name], numeric, rtol=1e-4, atol=1e-7), name


def test_Network_rejects_mismatched_parameters():
    parameters = statekit.net.Network(tiny).parameters
    parameters["dense.weight"] = np.zeros((5, 4))
    with pytest.raises(ValueError, match="shape mismatch"):
        statekit.net.Network(tiny, parameters=parameters)
    del parameters["dense.weight"]
    with pytest.raises(ValueError, match="shape mismatch"):
        statekit.net.Network(tiny, parameters=parameters)


def test_initialization_is_seeded():
    a = statekit.net.Network(tiny, seed=5).parameters
    b = statekit.net.Network(tiny, seed=5).parameters
    assert all(np.array_equal(a[name], b[name]) for name in a)
    assert np.all(a["conv0.bias"] == 0)


def test_adam_first_step_moves_by_learning_rate():
    params = {"w": np.array([1.0, -2.0, 3.0])}
    grads = {"w": np.array([0.5, -4.0, 0.0])}
    Adam(learning_rate=0.1).step(params, grads)
    assert np.allclose(params["w"], [0.9, -1.9, 3.0], atol=1e-6)
    with pytest.raises(ValueError):
        Adam(learning_rate=0)


def make_sign_dataset(n_flights=8, length=40):
    rng = np.random.default_rng(0)
    samples = []
    for i in range(n_flights):
        switch = int(rng.integers(10, 30))
        sign = np.where(np.arange(length) < switch, -1.0, 1.0)
        series = statekit.MultivariateSeries(
            [sign + rng.normal(scale=0.1, size=length), rng.normal(size=length)]
        )
        annotation = statekit.StateAnnotation([(0, 0), (switch, 1)], 2)
        samples.append((series, annotation))
    splits = ["train"] * 6 + ["validation", "test"]
    normalizer = statekit.dataset.fit_normalizer([s for s, _ in samples[:6]])
    return statekit.Dataset(
        samples, state_names=["low", "high"], splits=splits, normalizer=normalizer
    )


def test_train_learns_a_simple_task():
    dataset = make_sign_dataset()
    arch = statekit.net.ArchitectureConfig(
        variant="cnn_only",
        conv_layers=[(4, 3)],
        gru_layers=[],
        dense_hidden=8,
        num_states=2,
        input_channels=2,
        max_length=40,
    )
    tc = statekit.net.TrainingConfig(learning_rate=0.05, batch_size=2, max_epochs=60, patience=60)
    checkpoint, history = statekit.net.train(dataset, arch, tc)
    assert len(history) == 60
    assert history[-1]["train_loss"] < history[0]["train_loss"]
    assert checkpoint.metadata["best_val_accuracy"] > 0.9
    assert checkpoint.state_names == ["low", "high"]
    _, test_series, annotation = dataset.split("test")[0]
    probabilities, labels = statekit.net.predict(checkpoint, test_series)
    assert probabilities.shape == (40, 2)
    truth = statekit.series.expand_labels(annotation, 40).states
    assert (labels.states == truth).mean() > 0.8


@pytest.mark.slow
def test_train_overfits_two_flights():
    rng = np.random.default_rng(1)
    samples = []
    for entries in ([(0, 0), (180, 1), (350, 0)], [(0, 1), (220, 0)]):
        annotation = statekit.StateAnnotation(entries, 2)
        states = statekit.series.expand_labels(annotation, 500).states
        series = statekit.MultivariateSeries(
            [np.where(states == 1, 1.0, -1.0) + rng.normal(scale=0.05, size=500), rng.normal(size=500)]
        )
        samples.append((series, annotation))
    # the validation split repeats the training flights, so the best
    # validation epoch is the best training epoch
    normalizer = statekit.dataset.fit_normalizer([s for s, _ in samples])
    dataset = statekit.Dataset(
        samples + samples,
        state_names=["ground", "air"],
        splits=["train", "train", "validation", "validation"],
        normalizer=normalizer,
    )
    arch = statekit.net.ArchitectureConfig(
        conv_layers=[(8, 3), (8, 3)],
        gru_layers=[16],
        dense_hidden=16,
        num_states=2,
        input_channels=2,
        max_length=500,
    )
    tc = statekit.net.TrainingConfig(learning_rate=0.02, batch_size=2, max_epochs=200, patience=200)
    checkpoint, history = statekit.net.train(dataset, arch, tc)
    assert len(history) <= 200
    assert checkpoint.metadata["best_val_accuracy"] >= 0.99
    correct = 0
    for series, annotation in samples:
        _, labels = statekit.net.predict(checkpoint, series)
        correct += (labels.states == statekit.series.expand_labels(annotation, 500).states).sum()
    assert correct / 1000 >= 0.99


def test_train_stops_early_and_is_reproducible():
    dataset = make_sign_dataset()
    arch = statekit.net.ArchitectureConfig(
        conv_layers=[(2, 3)],
        gru_layers=[2],
        dense_hidden=4,
        num_states=2,
        input_channels=2,
        max_length=40,
    )
    tc = statekit.net.TrainingConfig(max_epochs=5, patience=1, seed=4)
    first, history = statekit.net.train(dataset, arch, tc)
    second, _ = statekit.net.train(dataset, arch, tc)
    assert 2 <= len(history) <= 5
    assert first.metadata["epochs"] == len(history)
    for name, tensor in first.parameters.items():
        assert np.array_equal(tensor, second.parameters[name])


def test_train_invalid():
    dataset = make_sign_dataset()
    with pytest.raises(ValueError):
        statekit.net.train(dataset, tiny)
    with pytest.raises(ValueError):
        statekit.net.train(dataset.replace(normalizer=None), tiny)
    with pytest.raises(TypeError):
        statekit.net.train([], tiny)


def make_checkpoint():
    network = statekit.net.Network(tiny, seed=7)
    normalizer = statekit.dataset.Normalizer([0.5, -1.0], [2.0, 3.0])
    metadata = {"epochs": 3, "state_names": ["a", "b", "c"]}
    return statekit.net.ModelCheckpoint(tiny, network.parameters, normalizer, metadata)


def test_checkpoint_round_trip():
    checkpoint = make_checkpoint()
    with TemporaryDirectory() as temp_dir:
        path = Path(temp_dir) / "model.ckpt"
        statekit.net.save_checkpoint(checkpoint, path)
        loaded = statekit.net.load_checkpoint(path)
    assert loaded.config == checkpoint.config
    assert loaded.normalizer == checkpoint.normalizer
    assert loaded.metadata == checkpoint.metadata
    assert loaded.format_version == statekit.net.FORMAT_VERSION
    for name, tensor in checkpoint.parameters.items():
        assert np.array_equal(loaded.parameters[name], tensor)
    series = statekit.MultivariateSeries([np.linspace(0, 1, 9), np.linspace(1, 0, 9)])
    assert np.array_equal(
        statekit.net.predict(checkpoint, series)[0], statekit.net.predict(loaded, series)[0]
    )


def test_checkpoint_is_read_only():
    checkpoint = make_checkpoint()
    with pytest.raises(ValueError):
        checkpoint.parameters["output.bias"][0] = 1.0


@pytest.mark.parametrize("damage", ["truncate", "magic", "header"])
def test_load_corrupt_checkpoint(damage):
    with TemporaryDirectory() as temp_dir:
        path = Path(temp_dir) / "model.ckpt"
        statekit.net.save_checkpoint(make_checkpoint(), path)
        content = path.read_bytes()
        if damage == "truncate":
            content = content[:-8]
        elif damage == "magic":
            content = b"NOTSTATE" + content[8:]
        else:
            content = content[:16] + b"\xff" * 4 + content[20:]
        path.write_bytes(content)
        with pytest.raises(ValueError, match="corrupt"):
            statekit.net.load_checkpoint(path)


def test_load_checkpoint_version_mismatch():
    with TemporaryDirectory() as temp_dir:
        path = Path(temp_dir) / "model.ckpt"
        statekit.net.save_checkpoint(make_checkpoint(), path)
        content = path.read_bytes().replace(b'"format_version":1', b'"format_version":9')
        path.write_bytes(content)
        with pytest.raises(ValueError, match="version mismatch"):
            statekit.net.load_checkpoint(path)


def test_predict():
    checkpoint = make_checkpoint()
    series = statekit.MultivariateSeries([np.arange(10.0), np.ones(10)])
    probabilities, labels = statekit.net.predict(checkpoint, series)
    assert probabilities.shape == (10, 3)
    assert len(labels) == 10
    assert labels.states.tolist() == probabilities.argmax(axis=1).tolist()
    short = statekit.MultivariateSeries([np.arange(4.0), np.ones(4)])
    assert statekit.net.predict(checkpoint, short)[0].shape == (4, 3)
    with pytest.raises(ValueError):
        statekit.net.predict(checkpoint, statekit.MultivariateSeries([[1, 2], [3, 4], [5, 6]]))
    with pytest.raises(TypeError):
        statekit.net.predict("model.ckpt", series)
