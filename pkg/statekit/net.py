"""
Defines the sequence-labeling network and its training, prediction, and
checkpoint functions. The network maps a padded `L × n` series to an
`L × N_s` matrix of per-timestep state probabilities through a stack of
1D convolutions, a stack of GRU layers, a leaky-ReLU dense layer, and a
softmax output layer. The `cnn_only` and `rnn_only` variants drop the
recurrent or the convolutional stack.
"""

import json as _json
import logging as _logging
import struct as _struct
import numpy as _np
from . import _layers
from ._optim import Adam as _Adam
from .series import pad_and_mask as _pad_and_mask
from .series import expand_labels as _expand_labels
from .series import decode_one_hot as _decode_one_hot
from .series import _is_MultivariateSeries
from .dataset import Dataset as _Dataset
from .dataset import Normalizer as _Normalizer

_logger = _logging.getLogger(__name__)

FORMAT_VERSION = 1
VARIANTS = ("hybrid", "cnn_only", "rnn_only")
PRESETS = {
    "desk": {
        "conv_layers": [(32, 3), (32, 5), (32, 10)],
        "gru_layers": [64],
        "dense_hidden": 64,
        "max_length": 3000,
    },
    "paper": {
        "conv_layers": [(64, 3), (64, 5), (64, 10), (64, 15), (64, 20)],
        "gru_layers": [128, 128],
        "dense_hidden": 128,
        "max_length": 18000,
    },
}
_MAGIC = b"STATEKIT"
_LENGTH_FORMAT = "<Q"


class ArchitectureConfig:
    """
    Shape of a network: the convolution stack as `(filters, kernel_size)`
    pairs, the GRU hidden sizes, the dense layer width and leaky-ReLU slope,
    and the input/output dimensions.
    """

    def __init__(
        self,
        *,
        variant: str = "hybrid",
        conv_layers: list = PRESETS["paper"]["conv_layers"],
        gru_layers: list = PRESETS["paper"]["gru_layers"],
        dense_hidden: int = 128,
        alpha: float = 0.3,
        num_states: int = 25,
        input_channels: int = 10,
        max_length: int = 18000,
    ):
        if variant not in VARIANTS:
            raise ValueError(f"Unknown variant {variant!r}; use one of {VARIANTS}.")
        conv_layers = [(int(f), int(k)) for f, k in conv_layers]
        gru_layers = [int(h) for h in gru_layers]
        if variant == "hybrid" and not (conv_layers and gru_layers):
            raise ValueError("The hybrid variant needs both convolution and GRU layers.")
        if variant == "cnn_only" and (gru_layers or not conv_layers):
            raise ValueError("The cnn_only variant has convolution layers and no GRU layers.")
        if variant == "rnn_only" and (conv_layers or not gru_layers):
            raise ValueError("The rnn_only variant has GRU layers and no convolution layers.")
        for filters, kernel_size in conv_layers:
            if filters < 1 or kernel_size < 1:
                raise ValueError(
                    f"Convolution filters and kernel sizes must be at least 1, got ({filters}, {kernel_size})."
                )
        for hidden in gru_layers:
            if hidden < 1:
                raise ValueError(f"GRU hidden sizes must be at least 1, got {hidden}.")
        if not 0 < alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {alpha}.")
        for name, value in (
            ("dense_hidden", dense_hidden),
            ("num_states", num_states),
            ("input_channels", input_channels),
            ("max_length", max_length),
        ):
            if int(value) < 1:
                raise ValueError(f"{name} must be at least 1, got {value}.")
        self._variant = variant
        self._conv_layers = conv_layers
        self._gru_layers = gru_layers
        self._dense_hidden = int(dense_hidden)
        self._alpha = float(alpha)
        self._num_states = int(num_states)
        self._input_channels = int(input_channels)
        self._max_length = int(max_length)

    @classmethod
    def preset(cls, name: str, *, variant: str = "hybrid", **overrides):
        """
        Build a config from the `"desk"` or `"paper"` preset. The variant
        empties the stack it does not use; any other field can be
        overridden by keyword.
        """
        if name not in PRESETS:
            raise ValueError(f"Unknown preset {name!r}; use one of {', '.join(PRESETS)}.")
        fields = dict(PRESETS[name])
        if variant == "cnn_only":
            fields["gru_layers"] = []
        elif variant == "rnn_only":
            fields["conv_layers"] = []
        fields.update(overrides)
        return cls(variant=variant, **fields)

    def __repr__(self):
        return f"ArchitectureConfig[{self._variant}, {self.n_parameters} parameters]"

    def __eq__(self, other):
        if not isinstance(other, ArchitectureConfig):
            return NotImplemented
        return self.serialize() == other.serialize()

    @property
    def variant(self) -> str:
        """`hybrid`, `cnn_only`, or `rnn_only`."""
        return self._variant

    @property
    def conv_layers(self) -> list:
        """List of `(filters, kernel_size)` pairs."""
        return list(self._conv_layers)

    @property
    def gru_layers(self) -> list:
        """List of GRU hidden sizes."""
        return list(self._gru_layers)

    @property
    def dense_hidden(self) -> int:
        """Width of the leaky-ReLU dense layer."""
        return self._dense_hidden

    @property
    def alpha(self) -> float:
        """Negative slope of the leaky ReLU."""
        return self._alpha

    @property
    def num_states(self) -> int:
        """Number of output classes (N_s)."""
        return self._num_states

    @property
    def input_channels(self) -> int:
        """Number of input channels (n)."""
        return self._input_channels

    @property
    def max_length(self) -> int:
        """Padded sequence length (L)."""
        return self._max_length

    def parameter_shapes(self) -> list:
        """
        List of `(name, shape)` pairs of every parameter tensor, in the order
        they are initialized and stored.
        """
        shapes = []
        channels = self._input_channels
        for i, (filters, kernel_size) in enumerate(self._conv_layers):
            shapes.append((f"conv{i}.weight", (kernel_size, channels, filters)))
            shapes.append((f"conv{i}.bias", (filters,)))
            channels = filters
        for j, hidden in enumerate(self._gru_layers):
            shapes.append((f"gru{j}.W", (channels, 3 * hidden)))
            shapes.append((f"gru{j}.U", (hidden, 3 * hidden)))
            shapes.append((f"gru{j}.b", (3 * hidden,)))
            channels = hidden
        shapes.append(("dense.weight", (channels, self._dense_hidden)))
        shapes.append(("dense.bias", (self._dense_hidden,)))
        shapes.append(("output.weight", (self._dense_hidden, self._num_states)))
        shapes.append(("output.bias", (self._num_states,)))
        return shapes

    @property
    def n_parameters(self) -> int:
        """Total number of scalar parameters."""
        return sum(int(_np.prod(shape)) for _, shape in self.parameter_shapes())

    def serialize(self) -> dict:
        """
        Returns representation of the config as a dictionary for
        serialization.
        """
        return {
            "variant": self._variant,
            "conv_layers": [list(layer) for layer in self._conv_layers],
            "gru_layers": list(self._gru_layers),
            "dense_hidden": self._dense_hidden,
            "alpha": self._alpha,
            "num_states": self._num_states,
            "input_channels": self._input_channels,
            "max_length": self._max_length,
        }


class TrainingConfig:
    """
    Optimizer and schedule settings for `train()`.
    """

    def __init__(
        self,
        *,
        learning_rate: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        epsilon: float = 1e-8,
        batch_size: int = 4,
        max_epochs: int = 80,
        patience: int = 10,
        seed: int = 0,
    ):
        if not learning_rate > 0 or not epsilon > 0:
            raise ValueError("learning_rate and epsilon must be positive.")
        if not (0 <= beta1 < 1 and 0 <= beta2 < 1):
            raise ValueError(f"Adam betas must lie in [0, 1), got {beta1}, {beta2}.")
        if int(batch_size) < 1 or int(max_epochs) < 1 or int(patience) < 1:
            raise ValueError("batch_size, max_epochs, and patience must be at least 1.")
        self.learning_rate = float(learning_rate)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.epsilon = float(epsilon)
        self.batch_size = int(batch_size)
        self.max_epochs = int(max_epochs)
        self.patience = int(patience)
        self.seed = int(seed)

    def __repr__(self):
        return f"TrainingConfig{self.serialize()}"

    def serialize(self) -> dict:
        """
        Returns representation of the config as a dictionary for
        serialization.
        """
        return {
            "learning_rate": self.learning_rate,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "epsilon": self.epsilon,
            "batch_size": self.batch_size,
            "max_epochs": self.max_epochs,
            "patience": self.patience,
            "seed": self.seed,
        }


class Network:
    """
    The network proper: named parameter arrays plus forward and backward
    passes over padded batches. Both the input and every convolution output
    are multiplied by the mask, so positions before the padded tail never
    see the values stored in it.
    """

    def __init__(self, config: ArchitectureConfig, *, seed: int = 0, parameters=None):
        """
        Initialized with:

        - `config` `ArchitectureConfig` describing the layer shapes.
        - `seed` Seed of the Glorot-uniform weight initialization (biases
        start at zero).
        - `parameters` Optional dictionary of existing parameter arrays,
        which must match the shapes implied by `config`.
        """
        if not isinstance(config, ArchitectureConfig):
            raise TypeError(f"Expected ArchitectureConfig, got {config.__class__.__name__}")
        self._config = config
        self._parameters = {}
        if parameters is None:
            rng = _np.random.default_rng(seed)
            for name, shape in config.parameter_shapes():
                self._parameters[name] = _initial_tensor(rng, name, shape)
        else:
            for name, shape in config.parameter_shapes():
                if name not in parameters:
                    raise ValueError(f"checkpoint shape mismatch: missing tensor {name}.")
                tensor = _np.array(parameters[name], dtype=float)
                if tensor.shape != tuple(shape):
                    raise ValueError(
                        f"checkpoint shape mismatch: {name} has shape {tensor.shape}, expected {tuple(shape)}."
                    )
                self._parameters[name] = tensor

    def __repr__(self):
        return f"Network[{self._config.variant}]"

    @property
    def config(self) -> ArchitectureConfig:
        """Architecture of the network."""
        return self._config

    @property
    def parameters(self) -> dict:
        """Dictionary of parameter arrays, updated in place by training."""
        return self._parameters

    def forward(self, data, mask, *, keep_cache: bool = False):
        """
        Map a batch `B × L × n` with mask `B × L` to probabilities
        `B × L × N_s`. If `keep_cache` is `True`, also return the layer
        caches needed by `backward()`.
        """
        p = self._parameters
        data = _np.asarray(data, dtype=float)
        mask = _np.asarray(mask, dtype=float)
        if data.ndim != 3 or data.shape[2] != self._config.input_channels:
            raise ValueError(
                f"Expected a B × L × {self._config.input_channels} batch, got shape {data.shape}."
            )
        if mask.shape != data.shape[:2]:
            raise ValueError(f"Mask of shape {mask.shape} does not fit data {data.shape}.")
        gate = mask[:, :, None]
        x = data * gate
        caches = []
        for i in range(len(self._config.conv_layers)):
            x, cache = _layers.conv1d_forward(x, p[f"conv{i}.weight"], p[f"conv{i}.bias"])
            x = x * gate
            caches.append(cache)
        for j in range(len(self._config.gru_layers)):
            x, cache = _layers.gru_forward(x, p[f"gru{j}.W"], p[f"gru{j}.U"], p[f"gru{j}.b"])
            caches.append(cache)
        x, cache = _layers.dense_forward(
            x, p["dense.weight"], p["dense.bias"], "leaky_relu", self._config.alpha
        )
        caches.append(cache)
        probabilities, cache = _layers.dense_forward(
            x, p["output.weight"], p["output.bias"], "softmax"
        )
        caches.append(cache)
        if keep_cache:
            return probabilities, (caches, gate)
        return probabilities

    def backward(self, dprobabilities, caches) -> dict:
        """
        Gradients of every parameter given the gradient of a scalar loss with
        respect to the output probabilities.
        """
        caches, gate = caches
        caches = list(caches)
        grads = {}
        dx, grads["output.weight"], grads["output.bias"] = _layers.dense_backward(
            dprobabilities, caches.pop()
        )
        dx, grads["dense.weight"], grads["dense.bias"] = _layers.dense_backward(
            dx, caches.pop()
        )
        for j in reversed(range(len(self._config.gru_layers))):
            dx, grads[f"gru{j}.W"], grads[f"gru{j}.U"], grads[f"gru{j}.b"], _ = (
                _layers.gru_backward(dx, caches.pop())
            )
        for i in reversed(range(len(self._config.conv_layers))):
            dx, grads[f"conv{i}.weight"], grads[f"conv{i}.bias"] = _layers.conv1d_backward(
                dx * gate, caches.pop()
            )
        return grads

    def loss_and_gradients(self, data, mask, targets):
        """
        Batch dice loss against one-hot `targets` (`B × L × N_s`) and the
        gradient of every parameter.
        """
        probabilities, caches = self.forward(data, mask, keep_cache=True)
        loss, dprobabilities = _layers.batch_dice_loss(probabilities, targets, mask)
        return loss, self.backward(dprobabilities, caches)


class ModelCheckpoint:
    """
    A trained model: architecture config, parameter tensors, normalization
    statistics, and training metadata (epochs, losses, seed, state names).
    """

    def __init__(
        self,
        config: ArchitectureConfig,
        parameters: dict,
        normalizer: _Normalizer = None,
        metadata: dict = None,
    ):
        network = Network(config, parameters=parameters)
        self._config = config
        self._parameters = {}
        for name, _ in config.parameter_shapes():
            tensor = network.parameters[name].copy()
            tensor.flags.writeable = False
            self._parameters[name] = tensor
        if normalizer is not None and not isinstance(normalizer, _Normalizer):
            raise TypeError(f"Expected Normalizer, got {normalizer.__class__.__name__}")
        if normalizer is not None and normalizer.n_channels != config.input_channels:
            raise ValueError(
                f"Normalizer has {normalizer.n_channels} channels, config expects {config.input_channels}."
            )
        self._normalizer = normalizer
        self._metadata = dict(metadata or {})

    def __repr__(self):
        return f"ModelCheckpoint[{self._config.variant}]"

    @property
    def config(self) -> ArchitectureConfig:
        """Architecture config."""
        return self._config

    @property
    def parameters(self) -> dict:
        """Read-only parameter tensors by name."""
        return dict(self._parameters)

    @property
    def normalizer(self) -> _Normalizer:
        """Normalization statistics fitted on the training split."""
        return self._normalizer

    @property
    def metadata(self) -> dict:
        """Training metadata."""
        return dict(self._metadata)

    @property
    def format_version(self) -> int:
        """Version of the checkpoint file format."""
        return FORMAT_VERSION

    @property
    def state_names(self) -> list:
        """State names recorded at training time, if any."""
        return list(self._metadata.get("state_names", []))

    def network(self) -> Network:
        """
        Return a `Network` carrying a copy of the parameters.
        """
        return Network(self._config, parameters=self._parameters)


def masked_accuracy(network: Network, data, mask, labels, *, batch_size: int = 4) -> float:
    """
    Fraction of unmasked timesteps whose argmax prediction equals the label.
    """
    correct = 0.0
    total = 0.0
    for start in range(0, data.shape[0], batch_size):
        stop = start + batch_size
        probabilities = network.forward(data[start:stop], mask[start:stop])
        predicted = probabilities.argmax(axis=2)
        correct += ((predicted == labels[start:stop]) * mask[start:stop]).sum()
        total += mask[start:stop].sum()
    if total == 0:
        return 0.0
    return float(correct / total)


def prepare_batch(samples, normalizer, max_length: int, num_states: int):
    """
    Normalize, pad, and mask a list of `(series, annotation)` pairs. Returns
    `(data, mask, labels, targets)` arrays of shapes `B × L × n`, `B × L`,
    `B × L`, and `B × L × N_s`. Padded tails repeat the final state.
    """
    data, mask, labels = [], [], []
    for series, annotation in samples:
        if normalizer is not None:
            series = normalizer.apply(series)
        if len(series) > max_length:
            raise ValueError(
                f"Series length ({len(series)}) exceeds the target length ({max_length})."
            )
        padded = _pad_and_mask(series, max_length)
        data.append(padded.data)
        mask.append(padded.mask)
        labels.append(_expand_labels(annotation, max_length).states)
    data = _np.stack(data)
    mask = _np.stack(mask)
    labels = _np.stack(labels)
    targets = _np.eye(num_states)[labels]
    return data, mask, labels, targets


def train(dataset: _Dataset, arch: ArchitectureConfig, tc: TrainingConfig = None):
    """
    Train a network on the training split of `dataset` with Adam over
    shuffled mini-batches. After every epoch the masked timestep accuracy on
    the validation split is recorded; training stops after `max_epochs` or
    once validation accuracy has not improved for `patience` epochs.
    Returns the checkpoint of the best validation epoch and the history, a
    list of `{"epoch", "train_loss", "val_accuracy"}` dictionaries. A
    non-finite loss raises `FloatingPointError`.
    """
    if not isinstance(dataset, _Dataset):
        raise TypeError(f"Expected Dataset, got {dataset.__class__.__name__}")
    if tc is None:
        tc = TrainingConfig()
    if dataset.normalizer is None:
        raise ValueError("The dataset has no normalizer; split it with split_dataset().")
    if dataset.n_channels != arch.input_channels:
        raise ValueError(
            f"The dataset has {dataset.n_channels} channels, the architecture expects {arch.input_channels}."
        )
    if dataset.num_states != arch.num_states:
        raise ValueError(
            f"The dataset has {dataset.num_states} states, the architecture expects {arch.num_states}."
        )
    train_samples = [(s, a) for _, s, a in dataset.split("train")]
    validation_samples = [(s, a) for _, s, a in dataset.split("validation")]
    if not train_samples or not validation_samples:
        raise ValueError("Training needs nonempty train and validation splits.")
    normalizer = dataset.normalizer
    x, m, _, y = prepare_batch(train_samples, normalizer, arch.max_length, arch.num_states)
    vx, vm, vlabels, _ = prepare_batch(
        validation_samples, normalizer, arch.max_length, arch.num_states
    )
    network = Network(arch, seed=tc.seed)
    optimizer = _Adam(tc.learning_rate, tc.beta1, tc.beta2, tc.epsilon)
    rng = _np.random.default_rng(tc.seed)
    history = []
    best_accuracy = -_np.inf
    best_parameters = None
    best_epoch = 0
    stale_epochs = 0
    for epoch in range(1, tc.max_epochs + 1):
        order = rng.permutation(x.shape[0])
        losses = []
        for start in range(0, len(order), tc.batch_size):
            batch = order[start : start + tc.batch_size]
            loss, grads = network.loss_and_gradients(x[batch], m[batch], y[batch])
            if not _np.isfinite(loss) or not all(
                _np.all(_np.isfinite(g)) for g in grads.values()
            ):
                raise FloatingPointError(
                    f"Training diverged at epoch {epoch}: the loss is {loss}."
                )
            optimizer.step(network.parameters, grads)
            losses.append(loss)
        train_loss = float(_np.mean(losses))
        val_accuracy = masked_accuracy(network, vx, vm, vlabels, batch_size=tc.batch_size)
        history.append(
            {"epoch": epoch, "train_loss": train_loss, "val_accuracy": val_accuracy}
        )
        _logger.info(
            "epoch %d: train_loss=%.6f val_accuracy=%.6f", epoch, train_loss, val_accuracy
        )
        if val_accuracy > best_accuracy:
            best_accuracy = val_accuracy
            best_parameters = {k: v.copy() for k, v in network.parameters.items()}
            best_epoch = epoch
            stale_epochs = 0
        else:
            stale_epochs += 1
            if stale_epochs >= tc.patience:
                _logger.info(
                    "validation accuracy has not improved for %d epochs; stopping",
                    stale_epochs,
                )
                break
    metadata = {
        "epochs": len(history),
        "best_epoch": best_epoch,
        "best_val_accuracy": best_accuracy,
        "final_train_loss": history[-1]["train_loss"],
        "seed": tc.seed,
        "training": tc.serialize(),
        "state_names": dataset.state_names,
        "channel_names": dataset.channel_names,
    }
    checkpoint = ModelCheckpoint(arch, best_parameters, normalizer, metadata)
    return checkpoint, history


def predict(checkpoint: ModelCheckpoint, series, *, network: Network = None):
    """
    Label every timestep of a `MultivariateSeries`: normalize with the
    stored statistics, pad to `max(L, l)`, run the network, and truncate to
    the original length *l*. Returns the `l × N_s` probability matrix and
    the argmax `LabelSequence` (ties go to the lowest state id). Pass a
    prebuilt `network` to skip rebuilding it for every call.
    """
    if not isinstance(checkpoint, ModelCheckpoint):
        raise TypeError(f"Expected ModelCheckpoint, got {checkpoint.__class__.__name__}")
    _is_MultivariateSeries(series)
    config = checkpoint.config
    if series.n_channels != config.input_channels:
        raise ValueError(
            f"The series has {series.n_channels} channels, the model expects {config.input_channels}."
        )
    if checkpoint.normalizer is not None:
        series = checkpoint.normalizer.apply(series)
    if network is None:
        network = checkpoint.network()
    length = len(series)
    padded = _pad_and_mask(series, max(config.max_length, length))
    probabilities = network.forward(padded.data[None], padded.mask[None])[0][:length]
    return probabilities, _decode_one_hot(probabilities)


def save_checkpoint(checkpoint: ModelCheckpoint, file_path):
    """
    Write a checkpoint to a single binary file: an 8-byte magic string, the
    length of a JSON header as an unsigned little-endian 64-bit integer, the
    JSON header itself (config, format version, normalizer, metadata, and
    the name and shape of every tensor), and finally the raw little-endian
    float64 tensor blocks in header order.
    """
    if not isinstance(checkpoint, ModelCheckpoint):
        raise TypeError(f"Expected ModelCheckpoint, got {checkpoint.__class__.__name__}")
    normalizer = checkpoint.normalizer
    parameters = checkpoint.parameters
    names = [name for name, _ in checkpoint.config.parameter_shapes()]
    header = {
        "format_version": FORMAT_VERSION,
        "config": checkpoint.config.serialize(),
        "normalizer": None if normalizer is None else normalizer.serialize(),
        "metadata": checkpoint.metadata,
        "tensors": [{"name": name, "shape": list(parameters[name].shape)} for name in names],
    }
    header_bytes = _json.dumps(header, separators=(",", ":")).encode("utf-8")
    with open(str(file_path), "wb") as file:
        file.write(_MAGIC)
        file.write(_struct.pack(_LENGTH_FORMAT, len(header_bytes)))
        file.write(header_bytes)
        for name in names:
            file.write(_np.ascontiguousarray(parameters[name], dtype="<f8").tobytes())


def load_checkpoint(file_path) -> ModelCheckpoint:
    """
    Read a checkpoint written by `save_checkpoint()`. Raises `ValueError`
    for a corrupt or truncated file, a different format version, or tensor
    shapes that do not match the stored config; no partial model is
    returned.
    """
    with open(str(file_path), "rb") as file:
        content = file.read()
    prefix = len(_MAGIC) + _struct.calcsize(_LENGTH_FORMAT)
    if len(content) < prefix or content[: len(_MAGIC)] != _MAGIC:
        raise ValueError(f"corrupt checkpoint: {file_path} is not a statekit checkpoint.")
    (header_length,) = _struct.unpack(_LENGTH_FORMAT, content[len(_MAGIC) : prefix])
    if prefix + header_length > len(content):
        raise ValueError(f"corrupt checkpoint: {file_path} is truncated.")
    try:
        header = _json.loads(content[prefix : prefix + header_length].decode("utf-8"))
    except (UnicodeDecodeError, _json.JSONDecodeError):
        raise ValueError(f"corrupt checkpoint: unreadable header in {file_path}.") from None
    if not isinstance(header, dict):
        raise ValueError(f"corrupt checkpoint: unreadable header in {file_path}.")
    if header.get("format_version") != FORMAT_VERSION:
        raise ValueError(
            f"checkpoint version mismatch: found {header.get('format_version')}, expected {FORMAT_VERSION}."
        )
    try:
        config = ArchitectureConfig(**header["config"])
        tensors = header["tensors"]
    except (KeyError, TypeError) as error:
        raise ValueError(f"corrupt checkpoint: incomplete header ({error}).") from None
    expected = [(name, list(shape)) for name, shape in config.parameter_shapes()]
    found = [(tensor["name"], list(tensor["shape"])) for tensor in tensors]
    if found != expected:
        raise ValueError(
            "checkpoint shape mismatch: the stored tensors do not match the stored config."
        )
    sizes = [int(_np.prod(shape)) for _, shape in expected]
    offset = prefix + header_length
    if len(content) != offset + 8 * sum(sizes):
        raise ValueError(f"corrupt checkpoint: {file_path} has the wrong length.")
    parameters = {}
    for (name, shape), size in zip(expected, sizes):
        block = _np.frombuffer(content, dtype="<f8", count=size, offset=offset)
        parameters[name] = block.astype(float).reshape(shape)
        offset += 8 * size
    normalizer = header.get("normalizer")
    if normalizer is not None:
        normalizer = _Normalizer(normalizer["mean"], normalizer["std"])
    return ModelCheckpoint(config, parameters, normalizer, header.get("metadata"))


def _initial_tensor(rng, name, shape):
    if name.endswith(("bias", ".b")):
        return _np.zeros(shape)
    if len(shape) == 3:
        kernel_size, channels_in, channels_out = shape
        fan_in, fan_out = kernel_size * channels_in, kernel_size * channels_out
    else:
        fan_in, fan_out = shape
    limit = _np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)
