import numpy as np
import pytest
from statekit import _layers

EPSILON = 1e-6


def numerical_gradient(f, array):
    """
    Central differences of the scalar function `f()` with respect to every
    entry of `array`, which is perturbed in place.
    """
    grad = np.zeros_like(array)
    for index in np.ndindex(array.shape):
        original = array[index]
        array[index] = original + EPSILON
        plus = f()
        array[index] = original - EPSILON
        minus = f()
        array[index] = original
        grad[index] = (plus - minus) / (2 * EPSILON)
    return grad


def assert_gradient(analytic, numeric):
    assert analytic.shape == numeric.shape
    assert np.allclose(analytic, numeric, rtol=1e-4, atol=1e-6)


@pytest.mark.parametrize("seed", range(20))
def test_conv1d_gradients(seed):
    rng = np.random.default_rng(seed)
    kernel_size = int(rng.integers(1, 5))
    x = rng.normal(size=(2, 7, 3))
    weight = rng.normal(size=(kernel_size, 3, 4))
    bias = rng.normal(size=4)
    projection = rng.normal(size=(2, 7, 4))

    def loss():
        out, _ = _layers.conv1d_forward(x, weight, bias)
        return (out * projection).sum()

    _, cache = _layers.conv1d_forward(x, weight, bias)
    dx, dweight, dbias = _layers.conv1d_backward(projection, cache)
    assert_gradient(dx, numerical_gradient(loss, x))
    assert_gradient(dweight, numerical_gradient(loss, weight))
    assert_gradient(dbias, numerical_gradient(loss, bias))


def test_conv1d_same_padding():
    x = np.arange(1.0, 6.0)[:, None]
    weight = np.ones((3, 1, 1))
    out, _ = _layers.conv1d_forward(x, weight, np.zeros(1), activation="none")
    assert out[:, 0].tolist() == [3.0, 6.0, 9.0, 12.0, 9.0]
    weight = np.ones((2, 1, 1))
    out, _ = _layers.conv1d_forward(x, weight, np.zeros(1), activation="none")
    assert out[:, 0].tolist() == [1.0, 3.0, 5.0, 7.0, 9.0]


def test_conv1d_invalid():
    with pytest.raises(ValueError):
        _layers.conv1d_forward(np.zeros((5, 2)), np.zeros((3, 3, 1)), np.zeros(1))
    with pytest.raises(ValueError):
        _layers.conv1d_forward(np.zeros((5, 2)), np.zeros((3, 2, 1)), np.zeros(2))
    with pytest.raises(ValueError):
        _layers.conv1d_forward(np.zeros(5), np.zeros((3, 1, 1)), np.zeros(1))


@pytest.mark.parametrize("seed", range(20))
def test_gru_gradients(seed):
    rng = np.random.default_rng(100 + seed)
    hidden = int(rng.integers(1, 4))
    x = rng.normal(size=(6, 2))
    W = rng.normal(scale=0.5, size=(2, 3 * hidden))
    U = rng.normal(scale=0.5, size=(hidden, 3 * hidden))
    b = rng.normal(scale=0.5, size=3 * hidden)
    h0 = rng.normal(size=hidden)
    projection = rng.normal(size=(6, hidden))

    def loss():
        h, _ = _layers.gru_forward(x, W, U, b, h0)
        return (h * projection).sum()

    _, cache = _layers.gru_forward(x, W, U, b, h0)
    dx, dW, dU, db, dh0 = _layers.gru_backward(projection, cache)
    assert_gradient(dx, numerical_gradient(loss, x))
    assert_gradient(dW, numerical_gradient(loss, W))
    assert_gradient(dU, numerical_gradient(loss, U))
    assert_gradient(db, numerical_gradient(loss, b))
    assert_gradient(dh0, numerical_gradient(loss, h0))


def test_gru_is_causal():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(8, 3))
    W, U, b = rng.normal(size=(3, 6)), rng.normal(size=(2, 6)), rng.normal(size=6)
    h, _ = _layers.gru_forward(x, W, U, b)
    x[5:] = 100.0
    h_changed, _ = _layers.gru_forward(x, W, U, b)
    assert np.array_equal(h[:5], h_changed[:5])
    assert h.shape == (8, 2)


def test_gru_invalid():
    with pytest.raises(ValueError):
        _layers.gru_forward(np.zeros((4, 3)), np.zeros((2, 6)), np.zeros((2, 6)), np.zeros(6))
    with pytest.raises(ValueError):
        _layers.gru_forward(np.zeros((4, 2)), np.zeros((2, 6)), np.zeros((2, 6)), np.zeros(5))


@pytest.mark.parametrize("seed", range(20))
@pytest.mark.parametrize("activation", ["none", "leaky_relu", "softmax"])
def test_dense_gradients(seed, activation):
    rng = np.random.default_rng(200 + seed)
    x = rng.normal(size=(2, 5, 3))
    W = rng.normal(size=(3, 4))
    b = rng.normal(size=4)
    projection = rng.normal(size=(2, 5, 4))

    def loss():
        out, _ = _layers.dense_forward(x, W, b, activation)
        return (out * projection).sum()

    _, cache = _layers.dense_forward(x, W, b, activation)
    dx, dW, db = _layers.dense_backward(projection, cache)
    assert_gradient(dx, numerical_gradient(loss, x))
    assert_gradient(dW, numerical_gradient(loss, W))
    assert_gradient(db, numerical_gradient(loss, b))


def test_activations():
    x = np.array([-2.0, 0.0, 3.0])
    assert _layers.relu(x).tolist() == [0.0, 0.0, 3.0]
    assert np.allclose(_layers.leaky_relu(x), [-0.6, 0.0, 3.0])
    assert np.allclose(_layers.softmax(np.array([[0.0, 0.0]])), [[0.5, 0.5]])
    assert _layers.sigmoid(np.array([0.0]))[0] == 0.5
    with pytest.raises(ValueError):
        _layers.dense_forward(np.zeros((2, 3)), np.zeros((3, 2)), np.zeros(2), "tanh")


@pytest.mark.parametrize("seed", range(20))
def test_dice_loss_gradient(seed):
    rng = np.random.default_rng(300 + seed)
    pred = _layers.softmax(rng.normal(size=(8, 4)))
    target = np.eye(4)[rng.integers(0, 3, size=8)]
    mask = (np.arange(8) < int(rng.integers(1, 9))).astype(float)

    def loss():
        return _layers.dice_loss(pred, target, mask)[0]

    _, grad = _layers.dice_loss(pred, target, mask)
    assert_gradient(grad, numerical_gradient(loss, pred))
    assert np.all(grad[mask == 0] == 0)


def test_dice_loss_values():
    target = np.eye(3)[[0, 0, 1, 1]]
    mask = np.ones(4)
    perfect, _ = _layers.dice_loss(target, target, mask, smooth=0.0)
    assert perfect == pytest.approx(0.0)
    wrong, _ = _layers.dice_loss(np.eye(3)[[2, 2, 2, 2]], target, mask, smooth=0.0)
    assert wrong == pytest.approx(1.0)
    with pytest.raises(ValueError):
        _layers.dice_loss(target, target, np.zeros(4))


def test_batch_dice_loss_skips_fully_masked_sequences():
    rng = np.random.default_rng(5)
    pred = _layers.softmax(rng.normal(size=(2, 6, 3)))
    target = np.eye(3)[rng.integers(0, 3, size=(2, 6))]
    mask = np.array([np.ones(6), np.zeros(6)])
    loss, grad = _layers.batch_dice_loss(pred, target, mask)
    single, single_grad = _layers.dice_loss(pred[0], target[0], mask[0])
    assert loss == pytest.approx(single)
    assert np.allclose(grad[0], single_grad)
    assert np.all(grad[1] == 0)
    assert _layers.batch_dice_loss(pred, target, np.zeros((2, 6)))[0] == 0.0
