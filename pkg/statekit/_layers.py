"""
Forward and backward kernels of the sequence-labeling network. Every layer
takes a batch `B × L × C` (a single `L × C` sequence is promoted to a batch
of one and demoted again on the way out) and returns its output together
with a cache that the matching backward function consumes. Backward
functions return the gradient with respect to the layer input followed by
the parameter gradients.
"""

import numpy as _np
from scipy.special import expit, softmax as _softmax


def _as_batch(x):
    x = _np.asarray(x, dtype=float)
    if x.ndim == 2:
        return x[None], True
    if x.ndim != 3:
        raise ValueError(f"Expected an L × C or B × L × C array, got shape {x.shape}.")
    return x, False


def _restore(x, single):
    return x[0] if single else x


######################################################################
# ACTIVATIONS
######################################################################


def relu(x):
    return _np.maximum(x, 0.0)


def leaky_relu(x, alpha=0.3):
    """
    `x` for `x >= 0` and `alpha · x` otherwise.
    """
    return _np.where(x >= 0, x, alpha * x)


def softmax(x):
    """
    Row-wise softmax over the last axis.
    """
    return _softmax(x, axis=-1)


def sigmoid(x):
    return expit(x)


def activation_backward(dout, pre, out, activation, alpha=0.3):
    """
    Gradient of an activation with respect to its pre-activation input.
    """
    if activation is None or activation == "none":
        return dout
    if activation == "relu":
        return dout * (pre > 0)
    if activation == "leaky_relu":
        return dout * _np.where(pre >= 0, 1.0, alpha)
    if activation == "softmax":
        return out * (dout - (dout * out).sum(axis=-1, keepdims=True))
    raise ValueError(f"Unknown activation {activation!r}.")


def _activate(pre, activation, alpha):
    if activation is None or activation == "none":
        return pre
    if activation == "relu":
        return relu(pre)
    if activation == "leaky_relu":
        return leaky_relu(pre, alpha)
    if activation == "softmax":
        return softmax(pre)
    raise ValueError(f"Unknown activation {activation!r}.")


######################################################################
# CONVOLUTION
######################################################################


def conv1d_forward(x, weight, bias, activation="relu"):
    """
    Stride-1 convolution with same padding:
    `out[t, o] = bias[o] + Σ_{k,i} weight[k, i, o] · x[t + k - K // 2, i]`,
    where positions outside the sequence count as zero, followed by the
    activation (ReLU by default).
    """
    x, single = _as_batch(x)
    weight = _np.asarray(weight, dtype=float)
    bias = _np.asarray(bias, dtype=float)
    if weight.ndim != 3 or weight.shape[1] != x.shape[2]:
        raise ValueError(
            f"Convolution weight of shape {weight.shape} does not fit input channels {x.shape[2]}."
        )
    if bias.shape != (weight.shape[2],):
        raise ValueError(f"Bias of shape {bias.shape} does not fit {weight.shape[2]} filters.")
    kernel_size = weight.shape[0]
    length = x.shape[1]
    pad_left = kernel_size // 2
    padded = _np.pad(x, ((0, 0), (pad_left, kernel_size - 1 - pad_left), (0, 0)))
    pre = _np.broadcast_to(bias, (x.shape[0], length, bias.shape[0])).copy()
    for k in range(kernel_size):
        pre += padded[:, k : k + length] @ weight[k]
    out = _activate(pre, activation, None)
    cache = (padded, weight, pre, out, activation, pad_left, single)
    return _restore(out, single), cache


def conv1d_backward(dout, cache):
    """
    Returns `(dx, dweight, dbias)`.
    """
    padded, weight, pre, out, activation, pad_left, single = cache
    dout = _np.asarray(dout, dtype=float)
    if single:
        dout = dout[None]
    dpre = activation_backward(dout, pre, out, activation)
    length = pre.shape[1]
    dweight = _np.empty_like(weight)
    dpadded = _np.zeros_like(padded)
    for k in range(weight.shape[0]):
        window = padded[:, k : k + length]
        dweight[k] = _np.tensordot(window, dpre, axes=([0, 1], [0, 1]))
        dpadded[:, k : k + length] += dpre @ weight[k].T
    dbias = dpre.sum(axis=(0, 1))
    dx = dpadded[:, pad_left : pad_left + length]
    return _restore(dx, single), dweight, dbias


######################################################################
# GRU
######################################################################


def gru_forward(x, W, U, b, h0=None):
    """
    Unidirectional GRU over the whole sequence. `W` is `C × 3H`, `U` is
    `H × 3H` and `b` has `3H` entries, with the gate blocks ordered update
    (z), reset (r), candidate. For each step:

    ```
    z = σ(x W_z + h U_z + b_z)
    r = σ(x W_r + h U_r + b_r)
    ĥ = tanh(x W_h + (r ∘ h) U_h + b_h)
    h = (1 - z) ∘ h + z ∘ ĥ
    ```

    Returns the full hidden sequence `L × H`.
    """
    x, single = _as_batch(x)
    W = _np.asarray(W, dtype=float)
    U = _np.asarray(U, dtype=float)
    b = _np.asarray(b, dtype=float)
    hidden = U.shape[0]
    if W.shape != (x.shape[2], 3 * hidden) or U.shape != (hidden, 3 * hidden):
        raise ValueError(
            f"GRU weights {W.shape}, {U.shape} do not fit input channels {x.shape[2]}."
        )
    if b.shape != (3 * hidden,):
        raise ValueError(f"GRU bias of shape {b.shape} does not fit hidden size {hidden}.")
    batch, length, _ = x.shape
    if h0 is None:
        h0 = _np.zeros((batch, hidden))
    else:
        h0 = _np.broadcast_to(_np.asarray(h0, dtype=float), (batch, hidden)).copy()
    projected = x @ W + b
    U_zr, U_h = U[:, : 2 * hidden], U[:, 2 * hidden :]
    z = _np.empty((batch, length, hidden))
    r = _np.empty((batch, length, hidden))
    candidate = _np.empty((batch, length, hidden))
    h = _np.empty((batch, length, hidden))
    h_prev = h0
    for t in range(length):
        gates = expit(projected[:, t, : 2 * hidden] + h_prev @ U_zr)
        z[:, t] = gates[:, :hidden]
        r[:, t] = gates[:, hidden:]
        candidate[:, t] = _np.tanh(
            projected[:, t, 2 * hidden :] + (r[:, t] * h_prev) @ U_h
        )
        h_prev = (1.0 - z[:, t]) * h_prev + z[:, t] * candidate[:, t]
        h[:, t] = h_prev
    cache = (x, W, U, h0, z, r, candidate, h, single)
    return _restore(h, single), cache


def gru_backward(dh_seq, cache):
    """
    Backpropagation through time. Returns `(dx, dW, dU, db, dh0)`.
    """
    x, W, U, h0, z, r, candidate, h, single = cache
    dh_seq = _np.asarray(dh_seq, dtype=float)
    if single:
        dh_seq = dh_seq[None]
    batch, length, hidden = h.shape
    U_zr, U_h = U[:, : 2 * hidden], U[:, 2 * hidden :]
    dprojected = _np.empty((batch, length, 3 * hidden))
    dU = _np.zeros_like(U)
    dh_next = _np.zeros((batch, hidden))
    for t in reversed(range(length)):
        h_prev = h[:, t - 1] if t > 0 else h0
        dh = dh_seq[:, t] + dh_next
        z_t, r_t, c_t = z[:, t], r[:, t], candidate[:, t]
        da_h = dh * z_t * (1.0 - c_t**2)
        dz = dh * (c_t - h_prev)
        dh_prev = dh * (1.0 - z_t)
        drh = da_h @ U_h.T
        dr = drh * h_prev
        dh_prev += drh * r_t
        dU[:, 2 * hidden :] += (r_t * h_prev).T @ da_h
        da_zr = _np.concatenate([dz * z_t * (1.0 - z_t), dr * r_t * (1.0 - r_t)], axis=1)
        dU[:, : 2 * hidden] += h_prev.T @ da_zr
        dh_prev += da_zr @ U_zr.T
        dprojected[:, t, : 2 * hidden] = da_zr
        dprojected[:, t, 2 * hidden :] = da_h
        dh_next = dh_prev
    dW = _np.tensordot(x, dprojected, axes=([0, 1], [0, 1]))
    db = dprojected.sum(axis=(0, 1))
    dx = dprojected @ W.T
    dh0 = dh_next[0] if single else dh_next
    return _restore(dx, single), dW, dU, db, dh0


######################################################################
# DENSE
######################################################################


def dense_forward(x, W, b, activation="none", alpha=0.3):
    """
    Time-distributed affine layer `x W + b` followed by `leaky_relu`,
    `softmax`, or no activation.
    """
    x, single = _as_batch(x)
    W = _np.asarray(W, dtype=float)
    b = _np.asarray(b, dtype=float)
    if W.ndim != 2 or W.shape[0] != x.shape[2] or b.shape != (W.shape[1],):
        raise ValueError(
            f"Dense weights {W.shape} and bias {b.shape} do not fit input channels {x.shape[2]}."
        )
    pre = x @ W + b
    out = _activate(pre, activation, alpha)
    cache = (x, W, pre, out, activation, alpha, single)
    return _restore(out, single), cache


def dense_backward(dout, cache):
    """
    Returns `(dx, dW, db)`.
    """
    x, W, pre, out, activation, alpha, single = cache
    dout = _np.asarray(dout, dtype=float)
    if single:
        dout = dout[None]
    dpre = activation_backward(dout, pre, out, activation, alpha)
    dW = _np.tensordot(x, dpre, axes=([0, 1], [0, 1]))
    db = dpre.sum(axis=(0, 1))
    dx = dpre @ W.T
    return _restore(dx, single), dW, db


######################################################################
# DICE LOSS
######################################################################


def dice_loss(pred, target, mask, smooth=1.0):
    """
    Soft dice loss of one sequence, macro-averaged over the classes present
    in the masked target:
    `1 - mean_c (2 Σ m p g + ε) / (Σ m p + Σ m g + ε)`. Returns the loss and
    its gradient with respect to `pred`.
    """
    pred = _np.asarray(pred, dtype=float)
    target = _np.asarray(target, dtype=float)
    mask = _np.asarray(mask, dtype=float)
    if pred.shape != target.shape or pred.ndim != 2 or mask.shape != pred.shape[:1]:
        raise ValueError(
            f"pred {pred.shape}, target {target.shape} and mask {mask.shape} do not agree."
        )
    if not mask.any():
        raise ValueError("The dice loss is undefined when every position is masked.")
    weighted_pred = pred * mask[:, None]
    weighted_target = target * mask[:, None]
    intersection = (weighted_pred * target).sum(axis=0)
    pred_sum = weighted_pred.sum(axis=0)
    target_sum = weighted_target.sum(axis=0)
    present = target_sum > 0
    denominator = pred_sum + target_sum + smooth
    numerator = 2.0 * intersection + smooth
    loss = 1.0 - (numerator[present] / denominator[present]).mean()
    scale = _np.where(present, -1.0 / present.sum(), 0.0)
    grad = (
        mask[:, None]
        * scale
        * (2.0 * target * denominator - numerator)
        / denominator**2
    )
    return float(loss), grad


def batch_dice_loss(pred, target, mask, smooth=1.0):
    """
    Mean dice loss over the sequences of a batch that have at least one
    unmasked position; fully masked sequences contribute neither loss nor
    gradient. A batch with no unmasked positions has zero loss.
    """
    pred = _np.asarray(pred, dtype=float)
    grad = _np.zeros_like(pred)
    active = [i for i in range(pred.shape[0]) if _np.any(mask[i])]
    if not active:
        return 0.0, grad
    total = 0.0
    for i in active:
        loss, grad[i] = dice_loss(pred[i], target[i], mask[i], smooth)
        total += loss
    grad /= len(active)
    return total / len(active), grad
