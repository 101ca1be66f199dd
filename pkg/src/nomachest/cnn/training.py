"""Mini-batch Adam training of the refinement CNN on the Frobenius MSE."""

import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidParameterError, NonFiniteLossError
from ..numerics import make_rng
from .adam import AdamState, adam_step
from . import layers as L
from .layers import complex_to_planes
from .model import build_model

log = logging.getLogger(__name__)


def mse_loss(pred, target):
    """``(1/N) sum_i ||H_i - H^_i||_F^2`` and its gradient w.r.t. ``pred``.

    Accepts complex (N, H, W) stacks or real (N, 2, H, W) planes; the squared
    complex modulus equals the sum of both squared plane differences.
    """
    pred = np.asarray(pred)
    target = np.asarray(target)
    if pred.shape != target.shape:
        raise InvalidParameterError(f"prediction {pred.shape} and target {target.shape} differ in shape")
    if pred.shape[0] == 0:
        raise InvalidParameterError("empty batch")
    n = pred.shape[0]
    diff = pred - target
    if np.iscomplexobj(diff):
        loss = float(np.sum(diff.real**2 + diff.imag**2)) / n
    else:
        loss = float(np.sum(diff.astype(np.float64) ** 2)) / n
    # for complex input this is the Wirtinger-style real+imag gradient packed as a complex array
    grad = (2.0 / n) * diff
    return loss, grad


@dataclass
class TrainConfig:
    epochs: int = 100
    learning_rate: float = 3e-4
    batch_size: int = 128
    layer_count: int = 6
    filters: int = 64
    seed: int = 0
    output_init: str = "glorot"


@dataclass
class TrainResult:
    model: object  # weights after the last epoch
    best_model: object  # weights at the lowest validation RMSE
    best_epoch: int
    train_loss: list = field(default_factory=list)
    val_rmse: list = field(default_factory=list)
    diverged: bool = False


def _first_nonfinite_layer(model, xb):
    x = xb.astype(model.dtype)
    probe = model.copy()
    for i, layer in enumerate(probe.layers):
        if isinstance(layer, L.ConvLayer):
            x = L.conv_forward(x, layer)
        elif isinstance(layer, L.BatchNormLayer):
            x, _ = L.bn_forward(x, layer, "train")
        else:
            x = L.relu_forward(x)
        if not np.all(np.isfinite(x)):
            return i
    return None


def evaluate_loss(model, x, y, batch_size=256):
    """Mean Frobenius error of ``model`` (BN in inference mode) on already-scaled planes.

    The result is in the network's scaled units; divide by
    ``model.target_scale ** 2`` for channel units.
    """
    total = 0.0
    for i in range(0, len(x), batch_size):
        out = model.forward(x[i : i + batch_size], mode="infer")
        d = out.astype(np.float64) - y[i : i + batch_size]
        total += float(np.sum(d * d))
    return total / len(x)


def rms(z):
    return float(np.sqrt(np.mean(np.abs(np.asarray(z, dtype=np.complex128)) ** 2)))


def train(inputs, targets, val_inputs, val_targets, config, model=None, on_epoch=None):
    """Train a CNN mapping coarse observations to clustered channels.

    ``inputs``/``targets`` are complex (N, N_r, N_t) stacks. Shuffling and
    initialisation are drawn from ``config.seed`` only, so two calls with the
    same arguments give identical histories. Raises
    :class:`NonFiniteLossError` if a batch loss stops being finite.
    """
    if len(inputs) == 0:
        raise InvalidParameterError("training set is empty")
    if len(val_inputs) == 0:
        raise InvalidParameterError("validation split is empty")
    if model is None:
        model = build_model(config.layer_count, config.filters, rng=make_rng(config.seed, 0), output_init=config.output_init)
        # unit-RMS inputs and targets from the training split, rounded to
        # float32 so a checkpoint round trip is exact
        model.input_scale = float(np.float32(1.0 / max(rms(inputs), 1e-30)))
        model.target_scale = float(np.float32(1.0 / max(rms(targets), 1e-30)))
    si, st = model.input_scale, model.target_scale
    x = complex_to_planes(np.asarray(inputs) * si).astype(np.float32)
    y = complex_to_planes(np.asarray(targets) * st).astype(np.float32)
    xv = complex_to_planes(np.asarray(val_inputs) * si).astype(np.float32)
    yv = complex_to_planes(np.asarray(val_targets) * st).astype(np.float32)
    shuffle_rng = make_rng(config.seed, 1)
    state = AdamState(learning_rate=config.learning_rate)
    params = model.params()
    n = len(x)
    bs = min(config.batch_size, n)

    result = TrainResult(model=model, best_model=model.copy(), best_epoch=-1)
    best = np.inf
    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(n)
        running = 0.0
        for b, start in enumerate(range(0, n, bs)):
            idx = order[start : start + bs]
            if len(idx) < 2:
                # batch norm cannot use a single-sample batch
                continue
            xb = x[idx]
            out = model.forward(xb, mode="train")
            loss, grad = mse_loss(out, y[idx])
            if not np.isfinite(loss):
                exc = NonFiniteLossError(epoch, b, _first_nonfinite_layer(model, xb))
                exc.partial = result
                raise exc
            grads, _ = model.backward(grad)
            adam_step(params, grads, state)
            running += loss * len(idx)
        result.train_loss.append(running / n / st**2)
        rmse = float(np.sqrt(evaluate_loss(model, xv, yv))) / st
        result.val_rmse.append(rmse)
        if rmse < best:
            best = rmse
            result.best_model = model.copy()
            result.best_epoch = epoch
        log.debug("epoch %d train_loss %.6g val_rmse %.6g", epoch, result.train_loss[-1], rmse)
        if on_epoch is not None:
            on_epoch(epoch, result)
    return result
