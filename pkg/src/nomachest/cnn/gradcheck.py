"""Finite-difference checks of every backward pass, in float64.

Each check draws a small random configuration, reduces the layer output to
the scalar ``sum(out * G)`` for a random ``G`` and compares the analytic
gradients with central differences (step ``h``). The error measure is
``||analytic - numeric|| / max(||analytic||, ||numeric||, FLOOR)`` per
gradient tensor, which stays meaningful when individual entries are near
zero. ``FLOOR`` keeps gradients that are identically zero in exact arithmetic
(a conv bias feeding batch norm) from comparing rounding noise to rounding
noise.
"""

from dataclasses import dataclass

import numpy as np

from ..numerics import make_rng
from . import layers as L
from .model import build_model
from .training import mse_loss

STEP = 1e-3
FLOOR = 1e-5
# whole-stack probes use a smaller step and stay clear of ReLU kinks
MODEL_STEP = 1e-4
KINK_MARGIN = 1e-2
TOLERANCES = {"conv": 1e-4, "relu": 1e-4, "bn": 1e-3, "loss": 1e-4, "model": 1e-4}


@dataclass
class CheckResult:
    name: str
    configs: int
    max_rel_error: float
    tolerance: float

    @property
    def passed(self):
        return self.max_rel_error < self.tolerance

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name:6s} configs={self.configs:3d} max_rel_err={self.max_rel_error:.3e} tol={self.tolerance:.0e}"


def rel_error(a, n):
    a = np.ravel(a)
    n = np.ravel(n)
    scale = max(np.linalg.norm(a), np.linalg.norm(n), FLOOR)
    return float(np.linalg.norm(a - n) / scale)


def numeric_grad(f, x, h=STEP):
    """Central-difference gradient of scalar ``f()`` w.r.t. array ``x`` (perturbed in place)."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + h
        fp = f()
        x[i] = old - h
        fm = f()
        x[i] = old
        g[i] = (fp - fm) / (2 * h)
    return g


def _conv_layer(rng, cin, cout):
    return L.ConvLayer(rng.standard_normal((cout, cin, 3, 3)), rng.standard_normal(cout))


def check_conv(rng):
    b, cin, cout = rng.integers(1, 3), rng.integers(1, 4), rng.integers(1, 4)
    h, w = rng.integers(2, 6), rng.integers(2, 6)
    layer = _conv_layer(rng, cin, cout)
    x = rng.standard_normal((b, cin, h, w))
    g = rng.standard_normal((b, cout, h, w))

    def f():
        return float(np.sum(L.conv_forward(x, layer) * g))

    gx, gw, gb = L.conv_backward(x, g, layer)
    return max(
        rel_error(gx, numeric_grad(f, x)),
        rel_error(gw, numeric_grad(f, layer.weights)),
        rel_error(gb, numeric_grad(f, layer.bias)),
    )


def check_relu(rng):
    x = rng.standard_normal((2, 3, 4, 5))
    # keep every entry at least 10 steps away from the kink
    x = np.where(np.abs(x) < 10 * STEP, np.sign(x + 1e-12) * 10 * STEP + x, x)
    g = rng.standard_normal(x.shape)

    def f():
        return float(np.sum(L.relu_forward(x) * g))

    return rel_error(L.relu_backward(x, g), numeric_grad(f, x))


def check_bn(rng):
    b, c = rng.integers(2, 4), rng.integers(1, 4)
    h, w = rng.integers(2, 5), rng.integers(2, 5)
    layer = L.BatchNormLayer.create(c, np.float64)
    layer.scale[...] = rng.uniform(0.5, 1.5, c)
    layer.shift[...] = rng.standard_normal(c)
    x = rng.standard_normal((b, c, h, w)) * rng.uniform(0.5, 2.0)
    g = rng.standard_normal(x.shape)

    def f():
        y, _ = L.bn_forward(x, layer, "train")
        return float(np.sum(y * g))

    _, cache = L.bn_forward(x, layer, "train")
    gx, gs, gsh = L.bn_backward(g, layer, cache)
    return max(
        rel_error(gx, numeric_grad(f, x)),
        rel_error(gs, numeric_grad(f, layer.scale)),
        rel_error(gsh, numeric_grad(f, layer.shift)),
    )


def check_loss(rng):
    shape = (rng.integers(1, 4), 2, rng.integers(1, 4), rng.integers(1, 5))
    pred = rng.standard_normal(shape)
    target = rng.standard_normal(shape)
    _, grad = mse_loss(pred, target)
    return rel_error(grad, numeric_grad(lambda: mse_loss(pred, target)[0], pred))


def _relu_margin(model, x):
    """Smallest |pre-activation| seen by any ReLU of the stack (train-mode statistics)."""
    probe = model.copy()
    h = L.to_nhwc(x)
    margin = np.inf
    for layer in probe.layers:
        if isinstance(layer, L.ConvLayer):
            h, _ = L.conv_forward_nhwc(h, layer)
        elif isinstance(layer, L.BatchNormLayer):
            h, _ = L.bn_forward_nhwc(h, layer, "train")
        else:
            margin = min(margin, float(np.min(np.abs(h))))
            h = L.relu_forward(h)
    return margin


def check_model(rng):
    """Whole stack (conv, BN, ReLU) against differences on a few sampled parameters.

    Inputs whose pre-activations come within ``KINK_MARGIN`` of a ReLU kink
    are redrawn, as in :func:`check_relu`.
    """
    model = build_model(int(rng.integers(3, 5)), int(rng.integers(2, 4)), rng=rng, dtype=np.float64)
    for layer in model.layers:
        if isinstance(layer, L.ConvLayer):
            layer.bias[...] = rng.standard_normal(layer.bias.shape) * 0.1
    for _ in range(100):
        x = rng.standard_normal((3, 2, 3, 4))
        if _relu_margin(model, x) > KINK_MARGIN:
            break
    target = rng.standard_normal((3, 2, 3, 4))

    def f():
        return mse_loss(model.copy().forward(x, "train"), target)[0]

    out = model.forward(x, "train")
    _, g = mse_loss(out, target)
    grads, _ = model.backward(g)
    worst = 0.0
    for p, gp in zip(model.params(), grads):
        # probe three random entries per tensor
        idx = [tuple(int(rng.integers(s)) for s in p.shape) for _ in range(3)]
        num = []
        for i in idx:
            old = p[i]
            p[i] = old + MODEL_STEP
            fp = f()
            p[i] = old - MODEL_STEP
            fm = f()
            p[i] = old
            num.append((fp - fm) / (2 * MODEL_STEP))
        worst = max(worst, rel_error(np.array([gp[i] for i in idx]), np.array(num)))
    return worst


CHECKS = {"conv": check_conv, "relu": check_relu, "bn": check_bn, "loss": check_loss, "model": check_model}


def run_suite(configs=50, seed=0, names=None):
    """Run each check over ``configs`` random configurations; returns one :class:`CheckResult` per check."""
    results = []
    for j, name in enumerate(names or CHECKS):
        worst = 0.0
        for i in range(configs):
            worst = max(worst, CHECKS[name](make_rng(seed, j, i)))
        results.append(CheckResult(name, configs, worst, TOLERANCES[name]))
    return results
