"""The refinement CNN: conv+ReLU, (L_c - 2) x [conv, BN, ReLU], conv."""

import copy

import numpy as np

from ..errors import InvalidArchitectureError, InvalidDimensionError
from . import layers as L


class CnnModel:
    """Ordered stack of :class:`ConvLayer`, :class:`BatchNormLayer` and :class:`ReLU`.

    ``forward`` keeps whatever the matching ``backward`` needs; a model is
    therefore not safe to train from two threads, but ``predict`` on a
    snapshot is.
    """

    def __init__(self, layer_list, layer_count, filters, input_scale=1.0, target_scale=1.0):
        self.layers = layer_list
        self.layer_count = layer_count
        self.filters = filters
        # network sees y * input_scale and predicts H * target_scale
        self.input_scale = float(input_scale)
        self.target_scale = float(target_scale)
        self._cache = None

    @property
    def dtype(self):
        return self.layers[0].weights.dtype

    def params(self):
        return [p for layer in self.layers for p in layer.params()]

    def num_params(self, include_bn=True):
        return int(sum(p.size for layer in self.layers for p in layer.params()
                       if include_bn or not isinstance(layer, L.BatchNormLayer)))

    def bn_layers(self):
        return [layer for layer in self.layers if isinstance(layer, L.BatchNormLayer)]

    def copy(self):
        clone = copy.deepcopy(self)
        clone._cache = None
        return clone

    def astype(self, dtype):
        """Deep copy with every parameter and running statistic cast to ``dtype``."""
        clone = self.copy()
        for layer in clone.layers:
            for name, val in vars(layer).items():
                if isinstance(val, np.ndarray):
                    setattr(layer, name, val.astype(dtype))
        return clone

    def forward(self, x, mode="train"):
        """Run the stack on (B, 2, H, W) planes. ``mode='train'`` caches for backward."""
        if x.ndim != 4 or x.shape[1] != 2:
            raise InvalidDimensionError(f"model input must be (B, 2, H, W), got {x.shape}")
        x = L.to_nhwc(x.astype(self.dtype, copy=False))
        cache = []
        for layer in self.layers:
            if isinstance(layer, L.ConvLayer):
                out, xf = L.conv_forward_nhwc(x, layer)
                cache.append((x.shape, xf))
            elif isinstance(layer, L.BatchNormLayer):
                out, bn_cache = L.bn_forward_nhwc(x, layer, mode)
                cache.append(bn_cache)
            else:
                out = L.relu_forward(x)
                cache.append(out)  # relu output > 0 iff input > 0
            x = out
        self._cache = cache if mode == "train" else None
        return L.to_nchw(x)

    def backward(self, grad_out, need_input_grad=False):
        """Back-propagate ``dLoss/dOutput`` (NCHW).

        Returns ``(param_grads, input_grad)`` with ``param_grads`` aligned
        with :meth:`params`; ``input_grad`` is None unless requested.
        """
        if self._cache is None:
            raise RuntimeError("backward() needs a preceding forward(mode='train')")
        grads = []
        g = L.to_nhwc(grad_out.astype(self.dtype, copy=False))
        for i, (layer, cache) in enumerate(zip(reversed(self.layers), reversed(self._cache))):
            if isinstance(layer, L.ConvLayer):
                shape, xf = cache
                g, gw, gb = L.conv_backward_nhwc(shape, g, layer, xf, need_input_grad=need_input_grad or i < len(self.layers) - 1)
                grads.append([gw, gb])
            elif isinstance(layer, L.BatchNormLayer):
                g, gs, gsh = L.bn_backward_nhwc(g, layer, cache)
                grads.append([gs, gsh])
            else:
                g = L.relu_backward(cache, g)
        self._cache = None
        params = [gp for pair in reversed(grads) for gp in pair]
        return params, (L.to_nchw(g) if g is not None else None)


def _glorot(rng, shape, dtype):
    fan_in = shape[1] * shape[2] * shape[3]
    fan_out = shape[0] * shape[2] * shape[3]
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, shape).astype(dtype)


OUTPUT_INITS = ("glorot", "zero")


def build_model(layer_count=6, filters=64, rng=None, dtype=np.float32, output_init="glorot"):
    """Build the L_c-layer stack.

    Input conv (2 -> filters) + ReLU, ``layer_count - 2`` hidden blocks of
    conv (filters -> filters) + BN + ReLU, and an output conv (filters -> 2)
    with no activation. Weights are Glorot-uniform, biases zero;
    ``output_init='zero'`` zeroes the output conv so an untrained model
    predicts the all-zero channel.
    """
    if layer_count < 3:
        raise InvalidArchitectureError(f"need at least 3 convolutional layers (input, hidden, output), got {layer_count}")
    if filters < 1:
        raise InvalidArchitectureError("filters must be positive")
    if output_init not in OUTPUT_INITS:
        raise InvalidArchitectureError(f"output_init must be one of {OUTPUT_INITS}, got {output_init!r}")
    if rng is None:
        rng = np.random.default_rng(0)

    def conv(cin, cout):
        shape = (cout, cin, L.KERNEL, L.KERNEL)
        return L.ConvLayer(_glorot(rng, shape, dtype), np.zeros(cout, dtype))

    stack = [conv(2, filters), L.ReLU()]
    for _ in range(layer_count - 2):
        stack += [conv(filters, filters), L.BatchNormLayer.create(filters, dtype), L.ReLU()]
    stack.append(conv(filters, 2))
    if output_init == "zero":
        stack[-1].weights[...] = 0
    return CnnModel(stack, layer_count, filters)


def param_count(layer_count, filters, include_bn=True):
    """Closed-form parameter count of :func:`build_model`."""
    k = L.KERNEL * L.KERNEL
    first = filters * 2 * k + filters
    hidden = (layer_count - 2) * (filters * filters * k + filters)
    last = 2 * filters * k + 2
    bn = (layer_count - 2) * 2 * filters if include_bn else 0
    return first + hidden + last + bn


def predict(model, y_tilde, batch_size=256):
    """Estimated complex channel(s) for one (H, W) or a stack of (B, H, W) coarse observations."""
    y = np.asarray(y_tilde)
    single = y.ndim == 2
    planes = L.complex_to_planes(y * model.input_scale)
    outs = [model.forward(planes[i : i + batch_size], mode="infer") for i in range(0, len(planes), batch_size)]
    est = L.planes_to_complex(np.concatenate(outs)) / model.target_scale
    return est[0] if single else est
