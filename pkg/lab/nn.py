"""
Dense float64 forward/backward engine.

Six layer kinds (affine, conv2d, maxpool2x2, relu, dropout, softmax-xent),
the three architectures of the comparison protocol, Adam, and a
finite-difference gradient checker.
"""

from dataclasses import dataclass, field
from ._compat import StrEnum
import logging
import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .exceptions import DimensionError, InputError, StateError
from .regularization import (
    Convention, RetainGroup, RetainGroupConfig, apply_dropout_eval,
    apply_dropout_eval_classic, apply_dropout_train, dropout_backward,
    next_pass_id, sample_mask,
)

logger = logging.getLogger(__name__)

DTYPE = np.float64
POOL_PAD_VALUE = np.finfo(DTYPE).min


class LayerKind(StrEnum):
    AFFINE = 'affine'
    CONV2D = 'conv2d'
    MAXPOOL2X2 = 'maxpool2x2'
    RELU = 'relu'
    DROPOUT = 'dropout'
    SOFTMAX_XENT = 'softmax-xent'


class Padding(StrEnum):
    VALID = 'valid'
    SAME = 'same'


class LayerSizeMode(StrEnum):
    N = 'n'
    N_OVER_THETA = 'n_over_theta'


class Architecture(StrEnum):
    MLP = 'mlp'
    CNN1 = 'cnn1'
    CNN2 = 'cnn2'


@dataclass(frozen=True)
class LayerSpec:
    """
    One layer of a network.

    dims: (in, out) for affine, (kh, kw, c_in, c_out) for conv2d, () otherwise.
    """
    kind: LayerKind
    dims: tuple = ()
    retain_group: RetainGroup = RetainGroup.NONE
    padding: Padding = Padding.SAME

    def __post_init__(self):
        object.__setattr__(self, 'kind', LayerKind(self.kind))
        object.__setattr__(self, 'retain_group', RetainGroup(self.retain_group))
        object.__setattr__(self, 'padding', Padding(self.padding))
        object.__setattr__(self, 'dims', tuple(self.dims))


# ==================== FUNCTIONAL OPERATIONS ====================

def relu_forward(x):
    return np.maximum(x, 0.0)


def relu_backward(dy, x):
    return dy * (x > 0)


def _flatten_batch(x):
    return x.reshape(x.shape[0], -1)


def affine_forward(x, W, b):
    """y = xW + b; inputs with more than two axes are flattened per example."""
    x2 = _flatten_batch(x)
    if x2.shape[1] != W.shape[0]:
        raise DimensionError(
            f"affine: input axis 1 has {x2.shape[1]} units but W axis 0 has {W.shape[0]}"
        )
    if b.shape != (W.shape[1],):
        raise DimensionError(
            f"affine: bias axis 0 has {b.shape[0] if b.ndim else 0} entries but W axis 1 has {W.shape[1]}"
        )
    return x2 @ W + b


def affine_backward(dy, x, W):
    x2 = _flatten_batch(x)
    dW = x2.T @ dy
    db = dy.sum(axis=0)
    dx = (dy @ W.T).reshape(x.shape)
    return dx, dW, db


def _same_pads(k):
    before = (k - 1) // 2
    return before, k - 1 - before


def _pad_input(x, kh, kw, padding):
    padding = Padding(padding)
    if padding is Padding.VALID:
        return x, (0, 0, 0, 0)
    top, bottom = _same_pads(kh)
    left, right = _same_pads(kw)
    xp = np.pad(x, ((0, 0), (0, 0), (top, bottom), (left, right)))
    return xp, (top, bottom, left, right)


def conv2d_forward(x, K, b, padding=Padding.VALID):
    """Stride-1 cross-correlation (no kernel flip)."""
    if x.ndim != 4 or K.ndim != 4:
        raise DimensionError(f"conv2d: expected 4-axis input and kernel, got {x.shape} and {K.shape}")
    c_out, c_in, kh, kw = K.shape
    if x.shape[1] != c_in:
        raise DimensionError(f"conv2d: input axis 1 has {x.shape[1]} channels but kernel axis 1 has {c_in}")
    if b.shape != (c_out,):
        raise DimensionError(f"conv2d: bias has shape {b.shape}, kernel axis 0 has {c_out}")
    xp, _ = _pad_input(x, kh, kw, padding)
    if kh > xp.shape[2] or kw > xp.shape[3]:
        raise DimensionError(
            f"conv2d: kernel {kh}x{kw} larger than padded input {xp.shape[2]}x{xp.shape[3]}"
        )
    windows = sliding_window_view(xp, (kh, kw), axis=(2, 3))
    y = np.einsum('bchwij,ocij->bohw', windows, K, optimize=True)
    return y + b[None, :, None, None]


def conv2d_backward(dy, x, K, padding=Padding.VALID):
    _, _, kh, kw = K.shape
    xp, (top, bottom, left, right) = _pad_input(x, kh, kw, padding)
    windows = sliding_window_view(xp, (kh, kw), axis=(2, 3))
    dK = np.einsum('bohw,bchwij->ocij', dy, windows, optimize=True)
    db = dy.sum(axis=(0, 2, 3))

    out_h, out_w = dy.shape[2], dy.shape[3]
    dxp = np.zeros_like(xp)
    for i in range(kh):
        for j in range(kw):
            dxp[:, :, i:i + out_h, j:j + out_w] += np.einsum('bohw,oc->bchw', dy, K[:, :, i, j])
    dx = dxp[:, :, top:dxp.shape[2] - bottom, left:dxp.shape[3] - right]
    return dx, dK, db


def maxpool2x2_forward(x):
    """
    2x2 max pooling, stride 2. Odd spatial sizes are padded with the minimum
    float; ties go to the first index in row-major window order.
    """
    if x.ndim != 4:
        raise DimensionError(f"maxpool2x2: expected 4-axis input, got shape {x.shape}")
    batch, channels, h, w = x.shape
    pad_h, pad_w = h % 2, w % 2
    if pad_h or pad_w:
        x = np.pad(x, ((0, 0), (0, 0), (0, pad_h), (0, pad_w)), constant_values=POOL_PAD_VALUE)
    out_h, out_w = x.shape[2] // 2, x.shape[3] // 2
    windows = (
        x.reshape(batch, channels, out_h, 2, out_w, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(batch, channels, out_h, out_w, 4)
    )
    indices = windows.argmax(axis=-1)
    y = np.take_along_axis(windows, indices[..., None], axis=-1)[..., 0]
    return y, indices


def maxpool2x2_backward(dy, indices, x_shape):
    batch, channels, h, w = x_shape
    out_h, out_w = dy.shape[2], dy.shape[3]
    dwindows = np.zeros((batch, channels, out_h, out_w, 4), dtype=DTYPE)
    np.put_along_axis(dwindows, indices[..., None], dy[..., None], axis=-1)
    dx = (
        dwindows.reshape(batch, channels, out_h, out_w, 2, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(batch, channels, out_h * 2, out_w * 2)
    )
    return dx[:, :, :h, :w]


def softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits, labels):
    """Mean cross-entropy and its gradient (softmax - onehot) / batch."""
    labels = np.asarray(labels)
    batch, num_classes = logits.shape
    if labels.shape != (batch,):
        raise DimensionError(f"softmax-xent: {labels.shape[0] if labels.ndim else 0} labels for batch of {batch}")
    if np.any(labels < 0) or np.any(labels >= num_classes):
        raise InputError(f"softmax-xent: labels must lie in [0, {num_classes})")

    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    rows = np.arange(batch)
    loss = float(-log_probs[rows, labels].mean())

    dlogits = np.exp(log_probs)
    dlogits[rows, labels] -= 1.0
    dlogits /= batch
    return loss, dlogits


# ==================== LAYERS ====================

class Layer:
    """A layer with its parameters and the cache of its last forward pass."""

    def __init__(self, spec):
        self.spec = spec
        self.params = {}

    def forward(self, x, **context):
        raise NotImplementedError

    def backward(self, dy):
        """Returns (dx, {param_name: gradient})."""
        raise NotImplementedError


class AffineLayer(Layer):
    def __init__(self, spec, rng):
        super().__init__(spec)
        fan_in, fan_out = spec.dims
        self.params = {
            'W': rng.normal(0.0, math.sqrt(2.0 / fan_in), size=(fan_in, fan_out)),
            'b': np.zeros(fan_out, dtype=DTYPE),
        }

    def forward(self, x, **context):
        self._x = x
        return affine_forward(x, self.params['W'], self.params['b'])

    def backward(self, dy):
        dx, dW, db = affine_backward(dy, self._x, self.params['W'])
        return dx, {'W': dW, 'b': db}


class Conv2dLayer(Layer):
    def __init__(self, spec, rng):
        super().__init__(spec)
        kh, kw, c_in, c_out = spec.dims
        fan_in = c_in * kh * kw
        self.params = {
            'K': rng.normal(0.0, math.sqrt(2.0 / fan_in), size=(c_out, c_in, kh, kw)),
            'b': np.zeros(c_out, dtype=DTYPE),
        }

    def forward(self, x, **context):
        self._x = x
        return conv2d_forward(x, self.params['K'], self.params['b'], self.spec.padding)

    def backward(self, dy):
        dx, dK, db = conv2d_backward(dy, self._x, self.params['K'], self.spec.padding)
        return dx, {'K': dK, 'b': db}


class MaxPoolLayer(Layer):
    def forward(self, x, **context):
        self._shape = x.shape
        y, self._indices = maxpool2x2_forward(x)
        return y

    def backward(self, dy):
        return maxpool2x2_backward(dy, self._indices, self._shape), {}


class ReluLayer(Layer):
    def forward(self, x, **context):
        self._x = x
        return relu_forward(x)

    def backward(self, dy):
        return relu_backward(dy, self._x), {}


class DropoutLayer(Layer):
    """
    Draws one fresh mask per training forward pass; the backward pass reuses
    it. A ``theta`` of None disables suppression for the pass.
    """

    def __init__(self, spec, theta_bar=1.0, convention=Convention.INVERTED):
        super().__init__(spec)
        self.theta_bar = theta_bar
        self.convention = Convention(convention)
        self.mask = None

    def forward(self, x, train=False, theta=None, rng=None, pass_id=0, freeze=False, **context):
        if not train:
            self.mask = None
            if self.convention is Convention.CLASSIC:
                return apply_dropout_eval_classic(x, self.theta_bar)
            return apply_dropout_eval(x)
        if freeze:
            if self.mask is not None and self.mask.shape != x.shape:
                raise StateError("frozen dropout mask no longer matches the activation shape")
        elif theta is None:
            self.mask = None
        else:
            if rng is None:
                raise StateError("training forward pass with dropout needs a mask rng")
            self.mask = sample_mask(x.shape, theta, rng, pass_id=pass_id)
        if self.mask is None:
            return x
        return apply_dropout_train(x, self.mask, self.convention)

    def backward(self, dy):
        if self.mask is None:
            return dy, {}
        return dropout_backward(dy, self.mask, self.convention), {}


# ==================== NETWORK ====================

def _output_shape(spec, shape):
    """Shape of one example after ``spec``, given its input shape."""
    kind = spec.kind
    if kind is LayerKind.AFFINE:
        fan_in, fan_out = spec.dims
        if math.prod(shape) != fan_in:
            raise DimensionError(f"affine expects {fan_in} inputs, previous layer yields {shape}")
        return (fan_out,)
    if kind is LayerKind.CONV2D:
        kh, kw, c_in, c_out = spec.dims
        if len(shape) != 3 or shape[0] != c_in:
            raise DimensionError(f"conv2d expects {c_in} input channels, previous layer yields {shape}")
        _, h, w = shape
        if spec.padding is Padding.SAME:
            return (c_out, h, w)
        if kh > h or kw > w:
            raise DimensionError(f"conv2d kernel {kh}x{kw} larger than input {h}x{w}")
        return (c_out, h - kh + 1, w - kw + 1)
    if kind is LayerKind.MAXPOOL2X2:
        if len(shape) != 3:
            raise DimensionError(f"maxpool2x2 expects channels x height x width, got {shape}")
        c, h, w = shape
        return (c, -(-h // 2), -(-w // 2))
    return shape


class Network:
    """
    An ordered stack of layers ending in a softmax-xent head.

    Parameters are only changed by ``adam_step``; forward and backward read
    them. ``retain`` sizes the layers; ``eval_retain`` (default ``retain``)
    holds the floors classic-convention evaluation scales by, which must be
    1 for a network trained without dropout.
    """

    def __init__(self, specs, input_shape, rng, layer_size_mode=LayerSizeMode.N,
                 retain=None, convention=Convention.INVERTED, eval_retain=None):
        specs = list(specs)
        if not specs or specs[-1].kind is not LayerKind.SOFTMAX_XENT:
            raise DimensionError("a network must end with a softmax-xent layer")
        if any(s.kind is LayerKind.SOFTMAX_XENT for s in specs[:-1]):
            raise DimensionError("softmax-xent may only appear as the last layer")

        self.specs = specs
        self.input_shape = tuple(input_shape)
        self.layer_size_mode = LayerSizeMode(layer_size_mode)
        self.retain = retain or RetainGroupConfig()
        self.eval_retain = eval_retain or self.retain
        self.convention = Convention(convention)

        shape = self.input_shape
        self.layers = []
        for spec in specs[:-1]:
            shape = _output_shape(spec, shape)
            self.layers.append(self._make_layer(spec, rng))
        if len(shape) != 1:
            raise DimensionError(f"softmax-xent expects flat logits, got {shape}")
        self.num_classes = shape[0]
        self._pass_id = None
        self._ready = False

    def _make_layer(self, spec, rng):
        kind = spec.kind
        if kind is LayerKind.AFFINE:
            return AffineLayer(spec, rng)
        if kind is LayerKind.CONV2D:
            return Conv2dLayer(spec, rng)
        if kind is LayerKind.MAXPOOL2X2:
            return MaxPoolLayer(spec)
        if kind is LayerKind.RELU:
            return ReluLayer(spec)
        if kind is LayerKind.DROPOUT:
            return DropoutLayer(spec, self.eval_retain.floor(spec.retain_group), self.convention)
        raise DimensionError(f"unsupported layer kind {kind}")

    # ---- parameters ----

    def params(self):
        """Live parameter arrays keyed '<layer index>.<name>'."""
        return {
            f"{index}.{name}": value
            for index, layer in enumerate(self.layers)
            for name, value in layer.params.items()
        }

    def parameter_count(self):
        return sum(p.size for p in self.params().values())

    def dropout_layers(self):
        return [(i, layer) for i, layer in enumerate(self.layers) if isinstance(layer, DropoutLayer)]

    def retain_groups(self):
        """Retain groups that have at least one dropout layer, in layer order."""
        groups = []
        for _, layer in self.dropout_layers():
            group = layer.spec.retain_group
            if group is not RetainGroup.NONE and group not in groups:
                groups.append(group)
        return groups

    @property
    def masks(self):
        return {i: layer.mask for i, layer in self.dropout_layers() if layer.mask is not None}

    # ---- passes ----

    def forward(self, x, train=False, thetas=None, rng=None, freeze_masks=False):
        """
        Logits for a batch.

        In training mode every dropout layer draws a fresh mask at the
        retain probability of its group (``thetas``), in layer order; with
        ``freeze_masks`` the masks of the previous pass are reused instead.
        ``thetas=None`` trains without suppression.
        """
        x = np.asarray(x, dtype=DTYPE)
        if x.shape[1:] != self.input_shape:
            raise DimensionError(f"network expects examples of shape {self.input_shape}, got {x.shape[1:]}")
        if train and not freeze_masks:
            self._pass_id = next_pass_id()
        for layer in self.layers:
            theta = None
            if isinstance(layer, DropoutLayer) and thetas is not None:
                theta = thetas.get(layer.spec.retain_group, 1.0)
            x = layer.forward(
                x, train=train, theta=theta, rng=rng, pass_id=self._pass_id, freeze=freeze_masks,
            )
        self._ready = True
        return x

    def loss(self, x, labels, **forward_kwargs):
        logits = self.forward(x, **forward_kwargs)
        return softmax_cross_entropy(logits, labels)

    def backward(self, dlogits):
        """Gradients for every parameter, keyed like ``params()``."""
        if not self._ready:
            raise StateError("backward called without a preceding forward pass")
        for _, layer in self.dropout_layers():
            if layer.mask is not None and layer.mask.pass_id != self._pass_id:
                raise StateError("dropout mask does not belong to the current forward pass")
        grads = {}
        dy = dlogits
        for index in range(len(self.layers) - 1, -1, -1):
            dy, layer_grads = self.layers[index].backward(dy)
            for name, grad in layer_grads.items():
                grads[f"{index}.{name}"] = grad
        self._ready = False
        return grads

    def discard_cache(self):
        """Forget the last forward pass; a following backward raises."""
        self._ready = False

    def predict(self, x, batch_size=1000):
        outputs = [
            self.forward(x[start:start + batch_size]).argmax(axis=1)
            for start in range(0, len(x), batch_size)
        ]
        self.discard_cache()
        return np.concatenate(outputs) if outputs else np.zeros(0, dtype=np.int64)

    def accuracy(self, x, labels, batch_size=1000):
        if len(x) == 0:
            return 0.0
        return float(np.mean(self.predict(x, batch_size) == np.asarray(labels)))


def backward(network, dlogits):
    return network.backward(dlogits)


# ==================== ARCHITECTURES ====================

def _scaled_units(base, group, retain, layer_size_mode):
    if LayerSizeMode(layer_size_mode) is LayerSizeMode.N_OVER_THETA:
        return math.ceil(base / retain.floor(group))
    return base


def mlp_specs(input_shape, num_classes, hidden=(2000, 2000), retain=None,
              layer_size_mode=LayerSizeMode.N):
    retain = retain or RetainGroupConfig()
    specs = [LayerSpec(LayerKind.DROPOUT, retain_group=RetainGroup.INPUT)]
    fan_in = math.prod(input_shape)
    for base in hidden:
        units = _scaled_units(base, RetainGroup.HIDDEN, retain, layer_size_mode)
        specs += [
            LayerSpec(LayerKind.AFFINE, (fan_in, units)),
            LayerSpec(LayerKind.RELU),
            LayerSpec(LayerKind.DROPOUT, retain_group=RetainGroup.HIDDEN),
        ]
        fan_in = units
    specs += [LayerSpec(LayerKind.AFFINE, (fan_in, num_classes)), LayerSpec(LayerKind.SOFTMAX_XENT)]
    return specs


def cnn_specs(input_shape, num_classes, channels, fc, kernel=5, retain=None,
              layer_size_mode=LayerSizeMode.N):
    """
    conv-relu-maxpool blocks (one per entry of ``channels``) followed by
    fully connected layers (one per entry of ``fc``) and the output layer.
    """
    retain = retain or RetainGroupConfig()
    c, h, w = input_shape
    specs = [LayerSpec(LayerKind.DROPOUT, retain_group=RetainGroup.INPUT)]
    for base in channels:
        c_out = _scaled_units(base, RetainGroup.CONV, retain, layer_size_mode)
        specs += [
            LayerSpec(LayerKind.CONV2D, (kernel, kernel, c, c_out), padding=Padding.SAME),
            LayerSpec(LayerKind.RELU),
            LayerSpec(LayerKind.MAXPOOL2X2),
            LayerSpec(LayerKind.DROPOUT, retain_group=RetainGroup.CONV),
        ]
        c, h, w = c_out, -(-h // 2), -(-w // 2)
    fan_in = c * h * w
    for base in fc:
        units = _scaled_units(base, RetainGroup.FC, retain, layer_size_mode)
        specs += [
            LayerSpec(LayerKind.AFFINE, (fan_in, units)),
            LayerSpec(LayerKind.RELU),
            LayerSpec(LayerKind.DROPOUT, retain_group=RetainGroup.FC),
        ]
        fan_in = units
    specs += [LayerSpec(LayerKind.AFFINE, (fan_in, num_classes)), LayerSpec(LayerKind.SOFTMAX_XENT)]
    return specs


def build_network(architecture, input_shape, num_classes, rng, retain=None,
                  layer_size_mode=LayerSizeMode.N, convention=Convention.INVERTED,
                  hidden=(2000, 2000), channels=None, fc=None, kernel=5, eval_retain=None):
    """
    Build one of the three architectures.

    cnn1 is LeNet style (two conv blocks, one fc layer); cnn2 is
    conv-maxpool x3 followed by two fc layers.
    """
    architecture = Architecture(architecture)
    retain = retain or RetainGroupConfig()
    if architecture is Architecture.MLP:
        specs = mlp_specs(input_shape, num_classes, hidden, retain, layer_size_mode)
    elif architecture is Architecture.CNN1:
        specs = cnn_specs(input_shape, num_classes, channels or (32, 64), fc or (512,),
                          kernel, retain, layer_size_mode)
    else:
        specs = cnn_specs(input_shape, num_classes, channels or (32, 64, 128), fc or (512, 512),
                          kernel, retain, layer_size_mode)
    network = Network(specs, input_shape, rng, layer_size_mode, retain, convention, eval_retain)
    logger.debug("built %s with %d parameters", architecture, network.parameter_count())
    return network


# ==================== OPTIMIZER ====================

@dataclass
class AdamState:
    first_moment: dict = field(default_factory=dict)
    second_moment: dict = field(default_factory=dict)
    step_count: int = 0
    beta1: float = 0.95
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def for_params(cls, params, **hyper):
        return cls(
            first_moment={k: np.zeros_like(v) for k, v in params.items()},
            second_moment={k: np.zeros_like(v) for k, v in params.items()},
            **hyper,
        )


def adam_step(params, grads, state, lr):
    """In-place bias-corrected Adam update; returns ``params``."""
    if lr <= 0:
        raise InputError(f"learning rate must be positive, got {lr}")
    for name, grad in grads.items():
        if grad.shape != params[name].shape:
            raise DimensionError(f"gradient for {name} has shape {grad.shape}, parameter {params[name].shape}")

    state.step_count += 1
    bias1 = 1.0 - state.beta1 ** state.step_count
    bias2 = 1.0 - state.beta2 ** state.step_count
    for name, grad in grads.items():
        m = state.first_moment.setdefault(name, np.zeros_like(params[name]))
        v = state.second_moment.setdefault(name, np.zeros_like(params[name]))
        m *= state.beta1
        m += (1.0 - state.beta1) * grad
        v *= state.beta2
        v += (1.0 - state.beta2) * (grad * grad)
        params[name] -= lr * (m / bias1) / (np.sqrt(v / bias2) + state.epsilon)
    return params


# ==================== GRADIENT CHECK ====================

GRADIENT_CHECK_FLOOR = 1e-8


def check_gradients(network, batch, eps=1e-6, thetas=None, rng=None):
    """
    Maximum relative error between analytic gradients and central finite
    differences, parameter by parameter: ||analytic - numeric|| over the
    larger of the two norms, floored at GRADIENT_CHECK_FLOOR.

    With ``thetas`` the check runs in training mode: masks are drawn once
    and frozen for every perturbed evaluation.
    """
    if not 1e-7 <= eps <= 1e-3:
        raise InputError(f"eps must lie in [1e-7, 1e-3], got {eps}")
    x, labels = batch
    train = thetas is not None
    if train:
        _, dlogits = network.loss(x, labels, train=True, thetas=thetas, rng=rng)
    else:
        _, dlogits = network.loss(x, labels)
    analytic = network.backward(dlogits)

    def loss_at():
        if train:
            return network.loss(x, labels, train=True, freeze_masks=True)[0]
        return network.loss(x, labels)[0]

    worst = 0.0
    for name, param in network.params().items():
        numeric = np.zeros_like(param)
        flat = param.reshape(-1)
        flat_numeric = numeric.reshape(-1)
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + eps
            plus = loss_at()
            flat[i] = original - eps
            minus = loss_at()
            flat[i] = original
            flat_numeric[i] = (plus - minus) / (2.0 * eps)
        a = analytic[name]
        denom = max(np.linalg.norm(a), np.linalg.norm(numeric), GRADIENT_CHECK_FLOOR)
        worst = max(worst, float(np.linalg.norm(a - numeric) / denom))
    network.discard_cache()
    return worst
