import math
from unittest import mock

import numpy as np
from django.test import SimpleTestCase

from lab.exceptions import DimensionError, InputError, StateError
from lab.nn import (
    AdamState, Architecture, LayerKind, LayerSizeMode, LayerSpec, Network, Padding, adam_step,
    affine_forward, build_network, check_gradients, conv2d_forward, maxpool2x2_backward,
    maxpool2x2_forward, softmax_cross_entropy,
)
from lab.regularization import Convention, RetainGroup, RetainGroupConfig


def naive_conv(x, K, b):
    batch, _, h, w = x.shape
    c_out, _, kh, kw = K.shape
    out = np.zeros((batch, c_out, h - kh + 1, w - kw + 1))
    for n in range(batch):
        for o in range(c_out):
            for i in range(h - kh + 1):
                for j in range(w - kw + 1):
                    out[n, o, i, j] = np.sum(x[n, :, i:i + kh, j:j + kw] * K[o]) + b[o]
    return out


class FunctionalTests(SimpleTestCase):

    def setUp(self):
        self.rng = np.random.default_rng(0)

    def test_affine(self):
        x = self.rng.normal(size=(4, 2, 3))
        W, b = self.rng.normal(size=(6, 5)), self.rng.normal(size=5)
        np.testing.assert_allclose(affine_forward(x, W, b), x.reshape(4, 6) @ W + b)
        with self.assertRaisesMessage(DimensionError, 'axis'):
            affine_forward(x, self.rng.normal(size=(7, 5)), b)

    def test_conv_matches_loops(self):
        x = self.rng.normal(size=(2, 3, 7, 6))
        K, b = self.rng.normal(size=(4, 3, 3, 3)), self.rng.normal(size=4)
        np.testing.assert_allclose(conv2d_forward(x, K, b, Padding.VALID), naive_conv(x, K, b), atol=1e-12)

    def test_same_padding_keeps_size(self):
        x = self.rng.normal(size=(2, 1, 8, 8))
        K, b = self.rng.normal(size=(2, 1, 5, 5)), np.zeros(2)
        same = conv2d_forward(x, K, b, Padding.SAME)
        self.assertEqual(same.shape, (2, 2, 8, 8))
        padded = np.pad(x, ((0, 0), (0, 0), (2, 2), (2, 2)))
        np.testing.assert_allclose(same, naive_conv(padded, K, b), atol=1e-12)

    def test_conv_channel_mismatch(self):
        with self.assertRaises(DimensionError):
            conv2d_forward(np.zeros((1, 2, 5, 5)), np.zeros((1, 3, 3, 3)), np.zeros(1))

    def test_maxpool(self):
        x = np.array([[[[1.0, 2.0, 5.0], [4.0, 3.0, 0.0], [7.0, 1.0, 9.0]]]])
        y, indices = maxpool2x2_forward(x)
        np.testing.assert_array_equal(y, [[[[4.0, 5.0], [7.0, 9.0]]]])
        dx = maxpool2x2_backward(np.ones_like(y), indices, x.shape)
        np.testing.assert_array_equal(dx, [[[[0, 0, 1], [1, 0, 0], [1, 0, 1]]]])

    def test_maxpool_ties_go_to_first(self):
        y, indices = maxpool2x2_forward(np.ones((1, 1, 2, 2)))
        self.assertEqual(indices[0, 0, 0, 0], 0)

    def test_softmax_cross_entropy_large_logits(self):
        loss, dlogits = softmax_cross_entropy(np.array([[1000.0, 0.0]]), np.array([0]))
        self.assertEqual(loss, 0.0)
        np.testing.assert_allclose(dlogits, [[0.0, 0.0]], atol=1e-300)
        loss, dlogits = softmax_cross_entropy(np.array([[1000.0, 0.0]]), np.array([1]))
        self.assertAlmostEqual(loss, 1000.0)
        np.testing.assert_allclose(dlogits, [[1.0, -1.0]])
        self.assertTrue(np.all(np.isfinite(dlogits)))

    def test_softmax_gradient_matches_finite_differences(self):
        logits = np.array([[1000.0, 0.0, -5.0], [0.3, -1.2, 2.0], [0.0, 0.0, 0.0]])
        labels = np.array([1, 2, 0])
        _, dlogits = softmax_cross_entropy(logits, labels)
        numeric = np.zeros_like(logits)
        eps = 1e-6
        for index in np.ndindex(logits.shape):
            plus, minus = logits.copy(), logits.copy()
            plus[index] += eps
            minus[index] -= eps
            difference = softmax_cross_entropy(plus, labels)[0] - softmax_cross_entropy(minus, labels)[0]
            numeric[index] = difference / (2 * eps)
        np.testing.assert_allclose(dlogits, numeric, atol=1e-6)

    def test_softmax_cross_entropy(self):
        loss, dlogits = softmax_cross_entropy(np.zeros((3, 4)), np.array([0, 1, 2]))
        self.assertAlmostEqual(loss, math.log(4))
        np.testing.assert_allclose(dlogits.sum(axis=1), 0.0, atol=1e-15)
        with self.assertRaises(InputError):
            softmax_cross_entropy(np.zeros((2, 3)), np.array([0, 3]))
        with self.assertRaises(DimensionError):
            softmax_cross_entropy(np.zeros((2, 3)), np.array([0, 1, 2]))


class NetworkTests(SimpleTestCase):

    def setUp(self):
        self.rng = np.random.default_rng(1)
        self.retain = RetainGroupConfig(input=0.8, hidden=0.5)

    def mlp(self, hidden=(8,), **kwargs):
        return build_network(Architecture.MLP, (1, 1, 6), 3, np.random.default_rng(2),
                             retain=self.retain, hidden=hidden, **kwargs)

    def test_needs_softmax_head(self):
        specs = [LayerSpec(LayerKind.AFFINE, (4, 2))]
        with self.assertRaises(DimensionError):
            Network(specs, (4,), self.rng)

    def test_head_must_be_last(self):
        specs = [LayerSpec('affine', (4, 3)), LayerSpec('softmax-xent'), LayerSpec('affine', (3, 2)),
                 LayerSpec('softmax-xent')]
        with self.assertRaises(DimensionError):
            Network(specs, (4,), self.rng)

    def test_dimension_chain_mismatch(self):
        specs = [LayerSpec('affine', (4, 3)), LayerSpec('affine', (2, 2)), LayerSpec('softmax-xent')]
        with self.assertRaises(DimensionError):
            Network(specs, (4,), self.rng)

    def test_backward_needs_forward(self):
        network = self.mlp()
        with self.assertRaises(StateError):
            network.backward(np.zeros((2, 3)))
        _, dlogits = network.loss(np.zeros((2, 1, 1, 6)), np.array([0, 1]))
        network.backward(dlogits)
        with self.assertRaises(StateError):
            network.backward(dlogits)

    def test_wrong_input_shape(self):
        with self.assertRaises(DimensionError):
            self.mlp().forward(np.zeros((2, 1, 1, 7)))

    def test_retain_groups(self):
        network = self.mlp(hidden=(8, 8))
        self.assertEqual(network.retain_groups(), [RetainGroup.INPUT, RetainGroup.HIDDEN])
        self.assertEqual(len(network.dropout_layers()), 3)

    def test_training_without_thetas_matches_evaluation(self):
        network = self.mlp()
        x = self.rng.random((5, 1, 1, 6))
        train = network.forward(x, train=True, thetas=None)
        np.testing.assert_allclose(train, network.forward(x))

    def test_masks_drawn_per_pass(self):
        network = self.mlp()
        x = self.rng.random((5, 1, 1, 6))
        network.forward(x, train=True, thetas={'input': 0.8, 'hidden': 0.5}, rng=self.rng)
        first = {i: m.values.copy() for i, m in network.masks.items()}
        network.forward(x, train=True, thetas={'input': 0.8, 'hidden': 0.5}, rng=self.rng)
        self.assertEqual(set(first), set(network.masks))
        self.assertTrue(any(not np.array_equal(first[i], m.values) for i, m in network.masks.items()))

    def test_classic_convention_scales_evaluation(self):
        specs = [LayerSpec(LayerKind.DROPOUT, retain_group=RetainGroup.HIDDEN), LayerSpec(LayerKind.SOFTMAX_XENT)]
        network = Network(specs, (3,), self.rng, retain=self.retain, convention=Convention.CLASSIC)
        x = np.ones((2, 3))
        np.testing.assert_allclose(network.forward(x), 0.5 * x)

    def test_classic_evaluation_without_dropout_is_unscaled(self):
        x = self.rng.random((5, 1, 1, 6))
        undropped = self.mlp(convention=Convention.CLASSIC, eval_retain=RetainGroupConfig())
        np.testing.assert_array_equal(undropped.forward(x), undropped.forward(x, train=True, thetas=None))
        scaled = self.mlp(convention=Convention.CLASSIC)
        self.assertFalse(np.allclose(scaled.forward(x), scaled.forward(x, train=True, thetas=None)))

    def test_width_scaling(self):
        network = self.mlp(hidden=(10,), layer_size_mode=LayerSizeMode.N_OVER_THETA)
        widths = [layer.params['W'].shape[1] for layer in network.layers if 'W' in layer.params]
        self.assertEqual(widths, [20, 3])

    def test_cnn_shapes(self):
        network = build_network(Architecture.CNN1, (1, 12, 12), 10, self.rng, channels=(4, 8), fc=(16,))
        self.assertEqual(network.forward(self.rng.random((2, 1, 12, 12))).shape, (2, 10))
        deep = build_network(Architecture.CNN2, (1, 16, 16), 55, self.rng, channels=(2, 2, 2), fc=(8, 8))
        self.assertEqual(deep.forward(self.rng.random((1, 1, 16, 16))).shape, (1, 55))

    def test_accuracy(self):
        network = self.mlp()
        x = self.rng.random((7, 1, 1, 6))
        labels = network.predict(x)
        self.assertEqual(network.accuracy(x, labels, batch_size=3), 1.0)


class AdamTests(SimpleTestCase):

    def test_first_step_moves_by_learning_rate(self):
        params = {'w': np.array([1.0, -2.0, 3.0])}
        grads = {'w': np.array([0.5, -4.0, 2.0])}
        state = AdamState.for_params(params)
        adam_step(params, grads, state, lr=0.1)
        np.testing.assert_allclose(params['w'], [0.9, -1.9, 2.9], atol=1e-7)
        self.assertEqual(state.step_count, 1)
        self.assertEqual(state.beta1, 0.95)

    def test_constant_gradient_moves_by_learning_rate(self):
        params = {'w': np.array([1.0, -2.0]), 'b': np.zeros(1)}
        grads = {'w': np.array([0.5, -3.0]), 'b': np.array([0.25])}
        state = AdamState.for_params(params)
        for _ in range(20):
            before = {name: value.copy() for name, value in params.items()}
            adam_step(params, grads, state, lr=0.01)
            for name in params:
                np.testing.assert_allclose(before[name] - params[name], 0.01 * np.sign(grads[name]), rtol=1e-6)
        self.assertEqual(state.step_count, 20)

    def test_training_is_reproducible(self):
        def train():
            rng = np.random.default_rng(3)
            network = build_network(Architecture.MLP, (1, 1, 6), 3, np.random.default_rng(2),
                                    retain=RetainGroupConfig(input=0.8, hidden=0.5), hidden=(8,))
            state = AdamState.for_params(network.params())
            data = np.random.default_rng(4)
            for _ in range(15):
                x, labels = data.random((4, 1, 1, 6)), data.integers(0, 3, size=4)
                _, dlogits = network.loss(x, labels, train=True, thetas={'input': 0.8, 'hidden': 0.5}, rng=rng)
                adam_step(network.params(), network.backward(dlogits), state, lr=0.01)
            return network.params()

        first, second = train(), train()
        self.assertEqual(set(first), set(second))
        for name in first:
            np.testing.assert_array_equal(first[name], second[name])

    def test_rejects_mismatched_gradient(self):
        params = {'w': np.zeros(3)}
        with self.assertRaises(DimensionError):
            adam_step(params, {'w': np.zeros(2)}, AdamState.for_params(params), lr=0.1)
        with self.assertRaises(InputError):
            adam_step(params, {'w': np.zeros(3)}, AdamState.for_params(params), lr=0.0)


class GradientCheckTests(SimpleTestCase):

    def batches(self, shape, classes, seed):
        rng = np.random.default_rng(seed)
        for _ in range(3):
            yield rng.random((4, *shape)), rng.integers(0, classes, size=4)

    def test_linear_model(self):
        specs = [LayerSpec(LayerKind.AFFINE, (5, 3)), LayerSpec(LayerKind.SOFTMAX_XENT)]
        network = Network(specs, (5,), np.random.default_rng(0))
        for batch in self.batches((5,), 3, 1):
            self.assertLess(check_gradients(network, batch, eps=1e-5), 1e-7)

    def test_mlp(self):
        retain = RetainGroupConfig(input=0.8, hidden=0.5)
        network = build_network(Architecture.MLP, (1, 1, 10), 4, np.random.default_rng(0),
                                retain=retain, hidden=(64, 64))
        for batch in self.batches((1, 1, 10), 4, 2):
            self.assertLess(check_gradients(network, batch), 1e-4)

    def test_mlp_with_frozen_masks(self):
        retain = RetainGroupConfig(input=0.8, hidden=0.5)
        network = build_network(Architecture.MLP, (1, 1, 10), 4, np.random.default_rng(0),
                                retain=retain, hidden=(64, 64))
        rng = np.random.default_rng(9)
        for batch in self.batches((1, 1, 10), 4, 3):
            error = check_gradients(network, batch, thetas={'input': 0.8, 'hidden': 0.5}, rng=rng)
            self.assertLess(error, 1e-4)

    def test_cnn1_with_frozen_masks(self):
        retain = RetainGroupConfig(input=0.9, conv=0.75, fc=0.5)
        network = build_network(Architecture.CNN1, (1, 8, 8), 3, np.random.default_rng(0),
                                retain=retain, channels=(4, 8), fc=(16,))
        rng = np.random.default_rng(4)
        thetas = {'input': 0.9, 'conv': 0.75, 'fc': 0.5}
        for batch in self.batches((1, 8, 8), 3, 5):
            self.assertLess(check_gradients(network, batch, thetas=thetas, rng=rng), 1e-4)

    def test_detects_scaled_gradient(self):
        network = build_network(Architecture.MLP, (1, 1, 10), 4, np.random.default_rng(0), hidden=(16,))
        backward = network.backward
        weight = next(name for name in network.params() if name.endswith('.W'))

        def off_by_a_tenth_percent(dlogits):
            grads = backward(dlogits)
            grads[weight] = grads[weight] * 1.001
            return grads

        batch = next(self.batches((1, 1, 10), 4, 6))
        self.assertLess(check_gradients(network, batch), 1e-4)
        with mock.patch.object(network, 'backward', side_effect=off_by_a_tenth_percent):
            self.assertGreater(check_gradients(network, batch), 5e-4)

    def test_eps_range(self):
        specs = [LayerSpec(LayerKind.AFFINE, (2, 2)), LayerSpec(LayerKind.SOFTMAX_XENT)]
        network = Network(specs, (2,), np.random.default_rng(0))
        with self.assertRaises(InputError):
            check_gradients(network, (np.zeros((1, 2)), np.array([0])), eps=1e-2)
