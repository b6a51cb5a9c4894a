#!/usr/bin/env python

import math
import unittest

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from risbeam import setnet
from risbeam.config import TrainConfig
from risbeam.dataset import Dataset, DatasetMeta, Sample
from risbeam.errors import CheckpointError, ConfigError, ShapeMismatchError, TrainingDivergedError

from pyfakefs import fake_filesystem_unittest

NUM_CLASSES = 2
U_MAX = 3
NUM_BEAMS = 4
ROWS = NUM_CLASSES + 4


def random_input(rng, active=None, u_max=U_MAX):
    active = int(rng.integers(0, u_max + 1)) if active is None else active
    V = np.zeros((ROWS, u_max))
    for u in range(active):
        V[int(rng.integers(NUM_CLASSES)), u] = 1.0
        V[NUM_CLASSES:, u] = rng.random(4)
    return V


def tiny_network(variant, seed=1):
    net = setnet.build_network(variant, NUM_CLASSES, U_MAX, NUM_BEAMS, hidden=(5,), seed=seed)
    rng = np.random.default_rng(seed)
    # keep pre-activations off the ReLU kink for finite differences
    for p in net.parameters():
        p += rng.normal(0.0, 0.1, size=p.shape)
    return net


def synthetic_dataset(count, seed):
    """
    Beam q + 1 is active when some UE's x centre falls in the q-th quarter of
    the image
    """
    rng = np.random.default_rng(seed)
    meta = DatasetMeta(num_classes=NUM_CLASSES, u_max=U_MAX, num_beams=NUM_BEAMS, camera_id=0,
                       image_width=100, image_height=100, split_seed=seed)
    samples = []
    for n in range(count):
        V = random_input(rng, active=int(rng.integers(1, U_MAX + 1)))
        t_star = np.zeros(NUM_BEAMS, dtype=np.uint8)
        for u in np.flatnonzero(np.any(V != 0, axis=0)):
            t_star[min(int(V[NUM_CLASSES, u] * NUM_BEAMS), NUM_BEAMS - 1)] = 1
        samples.append(Sample(V=V, t_star=t_star, scene_id=n, camera_id=0))
    return Dataset(meta, samples)


class TestNetworks(unittest.TestCase):

    def test_set_sum_permutation_invariance(self):
        rng = np.random.default_rng(0)
        net = setnet.build_network("set_sum", NUM_CLASSES, 8, 16, hidden=(32, 32), seed=3)

        for _ in range(1000):
            V = random_input(rng, u_max=8)
            permuted = V[:, rng.permutation(8)]

            self.assertEqual(net.forward(V).tobytes(), net.forward(permuted).tobytes())

    @settings(deadline=None)
    @given(st.integers(min_value=0, max_value=2 ** 32 - 1), st.integers(min_value=1, max_value=5))
    def test_set_sum_padding_invariance(self, seed, extra):
        rng = np.random.default_rng(seed)
        net = setnet.build_network("set_sum", NUM_CLASSES, U_MAX, NUM_BEAMS, hidden=(8,), seed=seed)
        V = random_input(rng)

        padded = np.hstack([V, np.zeros((ROWS, extra))])

        self.assertEqual(net.forward(V).tobytes(), net.forward(padded).tobytes())

    def test_empty_input_scores_half(self):
        net = setnet.build_network("set_sum", NUM_CLASSES, U_MAX, NUM_BEAMS, seed=0)

        result = net.forward(np.zeros((ROWS, U_MAX)))

        np.testing.assert_array_equal(result, np.full(NUM_BEAMS, 0.5))

    def test_vanilla_is_order_sensitive(self):
        rng = np.random.default_rng(2)
        net = setnet.build_network("vanilla_fc", NUM_CLASSES, U_MAX, NUM_BEAMS, hidden=(16,), seed=6)
        V = random_input(rng, active=2)

        swapped = V[:, [1, 0, 2]]

        self.assertFalse(np.allclose(net.forward(V), net.forward(swapped)))

    def test_single_layer_forward_by_hand(self):
        net = setnet.build_network("set_sum", NUM_CLASSES, U_MAX, NUM_BEAMS, hidden=())
        W, b = net.parameters()
        W[...] = np.arange(24, dtype=float).reshape(NUM_BEAMS, ROWS) / 10.0 - 1.0
        b[...] = [0.5, -0.25, 0.0, 1.0]
        V = np.zeros((ROWS, U_MAX))
        V[:, 0] = [1.0, 0.0, 0.5, 0.25, 0.1, 0.2]
        V[:, 2] = [0.0, 1.0, 0.75, 0.5, 0.3, 0.1]

        result = net.forward(V)

        for q in range(NUM_BEAMS):
            z = sum(W[q, r] * (V[r, 0] + V[r, 2]) for r in range(ROWS)) + 2.0 * b[q]
            self.assertAlmostEqual(result[q], 1.0 / (1.0 + math.exp(-z)), delta=1e-12)

    def test_scores_in_open_interval(self):
        rng = np.random.default_rng(1)
        for variant in setnet.VARIANTS:
            net = setnet.build_network(variant, NUM_CLASSES, U_MAX, NUM_BEAMS, hidden=(16,), seed=2)
            for p in net.parameters():
                p *= 100.0

            scores = net.forward_batch(np.stack([random_input(rng) for _ in range(20)]))[0]

            self.assertTrue(np.all((scores > 0.0) & (scores < 1.0)))

    def test_input_shape_checked(self):
        for variant in ("reuse_concat", "vanilla_fc"):
            net = setnet.build_network(variant, NUM_CLASSES, U_MAX, NUM_BEAMS, seed=0)
            with self.assertRaises(ShapeMismatchError):
                net.forward(np.zeros((ROWS, U_MAX + 1)))

        net = setnet.build_network("set_sum", NUM_CLASSES, U_MAX, NUM_BEAMS, seed=0)
        with self.assertRaises(ShapeMismatchError):
            net.forward(np.zeros((ROWS + 1, U_MAX)))

    def test_unknown_variant_lists_tags(self):
        with self.assertRaises(ConfigError) as context:
            setnet.build_network("deep_sets", NUM_CLASSES, U_MAX, NUM_BEAMS)

        for tag in ("set_sum", "reuse_concat", "vanilla_fc"):
            self.assertIn(tag, str(context.exception))

    def test_seeded_initialisation(self):
        first = setnet.build_network("vanilla_fc", NUM_CLASSES, U_MAX, NUM_BEAMS, seed=4)
        second = setnet.build_network("vanilla_fc", NUM_CLASSES, U_MAX, NUM_BEAMS, seed=4)
        other = setnet.build_network("vanilla_fc", NUM_CLASSES, U_MAX, NUM_BEAMS, seed=5)

        for a, b, c in zip(first.parameters(), second.parameters(), other.parameters()):
            np.testing.assert_array_equal(a, b)
        self.assertFalse(np.array_equal(first.parameters()[0], other.parameters()[0]))


class TestLoss(unittest.TestCase):

    def test_half_scores(self):
        t_star = np.array([1.0, 0.0, 1.0, 1.0])

        self.assertAlmostEqual(setnet.loss(np.full(4, 0.5), t_star), math.log(2.0), delta=1e-12)

    def test_perfect_scores_are_clamped(self):
        t_star = np.array([1.0, 0.0, 1.0, 0.0])

        result = setnet.loss(t_star, t_star)

        self.assertTrue(0.0 < result < 1e-11)

    def test_batch_mean(self):
        scores = np.array([[0.9, 0.2], [0.4, 0.7]])
        targets = np.array([[1.0, 0.0], [0.0, 1.0]])
        expected = -np.mean([math.log(0.9), math.log(0.8), math.log(0.6), math.log(0.7)])

        self.assertAlmostEqual(setnet.loss(scores, targets), expected, places=12)


class TestGradients(unittest.TestCase):

    def assertGradientsMatch(self, net, inputs, targets, eps=1e-6):
        scores, cache = net.forward_batch(inputs)
        grads = net.backward_batch(cache, scores, targets)

        for index, (p, g) in enumerate(zip(net.parameters(), grads)):
            self.assertEqual(p.shape, g.shape)
            numeric = np.zeros_like(p)
            for position in np.ndindex(p.shape):
                original = p[position]
                p[position] = original + eps
                plus = setnet.loss(net.forward_batch(inputs)[0], targets)
                p[position] = original - eps
                minus = setnet.loss(net.forward_batch(inputs)[0], targets)
                p[position] = original
                numeric[position] = (plus - minus) / (2.0 * eps)

            error = np.linalg.norm(g - numeric) / max(np.linalg.norm(g) + np.linalg.norm(numeric), 1e-12)
            self.assertLess(error, 1e-4, "parameter {} of {}".format(index, net.tag))

    def test_finite_differences(self):
        rng = np.random.default_rng(6)
        inputs = np.stack([random_input(rng, active=a) for a in (1, 2, 3)])
        targets = (rng.random((3, NUM_BEAMS)) < 0.5).astype(float)

        for variant in setnet.VARIANTS:
            self.assertGradientsMatch(tiny_network(variant), inputs, targets)

    def test_single_sample_backward(self):
        rng = np.random.default_rng(7)
        net = tiny_network("set_sum")
        V = random_input(rng, active=2)
        t_star = np.array([1.0, 0.0, 0.0, 1.0])

        grads = setnet.backward(net, V, t_star)

        self.assertGradientsMatch(net, V[np.newaxis], t_star[np.newaxis])
        self.assertEqual(len(grads), len(net.parameters()))

    def test_duplicate_column_doubles_contribution(self):
        rng = np.random.default_rng(8)
        net = tiny_network("set_sum")
        column = random_input(rng, active=1)[:, :1]
        single = np.hstack([column, np.zeros((ROWS, 2))])
        double = np.hstack([column, column, np.zeros((ROWS, 1))])

        stack_single = net.stack.forward(setnet.canonical_columns(single))[0].sum(axis=1)
        stack_double = net.stack.forward(setnet.canonical_columns(double))[0].sum(axis=1)

        np.testing.assert_allclose(stack_double, 2.0 * stack_single, rtol=1e-12)

    def test_duplicated_column_doubles_stack_gradient(self):
        rng = np.random.default_rng(9)
        net = tiny_network("set_sum")
        column = random_input(rng, active=1)[:, :1]
        scores = np.full((1, NUM_BEAMS), 0.7)
        targets = np.array([[1.0, 0.0, 0.0, 1.0]])

        _, single = net.forward_batch(np.hstack([column, np.zeros((ROWS, 2))])[np.newaxis])
        _, double = net.forward_batch(np.hstack([column, column, np.zeros((ROWS, 1))])[np.newaxis])

        for one, two in zip(net.backward_batch(single, scores, targets), net.backward_batch(double, scores, targets)):
            np.testing.assert_allclose(two, 2.0 * one, rtol=1e-12, atol=1e-15)

    def test_zero_columns_contribute_no_gradient(self):
        rng = np.random.default_rng(10)
        net = tiny_network("set_sum")
        V = random_input(rng, active=2)[:, :2]
        t_star = np.array([0.0, 1.0, 1.0, 0.0])

        bare = setnet.backward(net, V, t_star)
        padded = setnet.backward(net, np.hstack([V, np.zeros((ROWS, 4))]), t_star)

        for a, b in zip(bare, padded):
            self.assertEqual(a.tobytes(), b.tobytes())


class TestOptimizers(unittest.TestCase):

    def test_momentum_descends(self):
        p = np.array([3.0, -2.0])
        optimizer = setnet.MomentumOptimizer(learning_rate=0.1, momentum=0.9)

        for _ in range(300):
            optimizer.step([p], [2.0 * p])

        self.assertLess(np.linalg.norm(p), 1e-3)

    def test_adam_first_step(self):
        p = np.array([1.0, 1.0])
        optimizer = setnet.AdamOptimizer(learning_rate=0.01)

        optimizer.step([p], [np.array([5.0, -0.001])])

        np.testing.assert_allclose(p, [0.99, 1.01], rtol=1e-4)

    def test_make_optimizer(self):
        self.assertIsInstance(setnet.make_optimizer(TrainConfig(optimizer="adam")), setnet.AdamOptimizer)
        self.assertIsInstance(setnet.make_optimizer(TrainConfig()), setnet.MomentumOptimizer)


class TestTraining(unittest.TestCase):

    CONFIG = TrainConfig(hidden=(16, 16), learning_rate=1e-2, batch_size=8, epochs=40, optimizer="adam", seed=3)

    def test_learns_synthetic_task(self):
        train_set, test_set = synthetic_dataset(80, seed=1).split()

        net, curves = setnet.train("set_sum", train_set, test_set, self.CONFIG)

        self.assertEqual(curves.epochs, list(range(1, 41)))
        self.assertEqual(len(curves.train_loss), 40)
        self.assertLess(curves.train_loss[-1], curves.train_loss[0])
        self.assertLess(curves.test_loss[-1], math.log(2.0))

    def test_overfits_ten_samples(self):
        ds = synthetic_dataset(12, seed=12)
        train_set, test_set = Dataset(ds.meta, ds.samples[:10]), Dataset(ds.meta, ds.samples[10:])
        config = TrainConfig(hidden=(32, 32), learning_rate=1e-2, batch_size=10, epochs=2000, optimizer="adam", seed=5)

        _, curves = setnet.train("set_sum", train_set, test_set, config)

        self.assertLess(curves.train_loss[-1], 0.01)

    def test_every_variant_trains(self):
        train_set, test_set = synthetic_dataset(40, seed=2).split()
        config = TrainConfig(hidden=(8,), epochs=3, batch_size=8, seed=1)

        for variant in setnet.VARIANTS:
            net, curves = setnet.train(variant, train_set, test_set, config)

            self.assertEqual(net.tag, variant)
            self.assertTrue(all(np.isfinite(curves.test_loss)))

    def test_deterministic(self):
        train_set, test_set = synthetic_dataset(40, seed=4).split()
        config = TrainConfig(hidden=(8,), epochs=5, batch_size=4, seed=9)

        first, first_curves = setnet.train("reuse_concat", train_set, test_set, config)
        second, second_curves = setnet.train("reuse_concat", train_set, test_set, config)

        self.assertEqual(setnet.encode_checkpoint(first), setnet.encode_checkpoint(second))
        self.assertEqual(first_curves, second_curves)

    def test_divergence_is_reported(self):
        ds = synthetic_dataset(10, seed=5)
        broken = ds.samples[0]
        V = broken.V.copy()
        V[NUM_CLASSES, 0] = np.nan
        ds.samples[0] = Sample(V=V, t_star=broken.t_star, scene_id=broken.scene_id, camera_id=0)
        train_set, test_set = ds.split()
        config = TrainConfig(hidden=(4,), epochs=2, batch_size=64, seed=0)

        with self.assertRaises(TrainingDivergedError) as context:
            setnet.train("set_sum", Dataset(ds.meta, ds.samples), test_set, config)

        self.assertEqual(context.exception.epoch, 1)
        self.assertEqual(context.exception.batch, 0)

    def test_empty_split(self):
        train_set, _ = synthetic_dataset(10, seed=6).split()

        with self.assertRaises(ValueError):
            setnet.train("set_sum", train_set, Dataset(train_set.meta, []), TrainConfig(epochs=1))


class TestCheckpoint(fake_filesystem_unittest.TestCase):

    def setUp(self):
        self.setUpPyfakefs()

    def test_round_trip_is_bit_exact(self):
        rng = np.random.default_rng(10)
        inputs = np.stack([random_input(rng) for _ in range(5)])

        for variant in setnet.VARIANTS:
            net = tiny_network(variant, seed=11)
            filename = "models/{}.ckpt".format(variant)

            setnet.save_checkpoint(filename, net)
            result = setnet.load_checkpoint(filename)

            self.assertEqual(result.tag, variant)
            self.assertEqual(result.hidden, net.hidden)
            for a, b in zip(result.parameters(), net.parameters()):
                self.assertEqual(a.tobytes(), b.tobytes())
            self.assertEqual(result.forward_batch(inputs)[0].tobytes(), net.forward_batch(inputs)[0].tobytes())

    def test_truncated_payload(self):
        contents = setnet.encode_checkpoint(tiny_network("vanilla_fc"))

        with self.assertRaises(CheckpointError):
            setnet.decode_checkpoint(contents[:-8])

    def test_bad_header(self):
        contents = setnet.encode_checkpoint(tiny_network("set_sum"))

        with self.assertRaises(CheckpointError):
            setnet.decode_checkpoint(b"not json" + contents)
        with self.assertRaises(CheckpointError):
            setnet.decode_checkpoint(contents.replace(b'"version": 1', b'"version": 7', 1))
        with self.assertRaises(CheckpointError):
            setnet.decode_checkpoint(contents.replace(b'"set_sum"', b'"mystery"', 1))


if __name__ == "__main__":
    unittest.main()
