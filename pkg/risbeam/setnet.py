#!/usr/bin/env python

"""
Beam-set prediction networks, trained with hand-written backpropagation.

All networks map an input matrix V (C + 4 rows, one column per detected UE,
zero columns as padding) to |Q| scores in (0, 1):

* set_sum: a shared fully connected stack on every non-zero column, summed,
  then a sigmoid. Invariant to column order and to padding.
* reuse_concat: the shared stack on every column, the U_max feature vectors
  concatenated, then a linear layer and a sigmoid.
* vanilla_fc: a fully connected stack on the flattened V, then a sigmoid.

Batches are arrays of shape (B, C + 4, U_max); scores are (B, |Q|).
"""

import json
import logging
from dataclasses import dataclass, field
from typing import List

import numpy as np

from . import filesystem
from . import seeding
from .errors import CheckpointError, ConfigError, InsufficientDataError, ShapeMismatchError, TrainingDivergedError

logger = logging.getLogger(__name__)

SCORE_EPS = 1e-12
CHECKPOINT_MAGIC = "risbeam-checkpoint"
CHECKPOINT_VERSION = 1
EVAL_BATCH = 512


def relu(x):
    return np.maximum(x, 0.0)


def sigmoid(z):
    """
    Return the logistic function, kept strictly inside (0, 1)
    """
    e = np.exp(-np.abs(z))
    s = np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return np.clip(s, SCORE_EPS, 1.0 - SCORE_EPS)


def loss(t, t_star):
    """
    Return the binary cross-entropy averaged over beams (and samples)
    """
    t = np.clip(np.asarray(t, dtype=float), SCORE_EPS, 1.0 - SCORE_EPS)
    t_star = np.asarray(t_star, dtype=float)
    return float(-np.mean(t_star * np.log(t) + (1.0 - t_star) * np.log(1.0 - t)))


def canonical_columns(V):
    """
    Return the non-zero columns of V sorted lexicographically by content, so
    any column permutation of V yields the same matrix
    """
    V = np.asarray(V, dtype=float)
    columns = V[:, np.any(V != 0.0, axis=0)]
    order = np.lexsort(columns[::-1]) if columns.shape[1] else np.zeros(0, dtype=int)
    return columns[:, order]


class MlpStack(object):
    """
    Fully connected layers with ReLU between them; columns are samples
    """

    def __init__(self, widths, rng=None, output_relu=False):
        self.widths = [int(w) for w in widths]
        self.output_relu = output_relu
        self.weights = [
            np.zeros((fan_out, fan_in))
            for fan_in, fan_out in zip(self.widths[:-1], self.widths[1:])
        ]
        self.biases = [np.zeros(fan_out) for fan_out in self.widths[1:]]

        if rng is not None:
            for W in self.weights:
                # He initialisation for ReLU layers
                W[...] = rng.normal(0.0, np.sqrt(2.0 / W.shape[1]), size=W.shape)

    @property
    def num_layers(self):
        return len(self.weights)

    def parameters(self):
        return [p for W, b in zip(self.weights, self.biases) for p in (W, b)]

    def _activated(self, layer):
        return layer < self.num_layers - 1 or self.output_relu

    def forward(self, X):
        activations = [X]
        pre_activations = []
        A = X
        for layer, (W, b) in enumerate(zip(self.weights, self.biases)):
            Z = W @ A + b[:, np.newaxis]
            pre_activations.append(Z)
            A = relu(Z) if self._activated(layer) else Z
            activations.append(A)

        return A, (activations, pre_activations)

    def backward(self, cache, dY):
        activations, pre_activations = cache
        grads = [None] * (2 * self.num_layers)
        dA = dY
        for layer in reversed(range(self.num_layers)):
            dZ = dA * (pre_activations[layer] > 0.0) if self._activated(layer) else dA
            grads[2 * layer] = dZ @ activations[layer].T
            grads[2 * layer + 1] = dZ.sum(axis=1)
            dA = self.weights[layer].T @ dZ

        return grads, dA


class Network(object):
    tag = None

    def __init__(self, num_classes, u_max, num_beams, hidden=(128, 128)):
        self.num_classes = int(num_classes)
        self.u_max = int(u_max)
        self.num_beams = int(num_beams)
        self.hidden = tuple(int(h) for h in hidden)

    @property
    def input_rows(self):
        return self.num_classes + 4

    def parameters(self):
        raise NotImplementedError

    def _check_batch(self, Vs):
        Vs = np.asarray(Vs, dtype=float)
        if Vs.ndim != 3 or Vs.shape[1:] != (self.input_rows, self.u_max):
            raise ShapeMismatchError("{} expects inputs of shape (B, {}, {}), got {}".format(
                self.tag, self.input_rows, self.u_max, Vs.shape))
        return Vs

    def forward(self, V):
        """
        Return the |Q| scores of one input matrix
        """
        scores, _ = self.forward_batch(np.asarray(V, dtype=float)[np.newaxis])
        return scores[0]

    def forward_batch(self, Vs):
        raise NotImplementedError

    def backward_batch(self, cache, scores, targets):
        raise NotImplementedError

    @staticmethod
    def _output_gradient(scores, targets):
        # derivative of the mean binary cross-entropy through the sigmoid
        return (scores - np.asarray(targets, dtype=float)) / scores.size


class SetSumNetwork(Network):
    tag = "set_sum"

    def __init__(self, num_classes, u_max, num_beams, hidden=(128, 128), rng=None):
        super().__init__(num_classes, u_max, num_beams, hidden)
        self.stack = MlpStack([self.input_rows, *self.hidden, self.num_beams], rng=rng)

    def parameters(self):
        return self.stack.parameters()

    def forward_batch(self, Vs):
        Vs = np.asarray(Vs, dtype=float)
        # any number of columns: padding never reaches the stack
        if Vs.ndim != 3 or Vs.shape[1] != self.input_rows:
            raise ShapeMismatchError("{} expects inputs with {} rows, got shape {}".format(
                self.tag, self.input_rows, Vs.shape))

        groups = [canonical_columns(V) for V in Vs]
        X = np.concatenate(groups, axis=1) if groups else np.zeros((self.input_rows, 0))
        Y, stack_cache = self.stack.forward(X)

        Z = np.zeros((len(groups), self.num_beams))
        offset = 0
        for b, group in enumerate(groups):
            n = group.shape[1]
            if n:
                Z[b] = Y[:, offset:offset + n].sum(axis=1)
            offset += n

        return sigmoid(Z), (stack_cache, [g.shape[1] for g in groups])

    def backward_batch(self, cache, scores, targets):
        stack_cache, counts = cache
        dZ = self._output_gradient(scores, targets)

        dY = np.zeros((self.num_beams, sum(counts)))
        offset = 0
        for b, n in enumerate(counts):
            dY[:, offset:offset + n] = dZ[b][:, np.newaxis]
            offset += n

        grads, _ = self.stack.backward(stack_cache, dY)
        return grads


class ReuseConcatNetwork(Network):
    tag = "reuse_concat"

    def __init__(self, num_classes, u_max, num_beams, hidden=(128, 128), rng=None):
        super().__init__(num_classes, u_max, num_beams, hidden)
        self.stack = MlpStack([self.input_rows, *self.hidden, self.num_beams], rng=rng, output_relu=True)
        self.head = MlpStack([self.u_max * self.num_beams, self.num_beams], rng=rng)

    def parameters(self):
        return self.stack.parameters() + self.head.parameters()

    def forward_batch(self, Vs):
        Vs = self._check_batch(Vs)
        B = Vs.shape[0]

        X = Vs.transpose(1, 0, 2).reshape(self.input_rows, B * self.u_max)
        Y, stack_cache = self.stack.forward(X)
        # column b of H is [y_b1; y_b2; ...; y_bU]
        H = Y.reshape(self.num_beams, B, self.u_max).transpose(2, 0, 1).reshape(self.u_max * self.num_beams, B)
        Z, head_cache = self.head.forward(H)

        return sigmoid(Z.T), (stack_cache, head_cache, B)

    def backward_batch(self, cache, scores, targets):
        stack_cache, head_cache, B = cache
        dZ = self._output_gradient(scores, targets)

        head_grads, dH = self.head.backward(head_cache, dZ.T)
        dY = dH.reshape(self.u_max, self.num_beams, B).transpose(1, 2, 0).reshape(self.num_beams, B * self.u_max)
        stack_grads, _ = self.stack.backward(stack_cache, dY)

        return stack_grads + head_grads


class VanillaNetwork(Network):
    tag = "vanilla_fc"

    def __init__(self, num_classes, u_max, num_beams, hidden=(128, 128), rng=None):
        super().__init__(num_classes, u_max, num_beams, hidden)
        self.stack = MlpStack([self.input_rows * self.u_max, *self.hidden, self.num_beams], rng=rng)

    def parameters(self):
        return self.stack.parameters()

    def forward_batch(self, Vs):
        Vs = self._check_batch(Vs)
        # flattened column by column: [v_1; v_2; ...; v_U]
        X = Vs.transpose(0, 2, 1).reshape(Vs.shape[0], -1).T
        Z, stack_cache = self.stack.forward(X)

        return sigmoid(Z.T), stack_cache

    def backward_batch(self, cache, scores, targets):
        grads, _ = self.stack.backward(cache, self._output_gradient(scores, targets).T)
        return grads


VARIANTS = {
    SetSumNetwork.tag: SetSumNetwork,
    ReuseConcatNetwork.tag: ReuseConcatNetwork,
    VanillaNetwork.tag: VanillaNetwork,
}


def network_class(variant):
    if variant not in VARIANTS:
        raise ConfigError("unknown network variant {!r}, expected one of: {}".format(
            variant, ", ".join(sorted(VARIANTS))))
    return VARIANTS[variant]


def build_network(variant, num_classes, u_max, num_beams, hidden=(128, 128), seed=None):
    """
    Return a network of the given variant, randomly initialised when a seed
    is given and all-zero otherwise
    """
    rng = seeding.substream(seed, "init") if seed is not None else None
    return network_class(variant)(num_classes, u_max, num_beams, hidden=hidden, rng=rng)


def forward(net, V):
    return net.forward(V)


def backward(net, V, t_star):
    """
    Return the gradients of the loss of one sample with respect to every
    parameter, in net.parameters() order
    """
    scores, cache = net.forward_batch(np.asarray(V, dtype=float)[np.newaxis])
    return net.backward_batch(cache, scores, np.asarray(t_star, dtype=float)[np.newaxis])


def predict(net, inputs):
    """
    Return the scores of a stack of inputs, shape (count, |Q|)
    """
    inputs = np.asarray(inputs, dtype=float)
    if not len(inputs):
        return np.zeros((0, net.num_beams))
    return np.concatenate([
        net.forward_batch(inputs[start:start + EVAL_BATCH])[0]
        for start in range(0, len(inputs), EVAL_BATCH)
    ])


def dataset_loss(net, inputs, labels):
    return loss(predict(net, inputs), labels)


class MomentumOptimizer(object):
    def __init__(self, learning_rate, momentum=0.9):
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.velocities = None

    def step(self, params, grads):
        if self.velocities is None:
            self.velocities = [np.zeros_like(p) for p in params]

        for p, g, v in zip(params, grads, self.velocities):
            v *= self.momentum
            v -= self.learning_rate * g
            p += v


class AdamOptimizer(object):
    def __init__(self, learning_rate, beta1=0.9, beta2=0.999, epsilon=1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.moments = None
        self.steps = 0

    def step(self, params, grads):
        if self.moments is None:
            self.moments = [(np.zeros_like(p), np.zeros_like(p)) for p in params]

        self.steps += 1
        correction1 = 1.0 - self.beta1 ** self.steps
        correction2 = 1.0 - self.beta2 ** self.steps
        for p, g, (m, v) in zip(params, grads, self.moments):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.learning_rate * (m / correction1) / (np.sqrt(v / correction2) + self.epsilon)


def make_optimizer(cfg):
    if cfg.optimizer == "adam":
        return AdamOptimizer(cfg.learning_rate)
    return MomentumOptimizer(cfg.learning_rate, cfg.momentum)


@dataclass
class LearningCurves:
    epochs: List[int] = field(default_factory=list)
    train_loss: List[float] = field(default_factory=list)
    test_loss: List[float] = field(default_factory=list)

    def append(self, epoch, train_loss, test_loss):
        self.epochs.append(epoch)
        self.train_loss.append(train_loss)
        self.test_loss.append(test_loss)

    def rows(self):
        return list(zip(self.epochs, self.train_loss, self.test_loss))


def train(variant, train_set, test_set, cfg):
    """
    Return (network, learning curves) after mini-batch training of a variant
    """
    if not len(train_set) or not len(test_set):
        raise InsufficientDataError("training needs non-empty train and test sets")

    meta = train_set.meta
    net = build_network(variant, meta.num_classes, meta.u_max, meta.num_beams, cfg.hidden, seed=cfg.seed)
    optimizer = make_optimizer(cfg)
    rng = seeding.substream(cfg.seed, "shuffle")

    inputs, labels = train_set.inputs(), train_set.labels()
    test_inputs, test_labels = test_set.inputs(), test_set.labels()

    curves = LearningCurves()
    last_loss = None
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(inputs))
        for batch, start in enumerate(range(0, len(order), cfg.batch_size)):
            index = order[start:start + cfg.batch_size]
            scores, cache = net.forward_batch(inputs[index])
            value = loss(scores, labels[index])
            if not np.isfinite(value) or not np.all(np.isfinite(scores)):
                raise TrainingDivergedError(epoch, batch, last_loss)
            last_loss = value

            optimizer.step(net.parameters(), net.backward_batch(cache, scores, labels[index]))

        train_loss = dataset_loss(net, inputs, labels)
        test_loss = dataset_loss(net, test_inputs, test_labels)
        if not (np.isfinite(train_loss) and np.isfinite(test_loss)):
            raise TrainingDivergedError(epoch, None, last_loss)

        curves.append(epoch, train_loss, test_loss)
        logger.info("%s epoch %d/%d: train loss %.6f, test loss %.6f",
                    variant, epoch, cfg.epochs, train_loss, test_loss)

    return net, curves


def checkpoint_header(net):
    return {
        "format": CHECKPOINT_MAGIC,
        "version": CHECKPOINT_VERSION,
        "variant": net.tag,
        "num_classes": net.num_classes,
        "u_max": net.u_max,
        "num_beams": net.num_beams,
        "hidden": list(net.hidden),
        "shapes": [list(p.shape) for p in net.parameters()],
    }


def encode_checkpoint(net):
    header = json.dumps(checkpoint_header(net), sort_keys=True).encode("utf-8")
    payload = b"".join(np.ascontiguousarray(p).astype("<f8").tobytes() for p in net.parameters())
    return header + b"\n" + payload


def decode_checkpoint(contents):
    header_bytes, separator, payload = contents.partition(b"\n")
    if not separator:
        raise CheckpointError("checkpoint has no header line")

    try:
        header = json.loads(header_bytes.decode("utf-8"))
    except (UnicodeDecodeError, ValueError) as e:
        raise CheckpointError("corrupted checkpoint header: {}".format(e))
    if not isinstance(header, dict) or header.get("format") != CHECKPOINT_MAGIC:
        raise CheckpointError("not a risbeam checkpoint")
    if header.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError("unsupported checkpoint version {!r}".format(header.get("version")))

    try:
        net = build_network(
            header["variant"], header["num_classes"], header["u_max"], header["num_beams"], header["hidden"]
        )
    except (KeyError, ConfigError) as e:
        raise CheckpointError("bad checkpoint header: {}".format(e))

    params = net.parameters()
    if [list(p.shape) for p in params] != header.get("shapes"):
        raise CheckpointError("checkpoint parameter shapes do not match the {} layout".format(net.tag))
    expected = 8 * sum(p.size for p in params)
    if len(payload) != expected:
        raise CheckpointError("checkpoint payload is {} bytes, expected {}".format(len(payload), expected))

    offset = 0
    for p in params:
        p[...] = np.frombuffer(payload, dtype="<f8", count=p.size, offset=offset).reshape(p.shape)
        offset += 8 * p.size

    return net


def save_checkpoint(filename, net):
    filesystem.write_file_bytes(filename, encode_checkpoint(net))


def load_checkpoint(filename):
    return decode_checkpoint(filesystem.get_file_bytes(filename))
