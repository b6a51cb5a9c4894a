#!/usr/bin/env python

"""
Network inputs and labels, and the per-camera dataset file.

A dataset file is a text header line followed by one line per sample:

    risbeam-dataset <version> <meta as JSON>
    <scene_id>,<camera_id>,<V flattened row-major, space separated>,<t* bits>

Floats are written with repr() so a load after a save is bit-exact.
"""

import dataclasses
import json
from dataclasses import dataclass

import numpy as np

from . import filesystem
from . import seeding
from .errors import DatasetFormatError, InsufficientDataError

MAGIC = "risbeam-dataset"
VERSION = 1

BBOX_FEATURES = 4

POSITIVE_FIELDS = ("num_classes", "u_max", "num_beams", "image_width", "image_height")
NON_NEGATIVE_FIELDS = ("camera_id", "split_seed", "count")


@dataclass(frozen=True)
class DatasetMeta:
    num_classes: int
    u_max: int
    num_beams: int
    camera_id: int
    image_width: int
    image_height: int
    split_seed: int = 0
    train_fraction: float = 0.8
    count: int = 0

    @property
    def input_rows(self):
        return self.num_classes + BBOX_FEATURES


@dataclass(frozen=True, eq=False)
class Sample:
    # (C + 4, U_max)
    V: np.ndarray
    # (|Q|,) in {0, 1}
    t_star: np.ndarray
    scene_id: int
    camera_id: int

    def __eq__(self, other):
        if not isinstance(other, Sample):
            return NotImplemented
        return (
            self.scene_id == other.scene_id
            and self.camera_id == other.camera_id
            and self.V.shape == other.V.shape
            and self.V.tobytes() == other.V.tobytes()
            and np.array_equal(self.t_star, other.t_star)
        )

    __hash__ = None

    @property
    def beam_set(self):
        return decode_label(self.t_star)


def encode_input(dets, num_classes, u_max, camera):
    """
    Return the input matrix V: one column per detection holding the one-hot
    class and the box normalised by the image size, zero columns after
    """
    dets = list(dets)
    if len(dets) > u_max:
        # keep the largest boxes; small ones are the farthest UEs
        keep = sorted(
            sorted(range(len(dets)), key=lambda i: -dets[i].bbox.area)[:u_max]
        )
        dets = [dets[i] for i in keep]

    V = np.zeros((num_classes + BBOX_FEATURES, u_max))
    for u, det in enumerate(dets):
        V[det.class_id, u] = 1.0
        V[num_classes:, u] = (
            det.bbox.x_center / camera.width,
            det.bbox.y_center / camera.height,
            det.bbox.width / camera.width,
            det.bbox.height / camera.height,
        )

    return V


def encode_label(qset, num_beams):
    """
    Return the multi-hot vector t* of a beam set
    """
    t = np.zeros(num_beams, dtype=np.uint8)
    for q in qset:
        if not 1 <= q <= num_beams:
            raise ValueError("beam index {} outside 1..{}".format(q, num_beams))
        t[q - 1] = 1

    return t


def decode_label(t, threshold=0.5):
    """
    Return the beam set of a multi-hot or score vector
    """
    return frozenset(int(q) + 1 for q in np.flatnonzero(np.asarray(t, dtype=float) > threshold))


def split(samples, train_fraction, seed):
    """
    Return (train, test) after a seeded shuffle
    """
    samples = list(samples)
    if len(samples) < 2:
        raise InsufficientDataError("need at least 2 samples to split, got {}".format(len(samples)))
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction {} outside (0, 1)".format(train_fraction))

    order = seeding.substream(seed, "split").permutation(len(samples))
    n_train = min(max(int(round(len(samples) * train_fraction)), 1), len(samples) - 1)

    return (
        [samples[i] for i in order[:n_train]],
        [samples[i] for i in order[n_train:]],
    )


def _format_record(sample):
    values = " ".join(repr(float(v)) for v in sample.V.reshape(-1))
    bits = "".join("1" if b else "0" for b in sample.t_star)
    return "{},{},{},{}".format(sample.scene_id, sample.camera_id, values, bits)


def parse_header(line):
    """
    Return the DatasetMeta of a header line
    """
    parts = line.split(" ", 2)
    if len(parts) != 3 or parts[0] != MAGIC:
        raise DatasetFormatError("not a risbeam dataset: bad header {!r}".format(line[:60]))

    try:
        version = int(parts[1])
    except ValueError:
        raise DatasetFormatError("corrupted header: version {!r}".format(parts[1]))
    if version != VERSION:
        raise DatasetFormatError("unsupported dataset version {} (expected {})".format(version, VERSION))

    try:
        fields = json.loads(parts[2])
        meta = DatasetMeta(**fields)
    except (ValueError, TypeError) as e:
        raise DatasetFormatError("corrupted header: {}".format(e))

    _check_meta(meta)
    return meta


def _check_meta(meta):
    for name in POSITIVE_FIELDS + NON_NEGATIVE_FIELDS:
        value = getattr(meta, name)
        if isinstance(value, bool) or not isinstance(value, int):
            raise DatasetFormatError("corrupted header: {} must be an integer, got {!r}".format(name, value))
        if value < (1 if name in POSITIVE_FIELDS else 0):
            raise DatasetFormatError("corrupted header: {} out of range, got {}".format(name, value))

    fraction = meta.train_fraction
    if isinstance(fraction, bool) or not isinstance(fraction, (int, float)) or not 0.0 < fraction < 1.0:
        raise DatasetFormatError("corrupted header: train_fraction must be within (0, 1), got {!r}".format(fraction))


def parse_record(line, meta):
    """
    Return the Sample of a record line
    """
    parts = line.split(",")
    if len(parts) != 4:
        raise DatasetFormatError("malformed record {!r}".format(line[:60]))

    scene_id, camera_id, values, bits = parts
    try:
        V = np.array([float(v) for v in values.split()], dtype=np.float64)
        scene_id = int(scene_id)
        camera_id = int(camera_id)
    except ValueError as e:
        raise DatasetFormatError("malformed record: {}".format(e))

    if V.size != meta.input_rows * meta.u_max:
        raise DatasetFormatError("record for scene {} holds {} values, expected {}".format(
            scene_id, V.size, meta.input_rows * meta.u_max))
    if len(bits) != meta.num_beams or set(bits) - {"0", "1"}:
        raise DatasetFormatError("record for scene {} has a bad label".format(scene_id))
    if camera_id != meta.camera_id:
        raise DatasetFormatError("record camera {} in a dataset of camera {}".format(camera_id, meta.camera_id))

    return Sample(
        V=V.reshape(meta.input_rows, meta.u_max),
        t_star=np.array([b == "1" for b in bits], dtype=np.uint8),
        scene_id=scene_id,
        camera_id=camera_id,
    )


class Dataset(object):
    def __init__(self, meta, samples):
        self.samples = list(samples)
        self.meta = dataclasses.replace(meta, count=len(self.samples))

    def __len__(self):
        return len(self.samples)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return self.meta == other.meta and self.samples == other.samples

    @classmethod
    def from_file(cls, filename):
        return cls.from_string(filesystem.get_file_contents(filename))

    @classmethod
    def from_string(cls, contents):
        lines = contents.split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        if not lines:
            raise DatasetFormatError("empty dataset file: missing header")

        meta = parse_header(lines[0])
        samples = [parse_record(line, meta) for line in lines[1:]]
        if len(samples) != meta.count:
            raise DatasetFormatError("truncated dataset: {} record(s), header announces {}".format(
                len(samples), meta.count))

        return cls(meta, samples)

    def to_string(self):
        header = "{} {} {}".format(MAGIC, VERSION, json.dumps(dataclasses.asdict(self.meta), sort_keys=True))
        return "".join(line + "\n" for line in [header] + [_format_record(s) for s in self.samples])

    def _filter(self, predicate=lambda sample: True):
        self.samples = [sample for sample in self.samples if predicate(sample)]
        self.meta = dataclasses.replace(self.meta, count=len(self.samples))

    def filter_nonempty(self):
        self._filter(lambda sample: bool(np.any(sample.t_star)))

    def inputs(self):
        """
        Return every V stacked, shape (count, C + 4, U_max)
        """
        if not self.samples:
            return np.zeros((0, self.meta.input_rows, self.meta.u_max))
        return np.stack([s.V for s in self.samples])

    def labels(self):
        if not self.samples:
            return np.zeros((0, self.meta.num_beams))
        return np.stack([s.t_star for s in self.samples]).astype(np.float64)

    def split(self):
        train, test = split(self.samples, self.meta.train_fraction, self.meta.split_seed)
        return Dataset(self.meta, train), Dataset(self.meta, test)


def save_dataset(filename, dataset):
    filesystem.write_file_contents(filename, dataset.to_string())


def load_dataset(filename):
    return Dataset.from_file(filename)
