#!/usr/bin/env python

"""
Run configuration: frozen dataclasses, JSON loading and validation.

A run configuration is a single JSON document whose top-level sections map to
the dataclasses below. Missing keys take the dataclass defaults.
"""

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

from . import filesystem
from .errors import ConfigError

SPEED_OF_LIGHT = 299792458.0
MAX_CODEBOOK_AXIS = 1024

PULSES = ("sinc", "raised_cosine")
OPTIMIZERS = ("momentum", "adam")

Vector3 = Tuple[float, float, float]


def _check(condition, message, *args):
    if not condition:
        raise ConfigError(message.format(*args))


@dataclass(frozen=True)
class RisPose:
    position: Vector3 = (0.0, 0.0, 6.0)
    # yaw of the surface normal measured from +x, pitch positive upward
    yaw: float = math.pi / 2
    pitch: float = 0.0

    def validate(self):
        _check(len(self.position) == 3, "ris position must be 3D, got {!r}", self.position)
        _check(abs(self.pitch) < math.pi / 2, "ris pitch {} must be within (-pi/2, pi/2)", self.pitch)


@dataclass(frozen=True)
class CameraModel:
    position: Vector3 = (0.0, 0.3, 6.5)
    yaw: float = math.pi / 2
    pitch: float = -0.25
    horizontal_fov: float = math.radians(110.0)
    width: int = 960
    height: int = 540

    @property
    def focal_px(self):
        return (self.width / 2.0) / math.tan(self.horizontal_fov / 2.0)

    def validate(self):
        _check(len(self.position) == 3, "camera position must be 3D, got {!r}", self.position)
        _check(0.0 < self.horizontal_fov < math.pi, "camera fov {} must be within (0, pi)", self.horizontal_fov)
        _check(self.width > 0 and self.height > 0, "camera image size {}x{} must be positive", self.width, self.height)
        _check(abs(self.pitch) < math.pi / 2, "camera pitch {} must be within (-pi/2, pi/2)", self.pitch)


@dataclass(frozen=True)
class BlockerSpec:
    center: Vector3
    extents: Vector3

    @property
    def lower(self):
        return tuple(c - e / 2.0 for c, e in zip(self.center, self.extents))

    @property
    def upper(self):
        return tuple(c + e / 2.0 for c, e in zip(self.center, self.extents))

    def validate(self):
        _check(len(self.center) == 3 and len(self.extents) == 3, "blocker must be 3D, got {!r}", self)
        _check(all(e > 0 for e in self.extents), "blocker extents {!r} must be strictly positive", self.extents)


def _default_blockers():
    return (
        # north blocks either side of an alley facing the base station
        BlockerSpec(center=(-42.0, 31.5, 7.0), extents=(76.0, 27.0, 14.0)),
        BlockerSpec(center=(42.0, 31.5, 7.0), extents=(76.0, 27.0, 14.0)),
        # building carrying the RIS
        BlockerSpec(center=(0.0, -10.25, 10.0), extents=(160.0, 19.5, 20.0)),
    )


def _default_cameras():
    side = math.radians(50.0)
    return (
        CameraModel(yaw=math.pi / 2, horizontal_fov=math.radians(110.0)),
        CameraModel(yaw=math.pi / 2 + side, horizontal_fov=math.radians(75.0)),
        CameraModel(yaw=math.pi / 2 - side, horizontal_fov=math.radians(75.0)),
    )


@dataclass(frozen=True)
class ScenarioConfig:
    ris: RisPose = field(default_factory=RisPose)
    bs_position: Vector3 = (0.0, 60.0, 30.0)
    street_axis: Vector3 = (1.0, 0.0, 0.0)
    ue_count_range: Tuple[int, int] = (1, 5)
    ue_speed_range: Tuple[float, float] = (5.0, 15.0)
    ue_region: Tuple[Vector3, Vector3] = ((-40.0, 5.0, 0.7), (40.0, 15.0, 1.6))
    blockers: Tuple[BlockerSpec, ...] = field(default_factory=_default_blockers)
    cameras: Tuple[CameraModel, ...] = field(default_factory=_default_cameras)
    master_seed: int = 0
    num_classes: int = 2
    class_probabilities: Tuple[float, ...] = (0.75, 0.25)
    class_extents: Tuple[Vector3, ...] = ((4.5, 1.8, 1.5), (8.0, 2.5, 3.0))

    def region_contains(self, point):
        lower, upper = self.ue_region
        return all(lo <= p <= hi for p, lo, hi in zip(point, lower, upper))

    def validate(self):
        self.ris.validate()
        for blocker in self.blockers:
            blocker.validate()
        for camera in self.cameras:
            camera.validate()

        lower, upper = self.ue_region
        _check(len(lower) == 3 and len(upper) == 3, "ue_region must be two 3D corners, got {!r}", self.ue_region)
        _check(
            all(hi > lo for lo, hi in zip(lower, upper)),
            "ue_region {!r} has zero volume", self.ue_region
        )
        _check(not self.region_contains(self.bs_position), "ue_region contains the bs position {!r}", self.bs_position)

        low_count, high_count = self.ue_count_range
        _check(0 <= low_count <= high_count, "invalid ue_count_range {!r}", self.ue_count_range)
        low_speed, high_speed = self.ue_speed_range
        _check(0.0 <= low_speed <= high_speed, "invalid ue_speed_range {!r}", self.ue_speed_range)

        norm = math.sqrt(sum(a * a for a in self.street_axis))
        _check(abs(norm - 1.0) < 1e-9, "street_axis {!r} must be a unit vector", self.street_axis)
        _check(0 <= self.master_seed < 2 ** 64, "master_seed {} must be an unsigned 64-bit integer", self.master_seed)

        _check(self.num_classes >= 1, "num_classes must be at least 1")
        _check(
            len(self.class_probabilities) == self.num_classes,
            "class_probabilities needs {} entries", self.num_classes
        )
        _check(
            all(p >= 0.0 for p in self.class_probabilities)
            and abs(sum(self.class_probabilities) - 1.0) < 1e-9,
            "class_probabilities {!r} must be a distribution", self.class_probabilities
        )
        _check(len(self.class_extents) == self.num_classes, "class_extents needs {} entries", self.num_classes)
        _check(
            all(len(e) == 3 and all(v > 0 for v in e) for e in self.class_extents),
            "class_extents {!r} must be positive 3D sizes", self.class_extents
        )


@dataclass(frozen=True)
class RadioConfig:
    carrier_frequency: float = 28e9
    bandwidth: float = 100e6
    num_subcarriers: int = 64
    num_taps: int = 80
    transmit_power: float = 1.0
    noise_variance: float = 1e-19
    pathloss: float = 1.0
    pulse: str = "sinc"
    rolloff: float = 0.8
    max_paths: int = 3
    reflection_loss_db: float = 6.0
    receive_snr_db: Optional[float] = None

    @property
    def sample_period(self):
        return 1.0 / self.bandwidth

    @property
    def wavelength(self):
        return SPEED_OF_LIGHT / self.carrier_frequency

    @property
    def snr(self):
        return self.transmit_power / (self.num_subcarriers * self.noise_variance)

    def validate(self):
        _check(self.num_subcarriers >= 1, "num_subcarriers must be at least 1")
        _check(self.num_taps >= 1, "num_taps must be at least 1")
        _check(self.transmit_power > 0, "transmit_power must be positive")
        _check(self.noise_variance > 0, "noise_variance must be positive")
        _check(self.pathloss > 0, "pathloss must be positive")
        _check(self.carrier_frequency > 0 and self.bandwidth > 0, "carrier and bandwidth must be positive")
        _check(self.pulse in PULSES, "unknown pulse {!r}, expected one of {}", self.pulse, ", ".join(PULSES))
        _check(0.0 < self.rolloff <= 1.0, "rolloff {} must be within (0, 1]", self.rolloff)
        _check(self.max_paths >= 1, "max_paths must be at least 1")


@dataclass(frozen=True)
class UpaGeometry:
    cols: int = 32
    rows: int = 8
    spacing: float = 0.5

    @property
    def size(self):
        return self.cols * self.rows

    def validate(self):
        _check(self.cols >= 1 and self.rows >= 1, "array needs at least one element, got {}x{}", self.cols, self.rows)
        _check(self.spacing > 0, "element spacing must be positive")


@dataclass(frozen=True)
class CodebookConfig:
    n_az: int = 32
    n_el: int = 8

    @property
    def size(self):
        return self.n_az * self.n_el

    def validate(self):
        _check(self.n_az >= 1 and self.n_el >= 1, "codebook grid {}x{} is empty", self.n_az, self.n_el)
        _check(
            self.n_az <= MAX_CODEBOOK_AXIS and self.n_el <= MAX_CODEBOOK_AXIS,
            "codebook grid {}x{} exceeds {} points per axis", self.n_az, self.n_el, MAX_CODEBOOK_AXIS
        )


@dataclass(frozen=True)
class DetectorNoise:
    bbox_jitter_std: float = 2.0
    miss_prob: float = 0.02
    false_positive_rate: float = 0.05
    class_confusion_prob: float = 0.01

    def validate(self):
        _check(self.bbox_jitter_std >= 0, "bbox_jitter_std must be non-negative")
        _check(0.0 <= self.miss_prob <= 1.0, "miss_prob {} must be within [0, 1]", self.miss_prob)
        _check(0.0 <= self.class_confusion_prob <= 1.0, "class_confusion_prob {} must be within [0, 1]",
               self.class_confusion_prob)
        _check(self.false_positive_rate >= 0, "false_positive_rate must be non-negative")


@dataclass(frozen=True)
class DatasetConfig:
    num_scenes: int = 10000
    u_max: int = 8
    train_fraction: float = 0.8
    keep_empty: bool = False
    workers: int = 1

    def validate(self):
        _check(self.num_scenes >= 1, "num_scenes must be at least 1")
        _check(self.u_max >= 1, "u_max must be at least 1")
        _check(0.0 < self.train_fraction < 1.0, "train_fraction {} must be within (0, 1)", self.train_fraction)
        _check(self.workers >= 1, "workers must be at least 1")


@dataclass(frozen=True)
class TrainConfig:
    variant: str = "set_sum"
    hidden: Tuple[int, ...] = (128, 128)
    learning_rate: float = 1e-2
    batch_size: int = 32
    epochs: int = 200
    optimizer: str = "momentum"
    momentum: float = 0.9
    seed: int = 0

    def validate(self):
        _check(self.learning_rate > 0, "learning_rate must be positive")
        _check(self.batch_size >= 1, "batch_size must be at least 1")
        _check(self.epochs >= 1, "epochs must be at least 1")
        _check(all(h >= 1 for h in self.hidden), "hidden widths {!r} must be positive", self.hidden)
        _check(self.optimizer in OPTIMIZERS, "unknown optimizer {!r}, expected one of {}",
               self.optimizer, ", ".join(OPTIMIZERS))
        _check(0.0 <= self.momentum < 1.0, "momentum {} must be within [0, 1)", self.momentum)


@dataclass(frozen=True)
class EvalConfig:
    threshold: float = 0.5
    k_values: Tuple[int, ...] = (1, 2, 4, 8, 12, 16, 32)

    def validate(self):
        _check(0.0 < self.threshold < 1.0, "threshold {} must be within (0, 1)", self.threshold)
        _check(len(self.k_values) >= 1 and all(k >= 1 for k in self.k_values), "k_values {!r} must be positive",
               self.k_values)


@dataclass(frozen=True)
class RunConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    radio: RadioConfig = field(default_factory=RadioConfig)
    array: UpaGeometry = field(default_factory=UpaGeometry)
    bs_array: UpaGeometry = field(default_factory=lambda: UpaGeometry(cols=1, rows=1))
    codebook: CodebookConfig = field(default_factory=CodebookConfig)
    detector: DetectorNoise = field(default_factory=DetectorNoise)
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    output_dir: str = "out"

    def validate(self):
        for section in (self.scenario, self.radio, self.array, self.bs_array, self.codebook,
                        self.detector, self.dataset, self.train, self.eval):
            section.validate()

        _check(len(self.scenario.cameras) >= 1, "configuration needs at least one camera")
        _check(
            self.scenario.ue_count_range[1] <= self.dataset.u_max,
            "ue_count_range maximum {} exceeds u_max {}", self.scenario.ue_count_range[1], self.dataset.u_max
        )
        _check(
            all(k <= self.codebook.size for k in self.eval.k_values),
            "k_values {!r} exceed the codebook size {}", self.eval.k_values, self.codebook.size
        )

        return self


def _tuplify(value):
    if isinstance(value, list):
        return tuple(_tuplify(v) for v in value)
    return value


_NESTED = {
    (ScenarioConfig, "ris"): lambda value: _from_dict(RisPose, value, "scenario.ris"),
    (ScenarioConfig, "blockers"): lambda value: tuple(
        _from_dict(BlockerSpec, item, "scenario.blockers") for item in value
    ),
    (ScenarioConfig, "cameras"): lambda value: tuple(
        _from_dict(CameraModel, item, "scenario.cameras") for item in value
    ),
}

_SECTIONS = {
    "scenario": ScenarioConfig,
    "radio": RadioConfig,
    "array": UpaGeometry,
    "bs_array": UpaGeometry,
    "codebook": CodebookConfig,
    "detector": DetectorNoise,
    "dataset": DatasetConfig,
    "train": TrainConfig,
    "eval": EvalConfig,
}


def _from_dict(cls, data, section):
    if not isinstance(data, dict):
        raise ConfigError("section {!r} must be an object".format(section))

    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError("unknown keys in {!r}: {}".format(section, ", ".join(unknown)))

    kwargs = {}
    for key, value in data.items():
        convert = _NESTED.get((cls, key))
        kwargs[key] = convert(value) if convert else _tuplify(value)

    try:
        return cls(**kwargs)
    except TypeError as e:
        raise ConfigError("invalid section {!r}: {}".format(section, e))


def run_config_from_dict(data, seed=None):
    """
    Return a validated RunConfig from a parsed JSON document
    """
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")

    unknown = sorted(set(data) - set(_SECTIONS) - {"output_dir"})
    if unknown:
        raise ConfigError("unknown configuration sections: {}".format(", ".join(unknown)))

    kwargs = {
        name: _from_dict(cls, data[name], name)
        for name, cls in _SECTIONS.items()
        if name in data
    }
    if "output_dir" in data:
        kwargs["output_dir"] = str(data["output_dir"])

    config = RunConfig(**kwargs)
    if seed is not None:
        config = with_seed(config, seed)

    return config.validate()


def load_run_config(filename, seed=None):
    """
    Return a validated RunConfig read from a JSON file
    """
    try:
        data = json.loads(filesystem.get_file_contents(filename))
    except json.JSONDecodeError as e:
        raise ConfigError("{}: not valid JSON ({})".format(filename, e))

    return run_config_from_dict(data, seed=seed)


def with_seed(config, seed):
    scenario = dataclasses.replace(config.scenario, master_seed=int(seed))
    return dataclasses.replace(config, scenario=scenario)


def run_config_to_dict(config):
    return dataclasses.asdict(config)


def config_hash(config):
    """
    Return the SHA-256 of the canonical JSON form of a configuration
    """
    data = run_config_to_dict(config)
    # where results go does not change what they are
    data.pop("output_dir")
    canonical = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
