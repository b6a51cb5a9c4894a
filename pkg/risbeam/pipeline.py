#!/usr/bin/env python

"""
The gen / train / eval / sweep commands.

Each command takes a resolved RunConfig and writes into an output directory;
commands only share files, so they can run as separate processes.
"""

import dataclasses
import functools
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from tqdm import tqdm

from . import filesystem
from . import seeding
from .channel import save_freq_channel
from .codebook import build_codebook, save_codebook
from .config import config_hash
from .dataset import Dataset, DatasetMeta, Sample, encode_input, encode_label, load_dataset, save_dataset
from .detector import detect
from .errors import ConfigError, DatasetFormatError, ShapeMismatchError
from .metrics import evaluate, rate_ratio_curve, write_learning_curve, write_rate_table, write_report_table, \
    write_sample_table
from .rate import candidate_links, scene_beam_set, shared_bs_channel
from .scene import Scene, generate_scene, write_scenes
from .setnet import load_checkpoint, network_class, save_checkpoint, train

logger = logging.getLogger(__name__)

MANIFEST_FORMAT = "risbeam-manifest"
MANIFEST_FILENAME = "manifest.json"
SCENES_FILENAME = "scenes.jsonl"
CHANNEL_FILENAME = "bs_ris_channel.bin"
CODEBOOK_FILENAME = "codebook.bin"


def dataset_filename(camera_id):
    return "dataset_cam{}{}".format(camera_id, filesystem.DATASET_SUFFIX)


def _artifact_name(prefix, meta, variant, suffix):
    return "{}_cam{}_{}{}".format(prefix, meta.camera_id, variant, suffix)


def static_scene(scenario):
    """
    Return the scene with no UEs: what every scene of a scenario shares
    """
    return Scene(
        scene_index=0,
        scene_seed=scenario.master_seed,
        ues=(),
        blockers=tuple(scenario.blockers),
        ris=scenario.ris,
        bs_position=tuple(scenario.bs_position),
        cameras=tuple(scenario.cameras),
    )


def scenario_codebook(config):
    return build_codebook(config.array, config.codebook.n_az, config.codebook.n_el)


def scenario_bs_channel(config):
    return shared_bs_channel(
        static_scene(config.scenario), config.array, config.bs_array, config.radio, config.scenario.master_seed
    )


def scene_samples(config, cb, h_t, scene_index):
    """
    Return (scene, one sample per camera) for one scene index
    """
    scenario = config.scenario
    scene = generate_scene(scenario, scene_index)

    samples = []
    for camera_id, camera in enumerate(scene.cameras):
        beams = scene_beam_set(scene, camera, cb, config.radio, bs_geom=config.bs_array, h_t=h_t)
        rng = seeding.substream(scenario.master_seed, "detector", scene_index, camera_id)
        detections = detect(scene, camera, config.detector, rng, num_classes=scenario.num_classes)
        samples.append(Sample(
            V=encode_input(detections, scenario.num_classes, config.dataset.u_max, camera),
            t_star=encode_label(beams, cb.size),
            scene_id=scene_index,
            camera_id=camera_id,
        ))

    return scene, samples


def _generated(config, cb, h_t, progress):
    produce = functools.partial(scene_samples, config, cb, h_t)
    indices = range(config.dataset.num_scenes)
    bar = functools.partial(tqdm, total=config.dataset.num_scenes, desc="scenes", disable=not progress)

    if config.dataset.workers > 1:
        with ProcessPoolExecutor(max_workers=config.dataset.workers) as pool:
            # map yields in scene order whatever the completion order
            yield from bar(pool.map(produce, indices, chunksize=16))
    else:
        yield from bar(map(produce, indices))


def cmd_gen(config, out_dir=None, progress=False):
    """
    Generate scenes, oracle labels and detections; write one dataset file
    per camera plus the manifest, scenes and channel dumps. Return the
    manifest.
    """
    config.validate()
    out_dir = out_dir or config.output_dir
    scenario = config.scenario

    cb = scenario_codebook(config)
    h_t = scenario_bs_channel(config)

    scenes = []
    per_camera = [[] for _ in scenario.cameras]
    for scene, samples in _generated(config, cb, h_t, progress):
        scenes.append(scene)
        for sample in samples:
            per_camera[sample.camera_id].append(sample)

    datasets = []
    kept = []
    dropped = []
    for camera_id, (camera, samples) in enumerate(zip(scenario.cameras, per_camera)):
        meta = DatasetMeta(
            num_classes=scenario.num_classes,
            u_max=config.dataset.u_max,
            num_beams=cb.size,
            camera_id=camera_id,
            image_width=camera.width,
            image_height=camera.height,
            split_seed=scenario.master_seed,
            train_fraction=config.dataset.train_fraction,
        )
        ds = Dataset(meta, samples)
        if not config.dataset.keep_empty:
            ds.filter_nonempty()
        kept.append(len(ds))
        dropped.append(len(samples) - len(ds))

        filename = dataset_filename(camera_id)
        save_dataset(os.path.join(out_dir, filename), ds)
        datasets.append(filename)
        logger.info("camera %d: %d sample(s), %d empty dropped", camera_id, len(ds), dropped[camera_id])

    write_scenes(os.path.join(out_dir, SCENES_FILENAME), scenes)
    save_freq_channel(os.path.join(out_dir, CHANNEL_FILENAME), h_t)
    save_codebook(os.path.join(out_dir, CODEBOOK_FILENAME), cb)

    manifest = {
        "format": MANIFEST_FORMAT,
        "seed": scenario.master_seed,
        "config_hash": config_hash(config),
        "num_scenes": len(scenes),
        "scene_ids": [scene.scene_index for scene in scenes],
        "datasets": datasets,
        "samples": kept,
        "dropped_empty": dropped,
    }
    filesystem.write_file_contents(
        os.path.join(out_dir, MANIFEST_FILENAME),
        json.dumps(manifest, indent=2, sort_keys=True) + "\n",
    )
    logger.info("generated %d scene(s) into %s", len(scenes), out_dir)

    return manifest


def read_manifest(filename):
    try:
        manifest = json.loads(filesystem.get_file_contents(filename))
    except ValueError as e:
        raise DatasetFormatError("{}: corrupted manifest ({})".format(filename, e))
    if not isinstance(manifest, dict) or manifest.get("format") != MANIFEST_FORMAT:
        raise DatasetFormatError("{}: not a risbeam manifest".format(filename))
    return manifest


def check_manifest(config, dataset_path):
    """
    Warn when the dataset next to a manifest came from another configuration
    """
    filename = os.path.join(os.path.dirname(dataset_path), MANIFEST_FILENAME)
    if not os.path.exists(filename):
        logger.debug("no manifest next to %s", dataset_path)
        return

    expected = read_manifest(filename).get("config_hash")
    if expected != config_hash(config):
        logger.warning("%s was generated from another configuration (hash %s)", dataset_path, expected)


@dataclass(frozen=True)
class TrainResult:
    dataset: str
    checkpoint: str
    curve: str
    curves: object


def training_config(config, camera_id, variant=None):
    cfg = config.train
    return dataclasses.replace(
        cfg,
        variant=variant or cfg.variant,
        seed=seeding.derived_seed(config.scenario.master_seed, "init", cfg.seed, camera_id),
    )


def cmd_train(config, dataset_path, variant=None, out_dir=None):
    """
    Train one model per dataset file; write checkpoints and learning curves
    """
    variant = variant or config.train.variant
    network_class(variant)
    out_dir = out_dir or config.output_dir

    paths = filesystem.dataset_paths(dataset_path)
    if not paths:
        raise DatasetFormatError("no dataset files under {}".format(dataset_path))

    results = []
    for path in paths:
        dataset = load_dataset(path)
        train_set, test_set = dataset.split()
        cfg = training_config(config, dataset.meta.camera_id, variant)
        logger.info("training %s on %s: %d train, %d test", variant, path, len(train_set), len(test_set))

        net, curves = train(variant, train_set, test_set, cfg)

        checkpoint = os.path.join(out_dir, _artifact_name("model", dataset.meta, variant, ".ckpt"))
        curve = os.path.join(out_dir, _artifact_name("curve", dataset.meta, variant, ".csv"))
        save_checkpoint(checkpoint, net)
        write_learning_curve(curve, curves)
        results.append(TrainResult(dataset=path, checkpoint=checkpoint, curve=curve, curves=curves))

    return results


def check_compatible(net, meta, cb=None):
    """
    Raise ShapeMismatchError unless the model fits the dataset (and the
    codebook of the configuration)
    """
    expected = (meta.num_classes, meta.u_max, meta.num_beams)
    actual = (net.num_classes, net.u_max, net.num_beams)
    if actual != expected:
        raise ShapeMismatchError(
            "model (C={}, U_max={}, |Q|={}) does not fit dataset (C={}, U_max={}, |Q|={})".format(*actual, *expected)
        )
    if cb is not None and cb.size != meta.num_beams:
        raise ShapeMismatchError("codebook has {} beams, dataset {}".format(cb.size, meta.num_beams))


class LinkLookup(object):
    """
    Candidate links of a sample, rebuilt from its scene id
    """

    def __init__(self, config, cb, h_t):
        self.config = config
        self.cb = cb
        self.h_t = h_t

    def __call__(self, sample):
        scene = generate_scene(self.config.scenario, sample.scene_id)
        camera = scene.cameras[sample.camera_id]
        return [
            candidate.link
            for candidate in candidate_links(
                scene, camera, self.cb, self.config.radio, bs_geom=self.config.bs_array, h_t=self.h_t
            )
        ]


def _prepare(config, dataset_path, model_path):
    dataset = load_dataset(dataset_path)
    net = load_checkpoint(model_path)
    cb = scenario_codebook(config)
    check_compatible(net, dataset.meta, cb)
    check_manifest(config, dataset_path)

    _, test_set = dataset.split()
    links_of = LinkLookup(config, cb, scenario_bs_channel(config))

    return net, test_set, cb, links_of


def cmd_eval(config, dataset_path, model_path, out_dir=None):
    """
    Evaluate a model on the test split of a dataset; write the summary and
    per-sample tables and return the EvalReport
    """
    out_dir = out_dir or config.output_dir
    net, test_set, cb, links_of = _prepare(config, dataset_path, model_path)

    report = evaluate(net, test_set.samples, config.eval.threshold, links_of=links_of, cb=cb)

    write_report_table(os.path.join(out_dir, _artifact_name("eval", test_set.meta, net.tag, ".csv")), report)
    write_sample_table(os.path.join(out_dir, _artifact_name("samples", test_set.meta, net.tag, ".csv")), report)

    return report


def cmd_sweep(config, dataset_path, model_path, k_values=None, out_dir=None):
    """
    Sweep the top-k beam-training rate curve on the test split; write the
    rate table and return its rows
    """
    out_dir = out_dir or config.output_dir
    k_values = sorted(set(k_values or config.eval.k_values))
    if k_values[0] < 1 or k_values[-1] > config.codebook.size:
        raise ConfigError("k values {} outside 1..{}".format(k_values, config.codebook.size))

    net, test_set, cb, links_of = _prepare(config, dataset_path, model_path)

    rows = rate_ratio_curve(net, test_set.samples, cb, k_values, links_of)
    write_rate_table(os.path.join(out_dir, _artifact_name("rates", test_set.meta, net.tag, ".csv")), rows)

    return rows
