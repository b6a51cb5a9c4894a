#!/usr/bin/env python

from __future__ import print_function

import argparse
import json
import logging
import sys

import numpy as np

from . import config as run_config
from . import pipeline
from .errors import RisbeamError
from .setnet import VARIANTS

logger = logging.getLogger("risbeam")


class ArtifactEncoder(json.JSONEncoder):
    def default(self, obj):
        if isinstance(obj, (set, frozenset)):
            return sorted(obj)
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        if isinstance(obj, np.generic):
            return obj.item()
        return json.JSONEncoder.default(self, obj)


def percentage(part, whole=1.0):
    if not whole:
        return 0.0

    return 100.0 * float(part) / float(whole)


def leftpad_print(s, leftpad_length=0):
    print(" " * leftpad_length + s)


def print_manifest(manifest):
    leftpad_print("Scenes: {}".format(manifest["num_scenes"]), leftpad_length=0)
    for filename, count, dropped in zip(manifest["datasets"], manifest["samples"], manifest["dropped_empty"]):
        leftpad_print("Dataset: {} {} samples ({} empty dropped)".format(filename, count, dropped), leftpad_length=2)
    leftpad_print("Config hash: {}".format(manifest["config_hash"]), leftpad_length=2)


def print_training(results):
    for result in results:
        leftpad_print("Dataset: {}".format(result.dataset), leftpad_length=0)
        leftpad_print("Model: {}".format(result.checkpoint), leftpad_length=2)
        leftpad_print("Final train loss: {:.6f}".format(result.curves.train_loss[-1]), leftpad_length=2)
        leftpad_print("Final test loss: {:.6f}".format(result.curves.test_loss[-1]), leftpad_length=2)


def print_report(report, verbose=False):
    leftpad_print("Test samples: {}".format(report.n_test), leftpad_length=0)
    leftpad_print("Accuracy: {:.2f}%".format(percentage(report.accuracy)), leftpad_length=2)
    leftpad_print("Recall: {:.2f}%".format(percentage(report.recall)), leftpad_length=2)

    if verbose:
        for record in report.records:
            leftpad_print("Scene {}: Q* {} Q^ {}".format(
                record.scene_id,
                sorted(record.q_star),
                sorted(record.q_hat),
            ), leftpad_length=4)


def print_rates(rows):
    for row in rows:
        leftpad_print("k={} ({:.2f}% of beams): {:.2f}% of exhaustive search ({:.4f} / {:.4f} bits/s/Hz)".format(
            row.k,
            percentage(row.overhead),
            percentage(row.ratio),
            row.mean_rate,
            row.exhaustive_rate,
        ), leftpad_length=0)


def parse_args(argv=None):
    p = argparse.ArgumentParser(description='''
        Camera-aided RIS beam-set prediction: generate datasets, train
        set networks, evaluate them and sweep top-k beam training.
        ''', formatter_class=argparse.RawTextHelpFormatter)

    output_group = p.add_mutually_exclusive_group()
    output_group.add_argument(
        '-v',
        '--verbose',
        action='store_true',
        help='print more verbose output'
    )
    output_group.add_argument(
        '-x',
        '--debug',
        action='store_true',
        help='print debugging output'
    )

    def seed(value):
        error_message = 'invalid seed {!r} please specify an integer between 0 and 2**64 - 1'.format(value)
        try:
            int_value = int(value)
        except ValueError:
            raise argparse.ArgumentTypeError(error_message)

        if not 0 <= int_value < 2 ** 64:
            raise argparse.ArgumentTypeError(error_message)

        return int_value

    def beam_count(value):
        error_message = 'invalid k {!r} please specify a positive integer'.format(value)
        try:
            int_value = int(value)
        except ValueError:
            raise argparse.ArgumentTypeError(error_message)

        if int_value < 1:
            raise argparse.ArgumentTypeError(error_message)

        return int_value

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        '--config',
        action='store',
        required=True,
        help='JSON run configuration'
    )
    common.add_argument(
        '--seed',
        action='store',
        type=seed,
        default=None,
        help='override the master seed of the configuration'
    )
    common.add_argument(
        '--out',
        action='store',
        default=None,
        help='output directory (default: output_dir of the configuration)'
    )

    commands = p.add_subparsers(dest='command', required=True)

    commands.add_parser('gen', parents=[common], help='generate one dataset file per camera')

    train = commands.add_parser('train', parents=[common], help='train one model per dataset file')
    train.add_argument(
        '--dataset',
        action='store',
        required=True,
        help='dataset file, or directory of dataset files'
    )
    train.add_argument(
        '--variant',
        action='store',
        default=None,
        help='network variant: {} (default: from the configuration)'.format(', '.join(sorted(VARIANTS)))
    )

    for name, help_text in (('eval', 'report accuracy and recall'), ('sweep', 'report the top-k rate curve')):
        command = commands.add_parser(name, parents=[common], help=help_text)
        command.add_argument(
            '--dataset',
            action='store',
            required=True,
            help='dataset file'
        )
        command.add_argument(
            '--model',
            action='store',
            required=True,
            help='model checkpoint'
        )

    commands.choices['sweep'].add_argument(
        '--k',
        action='store',
        nargs='+',
        type=beam_count,
        default=None,
        help='candidate beam set sizes (default: from the configuration)'
    )

    args = p.parse_args(argv)

    return args


def configure_logging(args):
    level = logging.WARNING
    if args.debug:
        level = logging.DEBUG
    elif args.verbose:
        level = logging.INFO

    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def run(args):
    config = run_config.load_run_config(args.config, seed=args.seed)

    if args.command == 'gen':
        manifest = pipeline.cmd_gen(config, args.out, progress=args.verbose or args.debug)
        if args.debug:
            print(json.dumps(manifest, cls=ArtifactEncoder, indent=4, separators=(',', ': ')))
        else:
            print_manifest(manifest)
    elif args.command == 'train':
        print_training(pipeline.cmd_train(config, args.dataset, args.variant, args.out))
    elif args.command == 'eval':
        print_report(pipeline.cmd_eval(config, args.dataset, args.model, args.out), args.verbose)
    elif args.command == 'sweep':
        print_rates(pipeline.cmd_sweep(config, args.dataset, args.model, args.k, args.out))


def main(argv=None):
    args = parse_args(argv)
    configure_logging(args)

    try:
        run(args)
    except (RisbeamError, OSError) as e:
        logger.error("%s", e)
        return 1

    return 0


if __name__ == "__main__":
    sys.exit(main())
