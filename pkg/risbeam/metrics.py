#!/usr/bin/env python

"""
Beam-set prediction metrics and the top-k beam-training rate curve.
"""

import csv
import io
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from . import filesystem
from .dataset import decode_label
from .errors import InsufficientDataError
from .rate import beam_rates, topk_rate_profile
from .setnet import predict

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.5


def threshold(scores, delta=DEFAULT_THRESHOLD):
    """
    Return the predicted beam set {q : t_q > delta}
    """
    return decode_label(scores, threshold=delta)


def precision_of(q_star, q_hat, empty_score=0.0):
    """
    Return |Q* & Q^| / |Q^|; an empty prediction scores 1 when Q* is empty
    too, empty_score otherwise
    """
    if not q_hat:
        return 1.0 if not q_star else empty_score
    return len(q_star & q_hat) / len(q_hat)


def recall_of(q_star, q_hat):
    if not q_star:
        raise ValueError("recall is undefined for an empty Q*")
    return len(q_star & q_hat) / len(q_star)


def accuracy(pairs, empty_score=0.0):
    """
    Return the per-sample precision averaged over (Q*, Q^) pairs
    """
    pairs = list(pairs)
    if not pairs:
        raise InsufficientDataError("accuracy needs at least one sample")
    return float(np.mean([precision_of(q_star, q_hat, empty_score) for q_star, q_hat in pairs]))


def recall(pairs):
    """
    Return the per-sample recall averaged over pairs with a non-empty Q*
    """
    values = [recall_of(q_star, q_hat) for q_star, q_hat in pairs if q_star]
    if not values:
        raise InsufficientDataError("recall needs at least one sample with a non-empty Q*")
    return float(np.mean(values))


@dataclass(frozen=True)
class SampleRecord:
    scene_id: int
    camera_id: int
    q_star: frozenset
    q_hat: frozenset
    precision: float
    recall: Optional[float]
    # best rate within Q^ for each candidate UE, when links are known
    ue_rates: Tuple[float, ...] = ()


@dataclass
class EvalReport:
    accuracy: float
    recall: float
    n_test: int
    records: List[SampleRecord] = field(default_factory=list)


def _best_rate_within(rates, beams):
    return max((float(rates[q - 1]) for q in beams), default=0.0)


def evaluate(net, samples, delta=DEFAULT_THRESHOLD, links_of=None, cb=None, empty_score=0.0):
    """
    Return the EvalReport of a network on samples. links_of(sample), when
    given together with the codebook, returns the candidate links of the
    sample so the records carry per-UE achieved rates.
    """
    samples = list(samples)
    if not samples:
        raise InsufficientDataError("evaluation needs at least one sample")

    scores = predict(net, np.stack([s.V for s in samples]))

    records = []
    for sample, t in zip(samples, scores):
        q_star = sample.beam_set
        q_hat = threshold(t, delta)

        ue_rates = ()
        if links_of is not None and cb is not None:
            ue_rates = tuple(_best_rate_within(beam_rates(link, cb), q_hat) for link in links_of(sample))

        records.append(SampleRecord(
            scene_id=sample.scene_id,
            camera_id=sample.camera_id,
            q_star=q_star,
            q_hat=q_hat,
            precision=precision_of(q_star, q_hat, empty_score),
            recall=recall_of(q_star, q_hat) if q_star else None,
            ue_rates=ue_rates,
        ))

    pairs = [(r.q_star, r.q_hat) for r in records]
    report = EvalReport(
        accuracy=accuracy(pairs, empty_score),
        recall=recall(pairs),
        n_test=len(records),
        records=records,
    )
    logger.info("accuracy %.4f, recall %.4f over %d samples", report.accuracy, report.recall, report.n_test)

    return report


@dataclass(frozen=True)
class RateRatioRow:
    k: int
    # share of the codebook swept
    overhead: float
    ratio: float
    mean_rate: float
    exhaustive_rate: float


def rate_ratio_curve(scores_of, samples, cb, k_values, links_of):
    """
    Return one RateRatioRow per k, ascending: the rate reached by sweeping
    the k best-scored beams relative to exhaustive search, averaged over the
    UEs of a sample and then over samples.

    scores_of is a network or a callable mapping a sample to |Q| scores.
    """
    k_values = sorted(set(int(k) for k in k_values))
    if not k_values or k_values[0] < 1 or k_values[-1] > cb.size:
        raise ValueError("k values {} outside 1..{}".format(k_values, cb.size))
    if hasattr(scores_of, "forward"):
        net = scores_of
        scores_of = lambda sample: net.forward(sample.V)  # noqa: E731

    index = np.array(k_values) - 1
    ratios, achieved, exhaustive = [], [], []
    for sample in samples:
        links = list(links_of(sample))
        if not links:
            continue

        scores = np.asarray(scores_of(sample), dtype=float)
        ue_ratios, ue_achieved, ue_exhaustive = [], [], []
        for link in links:
            rates = beam_rates(link, cb)
            best = float(np.max(rates))
            if best <= 0.0:
                continue
            profile = topk_rate_profile(scores, rates)[index]
            ue_ratios.append(profile / best)
            ue_achieved.append(profile)
            ue_exhaustive.append(best)

        if ue_ratios:
            ratios.append(np.mean(ue_ratios, axis=0))
            achieved.append(np.mean(ue_achieved, axis=0))
            exhaustive.append(np.mean(ue_exhaustive))

    if not ratios:
        raise InsufficientDataError("no sample has a candidate UE to evaluate")
    logger.info("rate curve over %d samples", len(ratios))

    mean_ratio = np.mean(ratios, axis=0)
    mean_achieved = np.mean(achieved, axis=0)
    mean_exhaustive = float(np.mean(exhaustive))
    return [
        RateRatioRow(
            k=k,
            overhead=k / cb.size,
            ratio=float(mean_ratio[n]),
            mean_rate=float(mean_achieved[n]),
            exhaustive_rate=mean_exhaustive,
        )
        for n, k in enumerate(k_values)
    ]


def format_beams(beams):
    return " ".join(str(q) for q in sorted(beams))


def _table(header, rows):
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def report_table(report):
    return _table(["accuracy", "recall", "n_test"], [[repr(report.accuracy), repr(report.recall), report.n_test]])


def sample_table(report):
    return _table(
        ["scene_id", "camera_id", "q_star", "q_hat", "precision", "recall", "ue_rates"],
        [
            [
                r.scene_id,
                r.camera_id,
                format_beams(r.q_star),
                format_beams(r.q_hat),
                repr(r.precision),
                "" if r.recall is None else repr(r.recall),
                " ".join(repr(rate) for rate in r.ue_rates),
            ]
            for r in report.records
        ],
    )


def rate_table(rows):
    return _table(
        ["k", "overhead", "ratio", "mean_rate", "exhaustive_rate"],
        [[r.k, repr(r.overhead), repr(r.ratio), repr(r.mean_rate), repr(r.exhaustive_rate)] for r in rows],
    )


def learning_curve_table(curves):
    return _table(
        ["epoch", "train_loss", "test_loss"],
        [[epoch, repr(train), repr(test)] for epoch, train, test in curves.rows()],
    )


def write_report_table(filename, report):
    filesystem.write_file_contents(filename, report_table(report))


def write_sample_table(filename, report):
    filesystem.write_file_contents(filename, sample_table(report))


def write_rate_table(filename, rows):
    filesystem.write_file_contents(filename, rate_table(rows))


def write_learning_curve(filename, curves):
    filesystem.write_file_contents(filename, learning_curve_table(curves))
