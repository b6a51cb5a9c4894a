#!/usr/bin/env python

"""
Achievable rate, the exhaustive-search beam oracle and top-k beam training.

Beam indices are 1-based throughout; ties always go to the lowest index.
"""

import dataclasses
import logging
from dataclasses import dataclass
from typing import FrozenSet

import numpy as np

from . import seeding
from .channel import FreqChannel, bs_beam, bs_ris_channel, ue_ris_channel
from .config import UpaGeometry
from .errors import ShapeMismatchError
from .scene import los_visible, visible_ues

logger = logging.getLogger(__name__)

BeamSet = FrozenSet[int]


@dataclass(frozen=True)
class LinkChannels:
    # (K, M, 1) RIS <-> UE
    h_r: FreqChannel
    # (K, M, N) BS -> RIS
    h_t: FreqChannel
    # (N,) unit-norm BS beam
    f: np.ndarray
    snr: float


@dataclass(frozen=True)
class CandidateLink:
    ue: object
    bbox: object
    link: LinkChannels


def cascade(link):
    """
    Return g_k = h_R,k * (H_T,k f) for every subcarrier, shape (K, M), so
    that g_k^T psi = h_R,k^T diag(psi) H_T,k f
    """
    h_r = link.h_r.values
    h_t = link.h_t.values
    f = np.asarray(link.f)

    if h_r.ndim != 3 or h_r.shape[2] != 1:
        raise ShapeMismatchError("h_R must have shape (K, M, 1), got {}".format(h_r.shape))
    if h_t.ndim != 3 or h_t.shape[:2] != h_r.shape[:2]:
        raise ShapeMismatchError("H_T shape {} does not match h_R shape {}".format(h_t.shape, h_r.shape))
    if f.shape != (h_t.shape[2],):
        raise ShapeMismatchError("BS beam shape {} does not match H_T shape {}".format(f.shape, h_t.shape))

    return h_r[:, :, 0] * (h_t @ f)


def _rates_from_gains(gains, snr):
    return np.mean(np.log2(1.0 + snr * gains), axis=0)


def achievable_rate(link, psi):
    """
    Return the achievable rate of one RIS beam in bits/s/Hz
    """
    gains = np.abs(cascade(link) @ np.asarray(psi)) ** 2

    return float(_rates_from_gains(gains, link.snr))


def beam_rates(link, cb):
    """
    Return the achievable rate of every codebook beam, shape (|Q|,)
    """
    gains = np.abs(cascade(link) @ cb.matrix) ** 2

    return _rates_from_gains(gains, link.snr)


def best_beam(link, cb):
    """
    Return q*, the beam maximising the rate over the whole codebook
    """
    return int(np.argmax(beam_rates(link, cb))) + 1


def topk_beams(scores, k):
    """
    Return the k beams with the highest scores, best first, ties by index
    """
    scores = np.asarray(scores, dtype=float)
    if not 1 <= k <= scores.shape[0]:
        raise ValueError("k = {} outside 1..{}".format(k, scores.shape[0]))

    return np.argsort(-scores, kind="stable")[:k] + 1


def topk_trained_rate(scores, k, link, cb):
    """
    Return the best rate found by sweeping the sub-codebook of the k beams
    with the highest scores
    """
    rates = beam_rates(link, cb)
    return float(np.max(rates[topk_beams(scores, k) - 1]))


def topk_rate_profile(scores, rates):
    """
    Return, for every k = 1..|Q|, the best rate among the top-k scored beams
    """
    order = np.argsort(-np.asarray(scores, dtype=float), kind="stable")
    return np.maximum.accumulate(np.asarray(rates)[order])


def with_receive_snr(link, cb, snr_db):
    """
    Return the link with its SNR rescaled so the exhaustive-search beam sees
    the given mean receive SNR
    """
    g = cascade(link)
    psi = cb.matrix[:, best_beam(link, cb) - 1]
    gain = float(np.mean(np.abs(g @ psi) ** 2))
    if gain == 0.0:
        return link

    return dataclasses.replace(link, snr=10.0 ** (snr_db / 10.0) / gain)


def shared_bs_channel(scene, geom, bs_geom, radio, master_seed):
    """
    Return H_T for a scenario; the BS and RIS are static so every scene
    shares it
    """
    rng = seeding.substream(master_seed, "channel", seeding.BS_LINK_KEY)
    return bs_ris_channel(scene, geom, bs_geom, radio, rng)


def candidate_links(scene, camera, cb, radio, bs_geom=None, h_t=None):
    """
    Return the candidate UEs of a camera with their links: UEs the camera
    sees whose direct link to the BS is blocked
    """
    bs_geom = bs_geom or UpaGeometry(cols=1, rows=1)
    if h_t is None:
        h_t = shared_bs_channel(scene, cb.geometry, bs_geom, radio, scene.scene_seed)
    f = bs_beam(bs_geom)

    result = []
    for ue, bbox in visible_ues(scene, camera):
        if los_visible(scene, scene.bs_position, ue.position):
            continue

        rng = seeding.substream(scene.scene_seed, "channel", ue.ue_id)
        h_r = ue_ris_channel(scene, ue, cb.geometry, radio, rng)
        link = LinkChannels(h_r=h_r, h_t=h_t, f=f, snr=radio.snr)
        if not np.any(cascade(link)):
            logger.debug("scene %d ue %d has no path through the RIS", scene.scene_index, ue.ue_id)
            continue

        if radio.receive_snr_db is not None:
            link = with_receive_snr(link, cb, radio.receive_snr_db)

        result.append(CandidateLink(ue=ue, bbox=bbox, link=link))

    return result


def scene_beam_set(scene, camera, cb, radio, bs_geom=None, h_t=None) -> BeamSet:
    """
    Return Q*_X, the set of optimal beams of the camera's candidate UEs
    """
    return frozenset(
        best_beam(candidate.link, cb)
        for candidate in candidate_links(scene, camera, cb, radio, bs_geom=bs_geom, h_t=h_t)
    )
