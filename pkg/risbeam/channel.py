#!/usr/bin/env python

"""
Wideband geometric channels between the BS, the RIS and the UEs.

A link is a list of path clusters, each one ray with a complex gain, a delay
and angles. Clusters become delay taps through the pulse shape, and taps
become per-subcarrier channels through a K-point DFT. Every channel is kept
as an array of shape (taps or subcarriers, M, N): M RIS elements, N BS
antennas (N = 1 for the single-antenna UE side).
"""

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import filesystem
from .config import SPEED_OF_LIGHT
from .scene import local_direction, los_visible, pose_basis

logger = logging.getLogger(__name__)

# scatter points sit this far off the face they were drawn on
SURFACE_OFFSET = 0.01

_FACE_NORMALS = (
    (0, -1.0), (0, 1.0),
    (1, -1.0), (1, 1.0),
    (2, -1.0), (2, 1.0),
)


@dataclass(frozen=True)
class PathCluster:
    alpha: complex
    tau: float
    # arrival at the RIS
    azimuth: float
    elevation: float
    # departure at the transmitter, relative to its boresight toward the RIS
    departure_azimuth: float = 0.0
    departure_elevation: float = 0.0


@dataclass(frozen=True)
class DelayChannel:
    taps: np.ndarray

    @property
    def num_taps(self):
        return self.taps.shape[0]


@dataclass(frozen=True)
class FreqChannel:
    values: np.ndarray

    @property
    def num_subcarriers(self):
        return self.values.shape[0]

    @property
    def vectors(self):
        """
        Per-subcarrier vectors of a single-antenna link, shape (K, M)
        """
        return self.values[:, :, 0]


def steering_vector(geom, u, v):
    """
    Return the UPA response for direction cosines u = sin(az)cos(el) along
    the columns and v = sin(el) along the rows
    """
    cols = np.arange(geom.cols)
    rows = np.arange(geom.rows)
    phase = 2.0 * np.pi * geom.spacing * (cols[np.newaxis, :] * u + rows[:, np.newaxis] * v)

    return np.exp(1j * phase).reshape(-1)


def array_response(geom, azimuth, elevation):
    """
    Return the UPA array response a(azimuth, elevation), length cols * rows,
    column index fastest
    """
    if abs(elevation) > np.pi / 2 + 1e-12:
        raise ValueError("elevation {} outside [-pi/2, pi/2]".format(elevation))

    return steering_vector(
        geom,
        math.sin(azimuth) * math.cos(elevation),
        math.sin(elevation),
    )


def angles_in_frame(basis, vector):
    """
    Return (azimuth, elevation) of a world vector in a right/forward/up frame
    """
    right, forward, up = local_direction(basis, vector)
    norm = math.sqrt(right * right + forward * forward + up * up)
    elevation = math.asin(max(-1.0, min(1.0, up / norm)))
    azimuth = math.atan2(right, forward)

    return azimuth, elevation


def ris_angles(pose, point):
    """
    Return the (azimuth, elevation) under which the RIS sees a point
    """
    basis = pose_basis(pose.yaw, pose.pitch)
    return angles_in_frame(basis, np.asarray(point, dtype=float) - np.asarray(pose.position, dtype=float))


def boresight_basis(tx, rx):
    """
    Return the frame of an array at tx whose boresight points at rx
    """
    delta = np.asarray(rx, dtype=float) - np.asarray(tx, dtype=float)
    yaw = math.atan2(delta[1], delta[0])
    pitch = math.asin(max(-1.0, min(1.0, delta[2] / np.linalg.norm(delta))))

    return pose_basis(yaw, pitch)


def free_space_gain(distance, wavelength):
    """
    Return the complex free-space amplitude over a propagation distance
    """
    return (wavelength / (4.0 * np.pi * distance)) * np.exp(-2j * np.pi * distance / wavelength)


def bounce_path(scene, tx, rx, point, radio, phase=0.0):
    """
    Return the single-bounce path tx -> point -> rx
    """
    tx, rx, point = (np.asarray(p, dtype=float) for p in (tx, rx, point))
    d1 = float(np.linalg.norm(point - tx))
    d2 = float(np.linalg.norm(rx - point))
    reflection = 10.0 ** (-radio.reflection_loss_db / 20.0)

    azimuth, elevation = ris_angles(scene.ris, point)
    departure_azimuth, departure_elevation = angles_in_frame(boresight_basis(tx, rx), point - tx)

    return PathCluster(
        alpha=complex(reflection * free_space_gain(d1 + d2, radio.wavelength) * np.exp(1j * phase)),
        tau=(d1 + d2) / SPEED_OF_LIGHT,
        azimuth=azimuth,
        elevation=elevation,
        departure_azimuth=departure_azimuth,
        departure_elevation=departure_elevation,
    )


def _random_face_point(blocker, rng):
    lower = np.asarray(blocker.lower, dtype=float)
    upper = np.asarray(blocker.upper, dtype=float)
    axis, sign = _FACE_NORMALS[int(rng.integers(len(_FACE_NORMALS)))]

    point = rng.uniform(lower, upper)
    point[axis] = (upper[axis] if sign > 0 else lower[axis]) + sign * SURFACE_OFFSET
    normal = np.zeros(3)
    normal[axis] = sign

    return point, normal


def synth_paths(scene, tx, rx, radio, rng):
    """
    Return the path clusters from tx to the RIS at rx: the line-of-sight ray
    when it is not blocked, plus up to max_paths - 1 single-bounce rays off
    blocker faces
    """
    tx = np.asarray(tx, dtype=float)
    rx = np.asarray(rx, dtype=float)
    if np.array_equal(tx, rx):
        raise ValueError("path synthesis needs distinct endpoints")

    paths = []
    if los_visible(scene, tx, rx):
        distance = float(np.linalg.norm(tx - rx))
        azimuth, elevation = ris_angles(scene.ris, tx)
        paths.append(PathCluster(
            alpha=complex(free_space_gain(distance, radio.wavelength)),
            tau=distance / SPEED_OF_LIGHT,
            azimuth=azimuth,
            elevation=elevation,
        ))

    scatter_count = int(rng.integers(0, radio.max_paths))
    ris_forward = pose_basis(scene.ris.yaw, scene.ris.pitch)[1]
    for _ in range(scatter_count):
        if not scene.blockers:
            break
        blocker = scene.blockers[int(rng.integers(len(scene.blockers)))]
        point, normal = _random_face_point(blocker, rng)
        phase = rng.uniform(0.0, 2.0 * np.pi)

        if (tx - point) @ normal <= 0.0 or (rx - point) @ normal <= 0.0:
            continue
        if (point - rx) @ ris_forward <= 0.0:
            continue
        if not (los_visible(scene, tx, point) and los_visible(scene, point, rx)):
            continue

        paths.append(bounce_path(scene, tx, rx, point, radio, phase=phase))

    logger.debug("synthesised %d path(s) between %s and %s", len(paths), tx, rx)

    return paths


def pulse_shape(t, radio):
    """
    Return the pulse p(t) for Ts-spaced signalling, exact at integer
    multiples of Ts for the sinc pulse
    """
    x = np.asarray(t, dtype=float) / radio.sample_period
    # snap rounding noise from t / Ts onto the integer grid
    x = np.where(np.abs(x - np.round(x)) < 1e-9, np.round(x), x)
    values = np.sinc(x)
    integer = (x == np.round(x)) & (x != 0.0)
    values = np.where(integer, 0.0, values)

    if radio.pulse == "raised_cosine":
        beta = radio.rolloff
        denominator = 1.0 - (2.0 * beta * x) ** 2
        singular = np.isclose(denominator, 0.0)
        safe = np.where(singular, 1.0, denominator)
        shaped = values * np.cos(np.pi * beta * x) / safe
        values = np.where(singular, (np.pi / 4.0) * np.sinc(1.0 / (2.0 * beta)), shaped)

    return values


def delay_channel(paths, geom, radio, tx_geom=None):
    """
    Return the delay-domain channel of a list of paths, taps of shape
    (D, M, N) with N the transmit array size (1 without tx_geom)
    """
    n = tx_geom.size if tx_geom is not None else 1
    taps = np.zeros((radio.num_taps, geom.size, n), dtype=np.complex128)
    if not paths:
        return DelayChannel(taps=taps)

    span = radio.num_taps * radio.sample_period
    latest = max(path.tau for path in paths)
    if latest >= span:
        warnings.warn(
            "path delay {:.3e} s exceeds the tap span {:.3e} s; taps truncated".format(latest, span),
            RuntimeWarning,
        )
        logger.debug("tap span %.3e s shorter than path delay %.3e s", span, latest)

    scale = math.sqrt(geom.size / radio.pathloss)
    delays = np.arange(radio.num_taps) * radio.sample_period
    for path in paths:
        pulse = pulse_shape(delays - path.tau, radio)
        receive = array_response(geom, path.azimuth, path.elevation)
        if tx_geom is not None:
            transmit = array_response(tx_geom, path.departure_azimuth, path.departure_elevation)
        else:
            transmit = np.ones(1, dtype=np.complex128)
        taps += scale * path.alpha * pulse[:, np.newaxis, np.newaxis] * np.outer(receive, transmit)[np.newaxis]

    return DelayChannel(taps=taps)


def freq_channel(dc, num_subcarriers):
    """
    Return the per-subcarrier channel h_k = sum_d h_d exp(-j 2 pi k d / K)
    """
    if num_subcarriers < 1:
        raise ValueError("need at least one subcarrier")

    taps = dc.taps
    folded = np.zeros((num_subcarriers,) + taps.shape[1:], dtype=np.complex128)
    # exp(-j 2 pi k d / K) only depends on d modulo K
    for d in range(taps.shape[0]):
        folded[d % num_subcarriers] += taps[d]

    return FreqChannel(values=np.fft.fft(folded, axis=0))


def freq_channel_direct(dc, num_subcarriers):
    """
    Return the per-subcarrier channel by evaluating the DFT sum term by term
    """
    taps = dc.taps
    d = np.arange(taps.shape[0])
    values = np.zeros((num_subcarriers,) + taps.shape[1:], dtype=np.complex128)
    for k in range(num_subcarriers):
        weights = np.exp(-2j * np.pi * k * d / num_subcarriers)
        values[k] = np.tensordot(weights, taps, axes=(0, 0))

    return FreqChannel(values=values)


def bs_beam(bs_geom):
    """
    Return the BS beam: the normalised conjugate steering vector toward the
    RIS, which is the BS boresight
    """
    return np.conj(array_response(bs_geom, 0.0, 0.0)) / math.sqrt(bs_geom.size)


def bs_ris_channel(scene, geom, bs_geom, radio, rng):
    """
    Return H_T, the BS -> RIS frequency channel of shape (K, M, N)
    """
    paths = synth_paths(scene, scene.bs_position, scene.ris.position, radio, rng)
    return freq_channel(delay_channel(paths, geom, radio, tx_geom=bs_geom), radio.num_subcarriers)


def ue_ris_channel(scene, ue, geom, radio, rng):
    """
    Return h_R, the UE <-> RIS frequency channel of shape (K, M, 1)
    """
    paths = synth_paths(scene, ue.position, scene.ris.position, radio, rng)
    return freq_channel(delay_channel(paths, geom, radio), radio.num_subcarriers)


def save_freq_channel(filename, channel):
    filesystem.write_complex_array(filename, channel.values)


def load_freq_channel(filename):
    return FreqChannel(values=filesystem.read_complex_array(filename))
