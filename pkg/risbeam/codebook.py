#!/usr/bin/env python

"""
The RIS reflection codebook: unit-modulus beams steered at a grid that is
uniform in (sin azimuth, sin elevation).

Beams are numbered from 1, row-major over (azimuth, elevation): beam
q = i * n_el + j + 1 steers at azimuth point i and elevation point j.
"""

from dataclasses import dataclass

import numpy as np

from . import filesystem
from .channel import array_response
from .config import UpaGeometry


@dataclass(frozen=True)
class Codebook:
    # (M, |Q|), column q - 1 holds beam q
    matrix: np.ndarray
    azimuths: np.ndarray
    elevations: np.ndarray
    n_az: int
    n_el: int
    geometry: UpaGeometry

    @property
    def size(self):
        return self.matrix.shape[1]

    @property
    def num_elements(self):
        return self.matrix.shape[0]


def grid_sines(n):
    """
    Return n sine values uniformly covering [-1, 1], cell centres, so n = 1
    gives broadside
    """
    return -1.0 + (2.0 * np.arange(n) + 1.0) / n


def beam_index(i, j, n_el):
    return i * n_el + j + 1


def build_codebook(geom, n_az, n_el):
    """
    Return the codebook of n_az * n_el beams for a UPA
    """
    if n_az < 1 or n_el < 1:
        raise ValueError("codebook grid {}x{} is empty".format(n_az, n_el))

    azimuth_grid = np.arcsin(grid_sines(n_az))
    elevation_grid = np.arcsin(grid_sines(n_el))

    beams = []
    azimuths = []
    elevations = []
    for azimuth in azimuth_grid:
        for elevation in elevation_grid:
            beams.append(np.conj(array_response(geom, azimuth, elevation)))
            azimuths.append(azimuth)
            elevations.append(elevation)

    return Codebook(
        matrix=np.stack(beams, axis=1),
        azimuths=np.array(azimuths),
        elevations=np.array(elevations),
        n_az=n_az,
        n_el=n_el,
        geometry=geom,
    )


def beam(cb, q):
    """
    Return beam number q, 1 <= q <= |Q|
    """
    if not 1 <= q <= cb.size:
        raise IndexError("beam index {} outside 1..{}".format(q, cb.size))

    return cb.matrix[:, q - 1]


def save_codebook(filename, cb):
    # stored as (|Q|, M, 1) so it shares the channel container layout
    filesystem.write_complex_array(filename, cb.matrix.T[:, :, np.newaxis])


def load_codebook_matrix(filename):
    return filesystem.read_complex_array(filename)[:, :, 0].T
