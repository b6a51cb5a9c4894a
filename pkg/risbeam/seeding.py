#!/usr/bin/env python

"""
Named random sub-streams.

Every consumer of randomness asks for its own generator keyed by the master
seed, a stream name and integer keys (scene index, UE id, camera id...), so
any stage can be regenerated in isolation and in any order.
"""

import numpy as np

STREAMS = {
    "scene": 1,
    "channel": 2,
    "detector": 3,
    "init": 4,
    "shuffle": 5,
    "split": 6,
}

# key used for the single BS-RIS link inside the "channel" stream
BS_LINK_KEY = 2 ** 32 - 1


def seed_sequence(master_seed, stream, *keys):
    if stream not in STREAMS:
        raise KeyError("unknown random stream {!r}".format(stream))
    return np.random.SeedSequence([int(master_seed), STREAMS[stream]] + [int(k) for k in keys])


def substream(master_seed, stream, *keys):
    """
    Return an independent generator for (master_seed, stream, keys)
    """
    return np.random.Generator(np.random.PCG64(seed_sequence(master_seed, stream, *keys)))


def derived_seed(master_seed, stream, *keys):
    """
    Return a 64-bit integer seed derived from (master_seed, stream, keys)
    """
    low, high = seed_sequence(master_seed, stream, *keys).generate_state(2, dtype=np.uint32)
    return (int(high) << 32) | int(low)
