#!/usr/bin/env python

import os
import struct

import numpy as np

from .errors import ShapeMismatchError

DATASET_SUFFIX = ".dataset"

COMPLEX_MAGIC = b"RBCX"
COMPLEX_VERSION = 1
# magic, version, then dims M, N, K
COMPLEX_HEADER = struct.Struct("<4sIQQQ")


def get_file_contents(filename):
    """
    Return contents of a text file
    """
    with open(filename) as fd:
        return fd.read()


def write_file_contents(filename, contents):
    """
    Write a text file, creating its directory if needed
    """
    ensure_parent_directory(filename)
    with open(filename, "w", newline="\n") as fd:
        fd.write(contents)


def get_file_bytes(filename):
    """
    Return contents of a binary file
    """
    with open(filename, "rb") as fd:
        return fd.read()


def write_file_bytes(filename, contents):
    """
    Write a binary file, creating its directory if needed
    """
    ensure_parent_directory(filename)
    with open(filename, "wb") as fd:
        fd.write(contents)


def ensure_parent_directory(filename):
    directory = os.path.dirname(filename)
    if directory:
        os.makedirs(directory, exist_ok=True)


def is_dataset_file(filename):
    """
    Return whether a file is a risbeam dataset file or not
    """
    return filename.endswith(DATASET_SUFFIX)


def recursively_get_files_from_directory(directory):
    """
    Return all filenames recursively found in a directory
    """
    return [
        os.path.join(root, filename)
        for root, directories, filenames in os.walk(directory)
        for filename in filenames
    ]


def recursively_get_dataset_files_from_directory(directory):
    """
    Return all dataset filenames recursively found in a directory, sorted
    """
    return sorted(
        filename
        for filename in recursively_get_files_from_directory(directory)
        if is_dataset_file(filename)
    )


def dataset_paths(path):
    """
    Return the dataset files named by a path that is either a dataset file or
    a directory holding several of them
    """
    if os.path.isdir(path):
        return recursively_get_dataset_files_from_directory(path)
    return [path]


def encode_complex_array(array):
    """
    Return the binary container for a complex array of shape (K, M, N)
    """
    array = np.asarray(array, dtype=np.complex128)
    if array.ndim != 3:
        raise ShapeMismatchError("complex container holds (K, M, N) arrays, got shape {}".format(array.shape))

    k, m, n = array.shape
    header = COMPLEX_HEADER.pack(COMPLEX_MAGIC, COMPLEX_VERSION, m, n, k)
    # complex128 in little-endian memory order is interleaved (re, im) float64
    payload = np.ascontiguousarray(array).astype("<c16").tobytes()

    return header + payload


def decode_complex_array(contents):
    """
    Return the (K, M, N) complex array stored in a binary container
    """
    if len(contents) < COMPLEX_HEADER.size:
        raise ValueError("complex container truncated: {} bytes".format(len(contents)))

    magic, version, m, n, k = COMPLEX_HEADER.unpack_from(contents)
    if magic != COMPLEX_MAGIC:
        raise ValueError("not a complex container: magic {!r}".format(magic))
    if version != COMPLEX_VERSION:
        raise ValueError("unsupported complex container version {}".format(version))

    expected = COMPLEX_HEADER.size + 16 * m * n * k
    if len(contents) != expected:
        raise ValueError("complex container size {} does not match dims {}x{}x{}".format(len(contents), m, n, k))

    values = np.frombuffer(contents, dtype="<c16", offset=COMPLEX_HEADER.size)

    return values.astype(np.complex128).reshape(k, m, n)


def write_complex_array(filename, array):
    write_file_bytes(filename, encode_complex_array(array))


def read_complex_array(filename):
    return decode_complex_array(get_file_bytes(filename))
