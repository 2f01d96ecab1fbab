#  -*- coding: utf-8 -*-
"""Helper functions for humsearch."""

import struct

import numpy as np

from ._exceptions import FormatError

FORMAT_VERSION = 1


def as_rng(seed):
    """Turn a seed (or an existing generator) into a numpy Generator.

    Parameters
    ----------
    seed : Union[int, None, numpy.random.Generator]

    Returns
    -------
    numpy.random.Generator
    """

    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def pack_header(magic, fmt, *values):
    """Pack a little-endian header preceded by a 4-byte magic and version.

    Parameters
    ----------
    magic : bytes
    fmt : str
        ``struct`` format of the fields following the version byte, without
        byte order prefix
    values : Any

    Returns
    -------
    bytes
    """

    return magic + struct.pack("<B" + fmt, FORMAT_VERSION, *values)


def unpack_header(blob, magic, fmt, kind):
    """Validate magic and version and unpack the header fields.

    Parameters
    ----------
    blob : bytes
    magic : bytes
    fmt : str
    kind : str
        Human readable file kind used in error messages

    Returns
    -------
    tuple
        The unpacked fields
    int
        Offset of the first payload byte
    """

    size = len(magic) + struct.calcsize("<B" + fmt)
    if len(blob) < size:
        raise FormatError.default(kind, "truncated header")
    if blob[:len(magic)] != magic:
        raise FormatError.default(kind, "bad magic {m!r}"
                                  .format(m=blob[:len(magic)]))
    fields = struct.unpack("<B" + fmt, blob[len(magic):size])
    if fields[0] != FORMAT_VERSION:
        raise FormatError.default(kind, "unsupported version {v}"
                                  .format(v=fields[0]))
    return fields[1:], size


def read_array(blob, offset, dtype, count, kind):
    """Read ``count`` little-endian items of ``dtype`` starting at ``offset``.

    Returns
    -------
    numpy.ndarray
    int
        Offset after the array
    """

    dtype = np.dtype(dtype).newbyteorder("<")
    end = offset + dtype.itemsize * count
    if end > len(blob):
        raise FormatError.default(kind, "truncated payload")
    return np.frombuffer(blob, dtype=dtype, count=count,
                         offset=offset).copy(), end


def to_le_bytes(x, dtype):
    """Serialize an array as little-endian ``dtype`` bytes."""
    return np.ascontiguousarray(x, dtype=np.dtype(dtype).newbyteorder("<"))\
        .tobytes()


def mean_std(values):
    """Population mean and standard deviation of a sequence of numbers."""
    values = np.asarray(values, dtype=np.float64)
    return float(values.mean()), float(values.std())
