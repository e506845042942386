"""Named random substreams derived from a single master seed.

Every randomized stage of the pipeline draws from its own named substream so
that adding or removing draws in one stage never perturbs the sequences seen
by any other stage.
"""

import zlib

import numpy as np


def substream(seed, name):
    """Return an independent ``numpy.random.Generator`` for ``name``.

    The same (seed, name) pair always yields the same stream; distinct names
    yield statistically independent streams.
    """
    key = zlib.crc32(name.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(key,)))


def child_seed(rng):
    """Draw a fresh integer seed from ``rng`` for a stage with its own seed field."""
    return int(rng.integers(0, 2**31 - 1))
