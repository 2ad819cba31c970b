"""Seedable, splittable random streams.

Every stochastic operation in the package draws from an explicitly passed
``numpy.random.Generator``.  ``RandomStreams`` derives independent named
streams from one master seed so that e.g. weight initialization and dropout
never share state; runs with the same seed are bit-reproducible.
"""

from __future__ import annotations

import numpy as np

# Fixed spawn order; changing it would silently change every seeded run.
_STREAM_NAMES = ("init", "shuffle", "dropout", "augment", "data")


def rng_from_seed(seed: int) -> np.random.Generator:
    """One standalone generator for the given seed."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def split(rng_or_seedseq, n: int) -> list[np.random.Generator]:
    """Split into ``n`` independent child generators."""
    if isinstance(rng_or_seedseq, np.random.SeedSequence):
        seq = rng_or_seedseq
    else:
        seq = rng_or_seedseq.bit_generator.seed_seq
    return [np.random.Generator(np.random.PCG64(s)) for s in seq.spawn(n)]


class RandomStreams:
    """Named independent generators derived from one seed."""

    init: np.random.Generator
    shuffle: np.random.Generator
    dropout: np.random.Generator
    augment: np.random.Generator
    data: np.random.Generator

    def __init__(self, seed: int):
        self.seed = int(seed)
        children = np.random.SeedSequence(self.seed).spawn(len(_STREAM_NAMES))
        for name, seq in zip(_STREAM_NAMES, children):
            setattr(self, name, np.random.Generator(np.random.PCG64(seq)))

    def __repr__(self) -> str:  # pragma: no cover
        return f"RandomStreams(seed={self.seed})"
