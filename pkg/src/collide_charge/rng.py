"""Reproducible random-number streams.

All stochastic code in the package draws from counter-based Philox
generators derived from a 64-bit master seed plus an integer stream path,
e.g. ``rng_for(seed, run_index)`` or ``rng_for(seed, run_index, shell)``.
Streams with different paths are statistically independent, so ensembles
can be sampled in any order (or in parallel) and still reproduce bit for
bit.
"""

import numpy as np

__all__ = ["rng_for"]


def rng_for(master_seed: int, *stream: int) -> np.random.Generator:
    """Return the generator for a named substream of ``master_seed``.

    ``stream`` components must be non-negative integers; the same
    ``(master_seed, *stream)`` tuple always yields an identical stream.
    """
    if master_seed < 0:
        raise ValueError("master_seed must be non-negative")
    if any(int(s) < 0 for s in stream):
        raise ValueError("stream indices must be non-negative")
    seq = np.random.SeedSequence(entropy=int(master_seed),
                                 spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(seq))
