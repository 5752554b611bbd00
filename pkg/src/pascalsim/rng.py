"""Seedable counter-based random streams for parallel-deterministic trials.

Every consumer derives its own substream from a root seed plus an integer
path, e.g. ``(axis_index, trial_id, stream_tag)``.  Substreams are backed by
the Philox counter-based generator, so a campaign's output depends only on
the scenario seed, never on worker count or evaluation order.

Complex circular Gaussians are produced by the polar Box-Muller transform
from Philox uniforms: amplitude sqrt(-v * ln U1), phase 2*pi*U2.
"""

from __future__ import annotations

import numpy as np

# Stream tags keep independent noise sources from aliasing within a trial.
STREAM_PILOT = 1
STREAM_DATA = 2
STREAM_ERRORS = 3
STREAM_SYMBOLS = 4


def substream(seed: int, *path: int) -> np.random.Generator:
    """Return a Generator for the substream identified by (seed, *path)."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))


def complex_normal(rng: np.random.Generator, variance: float, size) -> np.ndarray:
    """Circular complex Gaussian samples with E[|n|^2] = variance.

    Box-Muller in polar form: one log and one phase per complex sample,
    giving variance/2 per real dimension.
    """
    if variance == 0.0:
        return np.zeros(size, dtype=complex)
    u1 = rng.random(size)
    u2 = rng.random(size)
    # Guard against log(0); probability ~2^-53 but cheap to exclude.
    u1 = np.where(u1 == 0.0, np.finfo(float).tiny, u1)
    amp = np.sqrt(-variance * np.log(u1))
    return amp * np.exp(2j * np.pi * u2)
