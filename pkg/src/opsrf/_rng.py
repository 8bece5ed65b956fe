"""Seed-splitting scheme.

Every run is driven by a single 64-bit seed.  Each subsystem draws from
its own child stream so that, e.g., adding realizations to an estimator
does not perturb the ensembles a simulator produces.  Streams are
addressed by a fixed name -> id map plus an optional index (realization
number, cache slot, ...), so reruns are reproducible bit for bit.
"""

from __future__ import annotations

import numpy as np

STREAMS = {
    "polar_calibration": 0,
    "ensemble": 1,
    "gaussian": 2,
    "moving_average": 3,
    "estimate": 4,
    "verify": 5,
    "marginal": 6,
    "quantile_cache": 7,
    "probe": 8,
}


def rng_for(seed: int, stream: str, index: int | None = None) -> np.random.Generator:
    """Generator for a named substream of a master seed."""
    key = (STREAMS[stream],) if index is None else (STREAMS[stream], index)
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))
