"""Small input-validation helpers shared across the package."""

from __future__ import annotations

import numpy as np


def as_rng(seed) -> np.random.Generator:
    """Coerce ``seed`` (int, SeedSequence, Generator, or None) to a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def substream(master_seed: int, stream: str) -> np.random.SeedSequence:
    """Derive a named, reproducible random sub-stream from one master seed."""
    index = _STREAMS.get(stream)
    if index is None:
        raise ValueError(f"unknown random sub-stream {stream!r}")
    return np.random.SeedSequence((int(master_seed), index))


_STREAMS = {"partition": 0, "design": 1, "simulate": 2}


def check_probability(name: str, value) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0 or np.isnan(value):
        raise ValueError(f"{name} must be in [0, 1], got {value!r}")
    return value


def check_positive_int(name: str, value, minimum: int = 1) -> int:
    if int(value) != value or value < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)
