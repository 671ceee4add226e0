"""Deterministic random streams derived from a single master seed.

Every stochastic component (corpus shuffling, parameter init, word dropout,
Gumbel noise, reparameterization noise, batch order, evaluation pair order,
synthetic data) pulls from its own named substream so that changing how one
component consumes randomness never perturbs the others.
"""

from __future__ import annotations

import hashlib

import numpy as np

# Canonical substream names used across the package.
STREAMS = (
    "corpus",
    "init",
    "memory_init",
    "dropout",
    "gumbel",
    "reparam",
    "shuffle",
    "eval_order",
    "baseline",
    "synth",
)


def _stream_key(name: str) -> int:
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def substream(seed: int, name: str) -> np.random.Generator:
    """Return an independent generator for (seed, name).

    The same pair always yields the same stream; distinct names yield
    statistically independent streams under the same master seed.
    """
    seq = np.random.SeedSequence(entropy=seed, spawn_key=(_stream_key(name),))
    return np.random.Generator(np.random.PCG64(seq))
