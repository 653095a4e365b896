"""Deterministic RNG derivation.

Every random draw in the toolkit flows from one root seed through
``derive_rng(seed, domain, *path)``. Streams are independent per (domain,
path), reconstructible without consuming earlier streams (so resumed training
reproduces an uninterrupted run), and stable across processes.
"""
from __future__ import annotations

import numpy as np

DOMAIN_INIT = 1      # parameter initialization
DOMAIN_EPOCH = 2     # per-epoch shuffling and dropout
DOMAIN_FOLD = 3      # per-fold model seeds
DOMAIN_ATLAS = 4     # synthetic atlas construction
DOMAIN_SUBJECT = 5   # synthetic subject signals
DOMAIN_MOTION = 6    # synthetic motion traces
DOMAIN_VERIFY = 7    # verification-suite instances


def derive_rng(seed: int, *path: int) -> np.random.Generator:
    entropy = (int(seed),) + tuple(int(p) for p in path)
    return np.random.default_rng(np.random.SeedSequence(entropy))
