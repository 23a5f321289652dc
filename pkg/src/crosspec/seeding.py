"""Named substreams derived from a single root seed.

Every stochastic stage (model draws, source selection, noise, solver init)
pulls its generator from here, so any stage can be re-run in isolation and
still reproduce the full-pipeline result.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key(part) -> int:
    # crc32 keeps string keys stable across processes (unlike hash()).
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    return int(part) & 0xFFFFFFFF


def substream(root_seed: int, *parts) -> np.random.Generator:
    """Generator for the substream named by ``parts`` (strings or ints)."""
    seq = np.random.SeedSequence(entropy=int(root_seed), spawn_key=tuple(_key(p) for p in parts))
    return np.random.default_rng(seq)


def derived_seed(root_seed: int, *parts) -> int:
    """A plain integer seed for APIs that take one, same derivation rule."""
    seq = np.random.SeedSequence(entropy=int(root_seed), spawn_key=tuple(_key(p) for p in parts))
    return int(seq.generate_state(1, dtype=np.uint64)[0])
