"""Reproducible random-number streams.

Streams are keyed by (seed, *tags) so that independent purposes (document
shuffling, negative-label sampling, data generation, ...) never share a
generator. Tags may be ints or strings; strings are hashed with SHA-256,
so a stream's identity does not depend on Python's salted `hash()` and is
stable across processes and platforms.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _tag_code(tag: int | str) -> int:
    if isinstance(tag, bool):  # bool is an int subclass; be explicit
        return int(tag)
    if isinstance(tag, int):
        return tag & 0xFFFFFFFF
    digest = hashlib.sha256(str(tag).encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "little")


def stream(seed: int, *tags: int | str) -> np.random.Generator:
    """Return a Generator derived deterministically from seed and tags."""
    entropy = [seed & 0xFFFFFFFFFFFFFFFF] + [_tag_code(t) for t in tags]
    return np.random.default_rng(entropy)
