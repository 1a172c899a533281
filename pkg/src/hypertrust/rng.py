"""Seeded random streams.

All randomness goes through numpy's Philox-4x64 counter-based generator. A
stream is identified by an integer seed plus a tuple of labels (strings or
ints); labels are hashed with CRC-32 so the mapping is stable across
platforms and Python versions, and fed to ``SeedSequence`` as entropy.
"""

from __future__ import annotations

import zlib

import numpy as np


def _label_word(label) -> int:
    if isinstance(label, (int, np.integer)):
        return int(label) & 0xFFFFFFFF
    return zlib.crc32(str(label).encode("utf-8"))


def make_rng(seed: int, *labels) -> np.random.Generator:
    words = [int(seed) & 0xFFFFFFFF, (int(seed) >> 32) & 0xFFFFFFFF]
    words += [_label_word(x) for x in labels]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(words)))
