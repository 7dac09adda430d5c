"""Reproducible random streams.

Every random draw in the package flows from one root seed through named
substreams built on the Philox counter-based bit generator.  A substream
is addressed by the root seed plus a path of labels, e.g.
``substream(7, "dataset", 3)``.  Labels are mapped to integers with
CRC-32, so the derivation is stable across platforms and Python
versions, and two distinct paths never collide in practice.

Draw order within a substream is part of the contract: generators
document the order in which they consume values, and the same
(seed, path) always reproduces the same values.
"""

from __future__ import annotations

import zlib

import numpy as np


def _label_to_int(label) -> int:
    if isinstance(label, (int, np.integer)):
        if label < 0:
            raise ValueError(f"stream path ints must be non-negative, got {label}")
        return int(label)
    if isinstance(label, str):
        return zlib.crc32(label.encode("utf-8"))
    raise TypeError(f"stream path components must be int or str, got {type(label)!r}")


def substream(seed: int, *path) -> np.random.Generator:
    """Return a Generator for the substream addressed by (seed, *path)."""
    words = [_label_to_int(seed)] + [_label_to_int(p) for p in path]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(words)))
