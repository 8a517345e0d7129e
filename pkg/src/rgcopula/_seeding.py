"""Named random sub-streams derived from one root seed.

``substream(root, "bootstrap")`` always yields the same generator for the same
root and name, independent of what other streams were drawn before it.
"""

import zlib

import numpy as np


def seed_sequence(root: int, name: str) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(root) & 0xFFFFFFFF, zlib.crc32(name.encode())])


def substream(root: int, name: str) -> np.random.Generator:
    return np.random.default_rng(seed_sequence(root, name))


def child_seeds(root: int, name: str, n: int) -> list:
    """``n`` independent child seeds, e.g. one per bootstrap replicate."""
    return seed_sequence(root, name).spawn(n)
