"""Named seed derivation.

Every random stream in a run is derived from one master seed plus a path of
labels, e.g. ``derive_seed(seed, "series", "W12", "train")``. The
child seed is the first 8 bytes (little endian) of the SHA-256 digest of the
master seed and the path components joined by ``/``. The mapping depends only
on the path, so the order in which tasks run never changes any stream.
"""

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1


def derive_seed(master, *path):
    master = int(master) & MASK64
    key = "/".join([str(master)] + [str(p) for p in path]).encode("utf-8")
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "little")


def rng_for(master, *path):
    """A fresh ``numpy.random.Generator`` (PCG64) for the given derivation path."""
    return np.random.Generator(np.random.PCG64(derive_seed(master, *path)))
