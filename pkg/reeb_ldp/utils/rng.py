"""Counter-based random streams.

Every stream is a Philox generator whose 128-bit key is a stable hash of
(seed, module, task...). Draws advance the Philox counter, so the k-th draw
of a stream is fixed by its key and k alone, independent of worker layout.
"""

import hashlib

import numpy as np


def derive_key(seed, *labels):
    h = hashlib.blake2b(digest_size=16)
    h.update(str(int(seed) & 0xFFFFFFFFFFFFFFFF).encode())
    for label in labels:
        h.update(b"\x1f")
        h.update(str(label).encode())
    return int.from_bytes(h.digest(), "little")


def stream(seed, *labels):
    return np.random.Generator(np.random.Philox(key=derive_key(seed, *labels)))
