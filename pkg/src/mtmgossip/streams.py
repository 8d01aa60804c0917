"""Seeded random streams keyed by (purpose, node, step).

Each draw site gets its own ``random.Random`` derived from the master seed,
so reordering the simulation loop never changes which numbers a node sees.
"""

import hashlib
import random
import struct

SELECT = 1
ACCEPT = 2
ADVERSARY = 3
SEEDING = 4


def derive(seed: int, *keys: int) -> int:
    data = struct.pack(f"<{len(keys) + 1}Q", *((x & 0xFFFFFFFFFFFFFFFF) for x in (seed, *keys)))
    return int.from_bytes(hashlib.blake2b(data, digest_size=8).digest(), "little")


def stream(seed: int, *keys: int) -> random.Random:
    return random.Random(derive(seed, *keys))


class LazyStream:
    """Defers building the generator until the first draw.

    Creating a ``random.Random`` costs far more than a typical selection, and
    most nodes in most rounds never draw.
    """

    __slots__ = ("_key", "_rng")

    def __init__(self, seed: int, *keys: int):
        self._key = (seed, *keys)
        self._rng = None

    def __getattr__(self, name):
        if self._rng is None:
            self._rng = stream(*self._key)
        return getattr(self._rng, name)
