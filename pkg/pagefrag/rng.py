"""Deterministic PRNG streams for reproducible runs.

Every consumer (a data generator, the mutation sampler, the threshold search)
draws from its own named stream derived from one global seed.
"""

import hashlib
import random as _random
from typing import Sequence, TypeVar

T = TypeVar("T")


def derive_seed(seed: int, name: str) -> int:
    """Stable 64-bit seed for the stream called `name` under `seed`."""
    digest = hashlib.sha256(f"{seed}:{name}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


class DeterministicRNG:
    """Seeded PRNG wrapper with named child streams."""

    def __init__(self, seed: int, name: str = "root"):
        self._seed = seed
        self._name = name
        self._rng = _random.Random(derive_seed(seed, name))

    @property
    def seed(self) -> int:
        return self._seed

    def child(self, name: str) -> "DeterministicRNG":
        return DeterministicRNG(self._seed, f"{self._name}/{name}")

    def randbelow(self, n: int) -> int:
        return self._rng.randrange(n)

    def random(self) -> float:
        return self._rng.random()

    def choice(self, items: Sequence[T]) -> T:
        return items[self._rng.randrange(len(items))]

    def randint(self, a: int, b: int) -> int:
        return self._rng.randint(a, b)
