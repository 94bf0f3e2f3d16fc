"""Deterministic, splittable random streams for reproducible simulation.

The generator is xoshiro256++ seeded through splitmix64, so every stream is
a pure function of a 64-bit seed.  Independent streams for replications,
rays, grid cells, etc. are derived with :func:`derive`, which folds a path
of nonnegative integers into a parent seed.  Because streams are derived
rather than split sequentially, work items can run in any order (or in
parallel) and still see the same random numbers.

The exact same generator is re-implemented on ``uint64`` arrays inside the
compiled simulation kernel (see ``_kernel.py``); the two implementations
are kept bit-identical and a test enforces it.  Not cryptographic.
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


def _mix64(z: int) -> int:
    """splitmix64 output finalizer (Stafford's mix13)."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def splitmix64(state: int) -> tuple[int, int]:
    """Advance a splitmix64 state; returns (new_state, output)."""
    state = (state + _GAMMA) & _MASK64
    return state, _mix64(state)


def derive(seed: int, *path: int) -> int:
    """Derive a child seed from ``seed`` and a path of nonnegative integers.

    Deterministic, order-sensitive, and avalanching, so (seed, 3, 1) and
    (seed, 1, 3) give unrelated children.
    """
    h = seed & _MASK64
    for c in path:
        if c < 0:
            raise ValueError("path components must be nonnegative")
        h = _mix64((h + (_GAMMA * (c + 1))) & _MASK64)
    return h


class Xoshiro256PP:
    """xoshiro256++ with the canonical splitmix64 state initialization."""

    __slots__ = ("s0", "s1", "s2", "s3")

    def __init__(self, seed: int):
        st = seed & _MASK64
        st, self.s0 = splitmix64(st)
        st, self.s1 = splitmix64(st)
        st, self.s2 = splitmix64(st)
        st, self.s3 = splitmix64(st)
        if self.s0 == self.s1 == self.s2 == self.s3 == 0:  # pragma: no cover
            self.s0 = _GAMMA

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self.s0, self.s1, self.s2, self.s3
        x = (s0 + s3) & _MASK64
        result = (((x << 23) | (x >> 41)) + s0) & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = ((s3 << 45) | (s3 >> 19)) & _MASK64
        self.s0, self.s1, self.s2, self.s3 = s0, s1, s2, s3
        return result

    def uniform(self) -> float:
        """A double in (0, 1] — never 0, so ``log(u)`` is always finite."""
        return ((self.next_u64() >> 11) + 1) * 2.0**-53
