"""Deterministic seed derivation.

All randomness flows from a single master seed. Per-task seeds are derived
by hashing the master seed together with stable task labels, so parallel
and serial runs draw identical samples regardless of scheduling.
"""

import hashlib


def derive_seed(master: int, *parts) -> int:
    """Derive a 63-bit seed from a master seed and stable label parts."""
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(master)).encode("utf-8"))
    for part in parts:
        h.update(b"\x1f")
        h.update(str(part).encode("utf-8"))
    return int.from_bytes(h.digest(), "big") >> 1


def pair_seed(master: int, a, b) -> int:
    """Seed for an unordered pair; identical for (a, b) and (b, a)."""
    first, second = sorted([str(a), str(b)])
    return derive_seed(master, first, second)
