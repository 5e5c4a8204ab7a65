"""Seed derivation: every random stream is keyed by (root seed, tag, index...)."""

from __future__ import annotations

FNV64_OFFSET = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3


def fnv1a64(data: bytes) -> int:
    h = FNV64_OFFSET
    for b in data:
        h ^= b
        h = (h * FNV64_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


def derive_seed(seed: int, tag: str, *index: int) -> int:
    """Mix a root seed with a tag and optional indices into a fresh 64-bit seed."""
    payload = f"{int(seed) & 0xFFFFFFFFFFFFFFFF}:{tag}:" + ",".join(str(int(i)) for i in index)
    return fnv1a64(payload.encode())
