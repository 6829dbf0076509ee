"""Seed derivation so per-sample randomness does not depend on processing order."""

_MASK64 = (1 << 64) - 1
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def splitmix64(value):
    """One round of SplitMix64 over a 64-bit integer."""
    z = (value + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(base_seed, sample_id):
    return splitmix64((int(base_seed) ^ int(sample_id)) & _MASK64)


def fnv1a64(text):
    h = _FNV_OFFSET
    for byte in text.encode("utf-8"):
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def uniform_index(seed, n):
    """Map a 64-bit seed to an index in ``range(n)`` by multiply-shift."""
    return (splitmix64(seed) * n) >> 64
