"""Counter-mode pseudorandom function used for all shared randomness.

Every random object in the package (sketch matrices, level hashes, the
lower-bound permutation, subsampled sets, stub coins) is a deterministic
function of a 64-bit seed through :func:`prf`. The same function is
available on Python ints, on numpy ``uint64`` arrays and inside numba
kernels; the three agree bit for bit.
"""

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB


def tag(label: str) -> int:
    """64-bit domain-separation constant for a short ASCII label."""
    return int.from_bytes(hashlib.blake2b(label.encode(), digest_size=8).digest(), "little")


TAG_MATRIX = tag("matrix")
TAG_LEVEL = tag("level")
TAG_PERM = tag("perm")
TAG_SUBSAMPLE = tag("subsample")
TAG_BUCKET = tag("bucket")
TAG_FINGERPRINT = tag("fingerprint")
TAG_COIN = tag("coin")
TAG_SAMPLE = tag("sample")
TAG_DERIVE = tag("derive")


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


def prf(key: int, domain: int, a: int, b: int = 0) -> int:
    """Keyed 64-bit output for the counter pair ``(a, b)`` under ``domain``."""
    h = mix64((key & MASK64) ^ domain)
    h = mix64(h + (a + 1) * GOLDEN)
    return mix64(h + (b + 1) * GOLDEN)


def derive_seed(seed: int, *labels) -> int:
    """Child seed for an independent stream of shared randomness."""
    h = seed & MASK64
    for label in labels:
        x = tag(label) if isinstance(label, str) else int(label)
        h = prf(h, TAG_DERIVE, x & MASK64)
    return h


def mix64_array(z: np.ndarray) -> np.ndarray:
    z = z.astype(np.uint64, copy=True)
    z ^= z >> np.uint64(30)
    z *= np.uint64(MIX1)
    z ^= z >> np.uint64(27)
    z *= np.uint64(MIX2)
    z ^= z >> np.uint64(31)
    return z


def prf_array(key: int, domain: int, a, b=0) -> np.ndarray:
    """Vectorized :func:`prf`; ``a`` and ``b`` broadcast against each other."""
    a = np.asarray(a, dtype=np.uint64)
    b = np.asarray(b, dtype=np.uint64)
    g = np.uint64(GOLDEN)
    one = np.uint64(1)
    h0 = np.uint64(mix64((key & MASK64) ^ domain))
    h = mix64_array(h0 + (a + one) * g)
    return mix64_array(h + (b + one) * g)
